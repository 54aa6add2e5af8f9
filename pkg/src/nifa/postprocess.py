"""Identifiability post-processing of posterior chains.

Per retained sample and per shared-location partition of the loading columns:
orthogonalize by a rotation, match columns and signs against a pivot sample,
rotate the latent mappings accordingly, then rescale columns to unit norm.
The product Lambda * g(u) is preserved throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import NiftyState, PiecewiseLinearMap
from .sampler import PosteriorChain


class DegenerateLoadingError(ValueError):
    """A loading column or partition is numerically degenerate."""


@dataclass(frozen=True)
class AlignmentReport:
    """Rotations, permutations and sign flips applied per sample and partition."""

    pivot_index: int
    rotations: tuple          # rotations[m][k] is the block-orthogonal matrix
    permutations: tuple       # permutations[m][k]: new col j came from old col perm[j]
    sign_flips: tuple         # sign_flips[m][k]: +-1 per column after permutation
    ties: tuple = ()          # (sample, partition) pairs where matching tied


def varimax_rotation(block: np.ndarray, max_iter: int = 200, tol: float = 1e-10) -> np.ndarray:
    """Orthogonal varimax rotation matrix for a P x m loading block."""
    p, m = block.shape
    rot = np.eye(m)
    if m < 2:
        return rot
    var_old = 0.0
    for _ in range(max_iter):
        lam = block @ rot
        grad = block.T @ (lam**3 - lam * (np.sum(lam**2, axis=0) / p))
        u, s, vt = np.linalg.svd(grad)
        rot = u @ vt
        var_new = float(np.sum(s))
        if var_new <= var_old * (1 + tol):
            break
        var_old = var_new
    return rot


def orthogonalize_partition(lambda_block: np.ndarray):
    """Rotate a partition so its columns are mutually orthogonal.

    Varimax first, then the right singular vectors of the rotated block finish
    the orthogonalization. Returns (rotated block, orthogonal R).
    """
    block = np.atleast_2d(np.asarray(lambda_block, dtype=float))
    p, m = block.shape
    sv = np.linalg.svd(block, compute_uv=False)
    if sv.size < m or sv[-1] <= 1e-12 * max(sv[0], 1.0):
        raise DegenerateLoadingError("partition is rank deficient")
    r1 = varimax_rotation(block)
    _, _, vt = np.linalg.svd(block @ r1, full_matrices=False)
    rot = r1 @ vt.T
    # deterministic convention: columns come out in descending-norm order
    # (the SVD guarantees that); flip each so its largest-|entry| is positive
    out = block @ rot
    for j in range(m):
        i = int(np.argmax(np.abs(out[:, j])))
        if out[i, j] < 0:
            rot[:, j] = -rot[:, j]
            out[:, j] = -out[:, j]
    return out, rot


def _partitions(state: NiftyState) -> list[np.ndarray]:
    """Factor indices grouped by shared latent location."""
    k0 = state.assignment.zero_based
    return [np.flatnonzero(k0 == k) for k in range(state.n_locations)]


def _greedy_match(pivot_block: np.ndarray, block: np.ndarray, tol: float = 1e-12):
    """Greedy column matching by maximal absolute inner product.

    Returns (perm, signs, tied): column j of the aligned block is
    signs[j] * block[:, perm[j]].
    """
    m = block.shape[1]
    inner = pivot_block.T @ block
    score = np.abs(inner).astype(float)
    perm = np.empty(m, dtype=int)
    signs = np.empty(m)
    tied = False
    for _ in range(m):
        best = np.max(score)
        i, j = np.unravel_index(np.argmax(score), score.shape)
        # ambiguous only if another candidate in the same row or column ties
        row_ties = np.sum(np.isclose(score[i, :], best, rtol=0.0, atol=tol))
        col_ties = np.sum(np.isclose(score[:, j], best, rtol=0.0, atol=tol))
        if max(row_ties, col_ties) > 1:
            tied = True
        perm[i] = j
        signs[i] = 1.0 if inner[i, j] >= 0 else -1.0
        score[i, :] = -np.inf
        score[:, j] = -np.inf
    return perm, signs, tied


def _apply_rotation(state: NiftyState, factor_idx: np.ndarray, rot: np.ndarray) -> NiftyState:
    """Right-multiply a loading partition by rot and rotate its mappings."""
    lam = state.loadings.copy()
    lam[:, factor_idx] = lam[:, factor_idx] @ rot
    n_pieces = state.splines[0].n_pieces
    coef = np.column_stack(
        [np.concatenate([[state.splines[h].intercept], state.splines[h].slopes])
         for h in factor_idx]
    )
    new_coef = coef @ rot
    splines = list(state.splines)
    for pos, h in enumerate(factor_idx):
        splines[h] = PiecewiseLinearMap(new_coef[0, pos], new_coef[1:, pos])
    return replace(state, loadings=lam, splines=tuple(splines))


def match_align(chain: PosteriorChain):
    """Orthogonalize every partition of every sample and align to a pivot.

    The pivot is the retained sample with the highest joint log posterior.
    Returns (aligned chain, AlignmentReport).
    """
    if len(chain) == 0:
        raise ValueError("cannot align an empty chain")
    pivot_index = int(np.argmax(chain.diagnostics.log_posterior_trace))
    parts = _partitions(chain.samples[0])

    pivot_blocks = []
    pivot_state = chain.samples[pivot_index]
    for idx in parts:
        rotated, _ = orthogonalize_partition(pivot_state.loadings[:, idx])
        pivot_blocks.append(rotated)

    aligned = []
    rotations, permutations, sign_flips, ties = [], [], [], []
    for m, sample in enumerate(chain.samples):
        rots_m, perms_m, signs_m = [], [], []
        new_state = sample
        for k, idx in enumerate(parts):
            _, r_orth = orthogonalize_partition(new_state.loadings[:, idx])
            block = new_state.loadings[:, idx] @ r_orth
            perm, signs, tied = _greedy_match(pivot_blocks[k], block)
            if tied:
                ties.append((m, k))
            size = idx.size
            # aligned column j = signs[j] * block[:, perm[j]]
            pmat = np.zeros((size, size))
            for j in range(size):
                pmat[perm[j], j] = signs[j]
            rot = r_orth @ pmat
            new_state = _apply_rotation(new_state, idx, rot)
            rots_m.append(rot)
            perms_m.append(perm.copy())
            signs_m.append(signs.copy())
        aligned.append(new_state)
        rotations.append(tuple(rots_m))
        permutations.append(tuple(perms_m))
        sign_flips.append(tuple(signs_m))

    report = AlignmentReport(
        pivot_index=pivot_index,
        rotations=tuple(rotations),
        permutations=tuple(permutations),
        sign_flips=tuple(sign_flips),
        ties=tuple(ties),
    )
    new_chain = PosteriorChain(tuple(aligned), chain.diagnostics, chain.config, chain.anchor)
    return new_chain, report


def normalize_columns(sample: NiftyState) -> NiftyState:
    """Scale each loading column to unit norm, moving the norm into its mapping."""
    norms = np.linalg.norm(sample.loadings, axis=0)
    if np.any(norms <= 0):
        raise DegenerateLoadingError("cannot normalize a zero loading column")
    lam = sample.loadings / norms
    splines = tuple(g.scaled(norms[h]) for h, g in enumerate(sample.splines))
    return replace(sample, loadings=lam, splines=splines)


def postprocess_chain(chain: PosteriorChain):
    """Full identifiability pipeline: align, then normalize every sample."""
    aligned, report = match_align(chain)
    normalized = tuple(normalize_columns(s) for s in aligned.samples)
    return (
        PosteriorChain(normalized, chain.diagnostics, chain.config, chain.anchor),
        report,
    )


def summarize(chain: PosteriorChain, n_grid: int = 101, level: float = 0.90):
    """Posterior means and central credible intervals for the aligned chain.

    Mappings are summarized by evaluating each sample's splines on a uniform
    grid of ``n_grid`` points. Returns a dict of arrays.
    """
    if len(chain) == 0:
        raise ValueError("cannot summarize an empty chain")
    lo_q, hi_q = (1 - level) / 2, 1 - (1 - level) / 2
    lam = np.stack([s.loadings for s in chain.samples])
    sig = np.stack([s.residual_variances for s in chain.samples])
    grid = np.linspace(0.0, 1.0, n_grid)
    g_vals = np.stack(
        [np.column_stack([g(grid) for g in s.splines]) for s in chain.samples]
    )
    def stats(arr):
        return (
            arr.mean(axis=0),
            np.quantile(arr, lo_q, axis=0),
            np.quantile(arr, hi_q, axis=0),
        )
    lam_mean, lam_lo, lam_hi = stats(lam)
    sig_mean, sig_lo, sig_hi = stats(sig)
    g_mean, g_lo, g_hi = stats(g_vals)
    return {
        "u_grid": grid,
        "loadings_mean": lam_mean, "loadings_lower": lam_lo, "loadings_upper": lam_hi,
        "variances_mean": sig_mean, "variances_lower": sig_lo, "variances_upper": sig_hi,
        "mappings_mean": g_mean, "mappings_lower": g_lo, "mappings_upper": g_hi,
    }
