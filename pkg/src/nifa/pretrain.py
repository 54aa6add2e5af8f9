"""Diffusion-map pretraining: spectral embedding, intrinsic-dimension estimation,
anchor-column extraction, and anchor residual-variance estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .model import DataMatrix, ShapeError, spline_basis


class DegenerateGeometryError(RuntimeError):
    """The kernel or local-covariance structure is degenerate."""


@dataclass(frozen=True)
class DiffusionConfig:
    """Tuning parameters for the embedding and the dimension estimator.

    ``epsilon_dm=None`` uses the median pairwise distance; ``epsilon_local=None``
    uses the 10th percentile of pairwise distances among embedded coordinates.
    ``dimension_offset`` is added to the literal eigenvalue-ratio estimate.
    """

    epsilon_dm: float | None = None
    Q: int = 5
    epsilon_local: float | None = None
    delta: float = 0.5
    dimension_offset: int = 0

    def __post_init__(self):
        if self.epsilon_dm is not None and self.epsilon_dm <= 0:
            raise ValueError("epsilon_dm must be positive")
        if self.epsilon_local is not None and self.epsilon_local <= 0:
            raise ValueError("epsilon_local must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0,1)")
        if self.Q < 1:
            raise ValueError("Q must be at least 1")


@dataclass(frozen=True)
class AnchorSet:
    """Augmented anchor columns and their fixed residual variances."""

    coordinates: np.ndarray         # N x K
    residual_variances: np.ndarray  # length K
    source: str = "diffusion_map"   # or "external"

    def __post_init__(self):
        coords = np.atleast_2d(np.asarray(self.coordinates, dtype=float))
        var = np.asarray(self.residual_variances, dtype=float).ravel()
        if coords.shape[1] != var.size or coords.shape[1] < 1:
            raise ShapeError("one residual variance per anchor column required")
        if np.any(var <= 0):
            raise ValueError("anchor residual variances must be positive")
        if self.source not in ("diffusion_map", "external"):
            raise ValueError("source must be 'diffusion_map' or 'external'")
        object.__setattr__(self, "coordinates", coords)
        object.__setattr__(self, "residual_variances", var)

    @property
    def n_anchors(self) -> int:
        return self.coordinates.shape[1]


def kernel_matrix(data: DataMatrix, epsilon_dm: float) -> np.ndarray:
    """Gaussian affinity exp(-||x_i - x_j||^2 / eps^2); symmetric, unit diagonal."""
    if epsilon_dm <= 0:
        raise ValueError("epsilon_dm must be positive")
    sq = squareform(pdist(data.values, metric="sqeuclidean"))
    return np.exp(-sq / epsilon_dm**2)


def normalized_laplacian(kernel: np.ndarray, epsilon_dm: float) -> np.ndarray:
    """Density-normalized graph Laplacian L = (D^-1 W - I) / eps^2."""
    d = kernel.sum(axis=1)
    if np.any(d <= 0):
        raise DegenerateGeometryError("kernel has a zero row sum")
    w = kernel / np.outer(d, d)
    row = w.sum(axis=1)
    if np.any(row <= 0):
        raise DegenerateGeometryError("normalized kernel has a zero row sum")
    n = kernel.shape[0]
    return (w / row[:, None] - np.eye(n)) / epsilon_dm**2


def default_epsilon_dm(data: DataMatrix) -> float:
    """Median of pairwise distances."""
    d = pdist(data.values)
    med = float(np.median(d))
    if med <= 0:
        raise DegenerateGeometryError("median pairwise distance is zero")
    return med


def default_epsilon_local(coords: np.ndarray) -> float:
    """10th percentile of pairwise distances among embedded coordinates."""
    d = pdist(coords)
    q = float(np.quantile(d, 0.10))
    if q <= 0:
        raise DegenerateGeometryError("local radius collapsed to zero")
    return q


def diffusion_spectrum(data: DataMatrix, cfg: DiffusionConfig):
    """Eigen-decomposition of -L via its symmetric conjugate.

    Returns (eigenvalues, coordinates): the Q smallest non-trivial eigenvalues
    of -L in ascending order and the matching unit eigenvectors as columns.
    """
    n = data.n_rows
    if not 1 <= cfg.Q <= n - 1:
        raise ValueError("Q must satisfy 1 <= Q <= N-1")
    eps = cfg.epsilon_dm if cfg.epsilon_dm is not None else default_epsilon_dm(data)
    kern = kernel_matrix(data, eps)
    d = kern.sum(axis=1)
    if np.any(d <= 0):
        raise DegenerateGeometryError("kernel has a zero row sum")
    w = kern / np.outer(d, d)
    row = w.sum(axis=1)
    # D^-1 W is similar to the symmetric D^-1/2 W D^-1/2.
    sym = w / np.sqrt(np.outer(row, row))
    try:
        s, psi = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigen-decomposition failed: {exc}") from None
    # s ascending in the transition operator means mu = (1 - s)/eps^2 descending.
    order = np.argsort(s)[::-1]
    mu = (1.0 - s[order]) / eps**2
    vecs = psi[:, order] / np.sqrt(row)[:, None]
    # skip mu_0 = 0 (constant eigenvector); keep the next Q, ascending mu
    coords = vecs[:, 1 : cfg.Q + 1]
    coords = coords / np.linalg.norm(coords, axis=0)
    # sign convention: first entry of non-negligible magnitude is positive
    for q in range(coords.shape[1]):
        col = coords[:, q]
        lead = np.flatnonzero(np.abs(col) > 1e-12)
        if lead.size and col[lead[0]] < 0:
            coords[:, q] = -col
    return mu[1 : cfg.Q + 1], coords


def diffusion_coordinates(data: DataMatrix, cfg: DiffusionConfig) -> np.ndarray:
    """N x Q matrix of diffusion-map coordinates (unit-norm eigenvector columns)."""
    _, coords = diffusion_spectrum(data, cfg)
    return coords


def local_covariance(coords: np.ndarray, i: int, epsilon_local: float) -> np.ndarray:
    """Neighborhood scatter matrix at point i, averaged over all N points."""
    if epsilon_local <= 0:
        raise ValueError("epsilon_local must be positive")
    diffs = coords[i] - coords
    mask = np.linalg.norm(diffs, axis=1) <= epsilon_local
    sel = diffs[mask]
    return sel.T @ sel / coords.shape[0]


def mean_local_eigenvalues(coords: np.ndarray, epsilon_local: float) -> np.ndarray:
    """Per-rank means of local-covariance eigenvalues, sorted descending."""
    n, q = coords.shape
    acc = np.zeros(q)
    for i in range(n):
        vals = np.linalg.eigvalsh(local_covariance(coords, i, epsilon_local))
        acc += vals[::-1]
    return acc / n


def estimate_dimension(coords: np.ndarray, epsilon_local: float, delta: float) -> int:
    """Literal eigenvalue-ratio rule K = max{k : mean_{k+1}/mean_k >= delta}.

    Falls back to 1 when no index qualifies.
    """
    if coords.shape[1] < 2:
        raise ValueError("need at least 2 embedding coordinates")
    lam = mean_local_eigenvalues(coords, epsilon_local)
    if np.all(lam <= 0):
        raise DegenerateGeometryError("all mean local eigenvalues are zero")
    qualifying = [
        k + 1
        for k in range(lam.size - 1)
        if lam[k] > 0 and lam[k + 1] / lam[k] >= delta
    ]
    return max(qualifying) if qualifying else 1


def anchor_residual_variance(column: np.ndarray, n_pieces: int):
    """Residual variance of a candidate anchor column.

    Ranks the column to u* = r/N, fits least squares on the intercept-plus-
    clamp basis, and returns (RSS / (N - L - 2), u*).
    """
    col = np.asarray(column, dtype=float).ravel()
    n = col.size
    if n <= n_pieces + 2:
        raise ValueError(f"need more than L+2={n_pieces + 2} rows, got {n}")
    ranks = np.empty(n)
    ranks[np.argsort(col, kind="stable")] = np.arange(1, n + 1)
    u_star = ranks / n
    design = np.column_stack([np.ones(n), spline_basis(u_star, n_pieces)])
    coef, _, rank, _ = np.linalg.lstsq(design, col, rcond=None)
    if rank < design.shape[1]:
        raise np.linalg.LinAlgError("rank-deficient design in anchor regression")
    rss = float(np.sum((col - design @ coef) ** 2))
    return rss / (n - n_pieces - 2), u_star


def anchors_from_external(coordinates: np.ndarray, n_pieces: int) -> AnchorSet:
    """Build an AnchorSet from externally computed anchor coordinates."""
    coords = np.atleast_2d(np.asarray(coordinates, dtype=float))
    variances = np.array(
        [anchor_residual_variance(coords[:, k], n_pieces)[0] for k in range(coords.shape[1])]
    )
    return AnchorSet(coords, variances, source="external")


def run_pretraining(data: DataMatrix, cfg: DiffusionConfig, n_pieces: int) -> AnchorSet:
    """Full pipeline: embed, estimate K, extract anchors, estimate their variances."""
    coords = diffusion_coordinates(data, cfg)
    eps_local = (
        cfg.epsilon_local if cfg.epsilon_local is not None else default_epsilon_local(coords)
    )
    k = estimate_dimension(coords, eps_local, cfg.delta) + cfg.dimension_offset
    k = max(1, min(k, coords.shape[1]))
    anchors = coords[:, :k]
    variances = np.array(
        [anchor_residual_variance(anchors[:, j], n_pieces)[0] for j in range(k)]
    )
    return AnchorSet(anchors, variances, source="diffusion_map")
