"""Run-directory persistence: comma-separated numeric matrices with one header
row, JSON metadata records, and full chain round-tripping."""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .model import FactorAssignment, Hyperparameters, NiftyState, PiecewiseLinearMap
from .sampler import ChainDiagnostics, PosteriorChain
from .pretrain import AnchorSet


class IncompleteRunError(FileNotFoundError):
    """A run directory is missing required artifacts."""


def save_matrix(path, arr: np.ndarray, names: list[str] | None = None) -> None:
    arr = np.atleast_2d(np.asarray(arr, dtype=float))
    if arr.size == 0:
        cols = arr.shape[1] if arr.ndim == 2 else 0
        names = names or [f"c{i}" for i in range(cols)]
        Path(path).write_text(",".join(names) + "\n")
        return
    names = names or [f"c{i}" for i in range(arr.shape[1])]
    header = ",".join(names)
    np.savetxt(path, arr, delimiter=",", header=header, comments="")


def load_matrix(path):
    """Returns (array, column names) from a headered CSV matrix."""
    path = Path(path)
    with open(path) as fh:
        names = fh.readline().strip().split(",")
        body = fh.read()
    if not body.strip():
        return np.empty((0, len(names))), names
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return arr, names


def save_json(path, record: dict) -> None:
    Path(path).write_text(json.dumps(record, indent=2, default=_jsonable) + "\n")


def load_json(path) -> dict:
    return json.loads(Path(path).read_text())


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def save_anchor_set(out_dir, anchor: AnchorSet, extra_meta: dict | None = None) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_matrix(out_dir / "anchors.csv", anchor.coordinates,
                [f"anchor{k}" for k in range(anchor.n_anchors)])
    meta = {
        "n_anchors": anchor.n_anchors,
        "residual_variances": anchor.residual_variances,
        "source": anchor.source,
    }
    meta.update(extra_meta or {})
    save_json(out_dir / "anchor_meta.json", meta)


def load_anchor_set(anchor_dir) -> AnchorSet:
    anchor_dir = Path(anchor_dir)
    coords_path = anchor_dir / "anchors.csv"
    meta_path = anchor_dir / "anchor_meta.json"
    if not coords_path.exists() or not meta_path.exists():
        raise IncompleteRunError(f"missing anchor artifacts in {anchor_dir}")
    coords, _ = load_matrix(coords_path)
    meta = load_json(meta_path)
    return AnchorSet(coords, np.asarray(meta["residual_variances"]), meta["source"])


def _spline_coefficients(state: NiftyState) -> np.ndarray:
    """(L+1) x H matrix; row 0 holds intercepts."""
    return np.column_stack(
        [np.concatenate([[g.intercept], g.slopes]) for g in state.splines]
    )


def save_chain(run_dir, chain: PosteriorChain) -> None:
    """Persist a chain as one directory per sample plus a manifest record."""
    run_dir = Path(run_dir)
    samples_dir = run_dir / "samples"
    samples_dir.mkdir(parents=True, exist_ok=True)
    for m, state in enumerate(chain.samples):
        d = samples_dir / f"sample_{m:05d}"
        d.mkdir(exist_ok=True)
        save_matrix(d / "loadings.csv", state.loadings)
        save_matrix(d / "spline_coefficients.csv", _spline_coefficients(state))
        save_matrix(d / "latent_locations.csv", state.latent_locations)
        save_matrix(d / "residual_variances.csv", state.residual_variances[None, :])
        save_matrix(d / "local_scales.csv", state.local_scales)
        save_matrix(d / "global_scale.csv", np.array([[state.global_scale]]))
    save_matrix(
        run_dir / "log_posterior.csv",
        chain.diagnostics.log_posterior_trace[:, None],
        ["log_posterior"],
    )
    save_anchor_set(run_dir / "anchor", chain.anchor)
    save_json(
        run_dir / "manifest.json",
        {
            "n_samples": len(chain),
            "assignment": chain.samples[0].assignment.k_of_h if chain.samples else [],
            "mala_acceptance_rate": chain.diagnostics.mala_acceptance_rate,
            "block_seconds": chain.diagnostics.block_seconds,
            "config": asdict(chain.config),
        },
    )


def load_chain(run_dir) -> PosteriorChain:
    """Reconstruct a PosteriorChain from a run directory."""
    run_dir = Path(run_dir)
    manifest_path = run_dir / "manifest.json"
    missing = [
        str(p.name)
        for p in (manifest_path, run_dir / "log_posterior.csv", run_dir / "samples")
        if not p.exists()
    ]
    if missing:
        raise IncompleteRunError(f"run directory {run_dir} is missing: {', '.join(missing)}")
    manifest = load_json(manifest_path)
    hp = Hyperparameters(**manifest["config"])
    anchor = load_anchor_set(run_dir / "anchor")
    assignment = FactorAssignment(np.asarray(manifest["assignment"], dtype=int))
    trace, _ = load_matrix(run_dir / "log_posterior.csv")
    samples = []
    for m in range(manifest["n_samples"]):
        d = run_dir / "samples" / f"sample_{m:05d}"
        if not d.exists():
            raise IncompleteRunError(f"missing sample directory {d}")
        loadings, _ = load_matrix(d / "loadings.csv")
        coef, _ = load_matrix(d / "spline_coefficients.csv")
        u, _ = load_matrix(d / "latent_locations.csv")
        sig, _ = load_matrix(d / "residual_variances.csv")
        scales, _ = load_matrix(d / "local_scales.csv")
        tau, _ = load_matrix(d / "global_scale.csv")
        splines = tuple(
            PiecewiseLinearMap(coef[0, h], coef[1:, h]) for h in range(coef.shape[1])
        )
        samples.append(
            NiftyState(
                loadings=loadings,
                splines=splines,
                latent_locations=u,
                residual_variances=sig.ravel(),
                local_scales=scales,
                global_scale=float(tau.ravel()[0]),
                assignment=assignment,
            )
        )
    diagnostics = ChainDiagnostics(
        log_posterior_trace=trace.ravel(),
        mala_acceptance_rate=manifest["mala_acceptance_rate"],
        block_seconds=np.asarray(manifest["block_seconds"]),
    )
    return PosteriorChain(tuple(samples), diagnostics, hp, anchor)
