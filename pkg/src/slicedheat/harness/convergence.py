"""Convergence sweeps over uniform partitions with oracle comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ConfigError, UnsupportedError
from ..oracle import fd_reference_evolve, spectral_evolve, spectral_model_for
from ..semigroup import CHUNK_SIZE, GENERATOR_NAME, Partition, estimate_slice
from .config import RunConfig

CONVENTIONS = {
    "energy": "E(gamma) = 1/4 * integral |gamma'|^2",
    "velocity_variance": "2 / dt per component",
    "operator_sign": "L = -sum d^2/dx_i^2 + V in the flat trivialization",
    "weight": "inverse B-path-ordered exponential applied to u at the endpoint",
}


@dataclass
class ConvergenceReport:
    rows: list[dict]
    summary: list[dict]
    metadata: dict
    chart_dim: int = 1
    descriptive: bool = False


def _versions() -> dict:
    import scipy

    from .. import __version__

    return {"slicedheat": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def select_oracle(cfg: RunConfig, g, b, B, u):
    """Return ``(callable or None, description)`` for the configured problem."""
    if cfg.oracle == "none":
        return None, "none"
    pot = b.params.get("potential", {"name": "zero"}) if b.params else {"name": "zero"}
    con = b.params.get("connection", {"name": "zero"}) if b.params else {"name": "zero"}
    pname, cname = pot.get("name", "zero"), con.get("name", "zero")
    spectral_ok = b.rank == 1 and pname in ("zero", "constant") and cname in ("zero", "circle-holonomy")
    if cfg.oracle in ("auto", "spectral") and spectral_ok:
        shift = float(pot.get("value", 1.0)) if pname == "constant" else 0.0
        holonomy = float(con.get("c", 0.5)) if cname == "circle-holonomy" else 0.0
        try:
            model = spectral_model_for(g, B.preset, holonomy, shift)
            evolved = spectral_evolve(model, u, cfg.t)
            return evolved, f"spectral:{model.problem}"
        except UnsupportedError:
            if cfg.oracle == "spectral":
                raise
    elif cfg.oracle == "spectral":
        raise UnsupportedError("no spectral oracle for this bundle")
    fd_ok = g.kind == "interval" and b.rank == 1 and cname == "zero" and B.preset in ("dirichlet", "neumann")
    if cfg.oracle in ("auto", "fd") and fd_ok:
        V = None if b.potential is None else (lambda x: np.asarray(b.potential(x))[:, 0, 0])
        return fd_reference_evolve(g, V, B.preset, u, cfg.t), f"fd:{B.preset}"
    if cfg.oracle == "fd":
        raise UnsupportedError("finite-difference oracle needs a scalar interval problem without connection")
    return None, "none"


def run_convergence(cfg: RunConfig, progress=None) -> ConvergenceReport:
    """Estimates on the grid for every partition size, compared with the oracle."""
    g, b, B, u = cfg.build()
    pts = cfg.grid_points(g)
    oracle, oracle_name = select_oracle(cfg, g, b, B, u)
    if oracle is None and not cfg.descriptive:
        raise ConfigError("no oracle exists for this problem; set run.descriptive = true for a descriptive run")
    oracle_vals = oracle(pts) if (oracle is not None and len(pts)) else None
    rows: list[dict] = []
    summary: list[dict] = []
    for N in cfg.partitions:
        tau = Partition.uniform(cfg.t, N)
        errs, ses, rejected = [], [], 0
        for i, x in enumerate(pts):
            est = estimate_slice(
                g, b, B, u, x, tau, cfg.samples, cfg.seed, antithetic=cfg.antithetic, workers=cfg.workers
            )
            rejected += est.rejected
            for comp in range(u.rank):
                ref = oracle_vals[i, comp] if oracle_vals is not None else math.nan
                err = abs(est.value[comp] - ref) if oracle_vals is not None else math.nan
                rows.append(
                    {
                        "N": N,
                        "mesh": tau.mesh,
                        "x": [float(c) for c in x],
                        "component": comp,
                        "estimate": est.value[comp].item(),
                        "stderr": float(est.stderr[comp]),
                        "oracle": ref.item() if hasattr(ref, "item") else ref,
                        "abs_error": float(err),
                        "rejected": est.rejected,
                    }
                )
                errs.append(float(err))
                ses.append(float(est.stderr[comp]))
            if progress is not None:
                progress(N, i)
        errs_a = np.asarray(errs)
        summary.append(
            {
                "N": N,
                "mesh": tau.mesh,
                "sup_error": float(np.max(errs_a)) if errs else math.nan,
                "l2_error": float(np.sqrt(np.mean(errs_a**2))) if errs else math.nan,
                "sup_error_stderr": float(ses[int(np.argmax(errs_a))]) if errs and np.all(np.isfinite(errs_a)) else math.nan,
                "max_stderr": float(max(ses)) if ses else math.nan,
                "rejected": rejected,
            }
        )
    metadata = {
        "seed": cfg.seed,
        "config_sha256": cfg.hash(),
        "conventions": CONVENTIONS,
        "oracle": oracle_name,
        "rng": {"generator": GENERATOR_NAME, "chunk_size": CHUNK_SIZE, "key": "seed + (chunk << 64)"},
        "versions": _versions(),
        "norms": {"sup": "max over grid", "l2": "root mean square over grid"},
    }
    return ConvergenceReport(rows, summary, metadata, g.chart_dim, oracle is None)
