"""Acceptance criteria 1-10, one PASS/FAIL line each."""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from slicedheat.billiard import OK
from slicedheat.bundle import BoundaryOperator, BundleSpec, bundle_from_descriptor
from slicedheat.geometry import IMPLICIT_SHAPES, Circle, Disk, FlatTorus, Interval, Sphere
from slicedheat.harness import config as cfgmod
from slicedheat.harness.convergence import run_convergence
from slicedheat.harness.properties import (
    antidevelopment_straightness,
    flow_inversion,
    measure_preservation,
    rescaling,
    speed_preservation,
)
from slicedheat.harness.report import emit_report
from slicedheat.oracle import image_evolve
from slicedheat.sections import section_from_descriptor
from slicedheat.semigroup import Partition, estimate_slice, generator_probe, quadrature_step_1d, sample_paths

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
RESULTS: list[str] = []


def record(n: int, passed: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)


def timed_run(name, workers, out):
    cfg = cfgmod.load(CONFIGS / name)
    cfg.workers = workers
    t0 = time.perf_counter()
    rep = run_convergence(cfg)
    elapsed = time.perf_counter() - t0
    paths = emit_report(rep, out, "csv", cfg.output["stem"])
    return rep, paths["data"].read_bytes(), elapsed


@pytest.fixture(scope="module")
def flat_run(tmp_path_factory):
    return timed_run("interval_dirichlet.toml", 1, tmp_path_factory.mktemp("c1"))


@pytest.fixture(scope="module")
def neumann_run(tmp_path_factory):
    return timed_run("interval_neumann_cos.toml", 1, tmp_path_factory.mktemp("c4"))


def decreasing_within(summary, k=2.0):
    errs = [s["sup_error"] for s in summary]
    ses = [s["sup_error_stderr"] for s in summary]
    return all(errs[i + 1] <= errs[i] + k * ses[i + 1] for i in range(len(errs) - 1))


def test_criterion_01_flat_exactness(flat_run):
    rep, _, elapsed = flat_run
    worst = max(r["abs_error"] / r["stderr"] for r in rep.rows)
    ok = worst <= 4.0 and elapsed <= 30.0 and len(rep.rows) == 9 * 4
    record(1, ok, f"max |err|/SE = {worst:.3f} (<= 4) over N in {{1,2,4,8}}, {elapsed:.1f} s (<= 30)")
    assert ok


def test_criterion_02_dirichlet_sign_weight():
    g = Interval(0.0, math.pi)
    u = section_from_descriptor({"name": "sin-series", "coefficients": [1.0, 0.5, 0.25]}, g)
    xs = (0.4, 1.0, 1.6, 2.2, 2.9)
    t0 = time.perf_counter()
    diffs = [abs(quadrature_step_1d(g, BundleSpec(), BoundaryOperator.dirichlet(), u, [x], 0.25)[0]
                 - image_evolve("dirichlet", u, x, 0.25)) for x in xs]
    elapsed = time.perf_counter() - t0
    ok = max(diffs) <= 1e-4 and elapsed <= 5.0
    record(2, ok, f"max |quadrature - image sum| = {max(diffs):.2e} (<= 1e-4), {elapsed:.2f} s (<= 5)")
    assert ok


def test_criterion_03_boundary_dirichlet_zero():
    g = Interval(0.0, math.pi)
    t0 = time.perf_counter()
    vals = []
    for name in ("cos-mode", "sin-mode"):
        u = section_from_descriptor({"name": name, "k": 1}, g)
        for M, N in ((1, 1), (2, 3), (7, 2), (4097, 4), (20_001, 1)):
            e = estimate_slice(g, BundleSpec(), BoundaryOperator.dirichlet(), u, [0.0], Partition.uniform(0.25, N), M,
                               seed=M, antithetic=True)
            vals.append(float(abs(e.value[0])))
    for x in (0.0, math.pi):
        b = bundle_from_descriptor({"potential": {"name": "cosine-well"}}, g)
        u = section_from_descriptor({"name": "cos-mode", "k": 1}, g)
        e = estimate_slice(g, b, BoundaryOperator.dirichlet(), u, [x], Partition.uniform(0.25, 3), 10_001, antithetic=True)
        vals.append(float(abs(e.value[0])))
    elapsed = time.perf_counter() - t0
    ok = max(vals) == 0.0 and elapsed <= 5.0
    record(3, ok, f"max |estimate at boundary| = {max(vals)!r} (== 0) over {len(vals)} runs, {elapsed:.2f} s (<= 5)")
    assert ok


def test_criterion_04_chernoff_with_potential(neumann_run):
    rep, _, elapsed = neumann_run
    errs = [s["sup_error"] for s in rep.summary]
    final, se = rep.summary[-1]["sup_error"], rep.summary[-1]["sup_error_stderr"]
    sup_u0 = 1.0
    ok = decreasing_within(rep.summary) and final <= max(0.005 * sup_u0, 4 * se) and elapsed <= 180.0
    record(4, ok, f"sup errors {[f'{e:.4g}' for e in errs]}, final {final:.4g} <= {max(0.005, 4 * se):.4g}, {elapsed:.1f} s (<= 180)")
    assert ok


def test_criterion_05_sphere(tmp_path):
    rep, _, elapsed = timed_run("sphere_band1.toml", 1, tmp_path)
    errs = [s["sup_error"] for s in rep.summary]
    final, se = rep.summary[-1]["sup_error"], rep.summary[-1]["sup_error_stderr"]
    ok = decreasing_within(rep.summary) and final <= 0.01 * 1.0 + 4 * se and elapsed <= 180.0
    record(5, ok, f"sup errors {[f'{e:.4g}' for e in errs]}, final {final:.4g} <= {0.01 + 4 * se:.4g}, {elapsed:.1f} s (<= 180)")
    assert ok


def test_criterion_06_holonomy(tmp_path):
    rep, _, elapsed = timed_run("circle_holonomy.toml", 1, tmp_path)
    ratios = [r["abs_error"] / r["stderr"] for r in rep.rows]
    oracle_ok = all(abs(r["oracle"] - math.exp(-2.25) * complex(math.cos(r["x"][0]), math.sin(r["x"][0]))) < 1e-14
                    for r in rep.rows)
    ok = len(rep.rows) == 8 and oracle_ok and max(ratios) <= 4.0 and elapsed <= 60.0
    record(6, ok, f"max |err|/SE = {max(ratios):.3f} (<= 4) at 8 angles, {elapsed:.1f} s (<= 60)")
    assert ok


SKEW = [[[0.0, 0.7], [-0.7, 0.0]], [[0.0, -0.3], [0.3, 0.0]]]


def random_config(rng):
    kind = rng.choice(["interval", "disk", "ellipse", "circle", "torus", "sphere"])
    g = {
        "interval": lambda: Interval(0.0, float(rng.uniform(0.5, 3.0))),
        "disk": lambda: Disk(float(rng.uniform(0.5, 2.0))),
        "ellipse": lambda: IMPLICIT_SHAPES["ellipse"](),
        "circle": lambda: Circle(float(rng.uniform(0.5, 2.0))),
        "torus": lambda: FlatTorus(1.0, float(rng.uniform(0.5, 2.0))),
        "sphere": lambda: Sphere(float(rng.uniform(0.5, 2.0))),
    }[kind]()
    rank = 2 if (g.chart_dim == 2 and rng.random() < 0.5) else 1
    amp = float(rng.uniform(-1.0, 1.0))
    if rank == 2:
        pot = {"name": "diagonal", "values": [amp, float(rng.uniform(-1, 1))]} if rng.random() < 0.5 else \
            {"name": "cosine-well", "amplitude": amp, "frequency": float(rng.uniform(0.5, 4))}
        con = {"name": "constant", "matrices": (np.array(SKEW) * rng.uniform(0, 2)).tolist()} if rng.random() < 0.7 \
            else {"name": "zero"}
    else:
        pot = rng.choice([{"name": "constant", "value": amp}, {"name": "cosine-well", "amplitude": amp,
                                                               "frequency": float(rng.uniform(0.5, 4))}])
        con = {"name": "circle-holonomy", "c": float(rng.uniform(-2, 2))} if kind == "circle" and rng.random() < 0.6 \
            else {"name": "zero"}
    desc = {"rank": rank, "potential": dict(pot), "connection": con}
    b = bundle_from_descriptor(desc, g)
    desc["alpha"] = float(rng.uniform(b.alpha, 1.0))
    b = bundle_from_descriptor(desc, g)
    signs = rng.choice([-1.0, 1.0], rank)
    B = BoundaryOperator.blockwise(signs) if rank == 2 else (BoundaryOperator.dirichlet() if signs[0] < 0 else BoundaryOperator.neumann())
    if rank == 2:
        u = section_from_descriptor({"name": "constant", "value": rng.uniform(-1, 1, 2).tolist()}, g)
    elif kind == "interval":
        u = section_from_descriptor({"name": "cos-series", "coefficients": rng.uniform(-1, 1, 3).tolist()}, g)
    elif kind == "sphere":
        u = section_from_descriptor({"name": "sphere-band", "c0": 0.3, "linear": rng.uniform(-1, 1, 3).tolist()}, g)
    elif kind == "circle":
        u = section_from_descriptor({"name": "fourier-mode", "k": int(rng.integers(-3, 4))}, g)
    elif kind == "torus":
        u = section_from_descriptor({"name": "torus-mode", "k": rng.integers(-2, 3, 2).tolist()}, g)
    else:
        u = section_from_descriptor({"name": "constant", "value": float(rng.uniform(-1, 1))}, g)
    x = g.sample_boundary(rng, 1)[0] if (g.has_boundary and rng.random() < 0.3) else g.sample_points(rng, 1)[0]
    t = float(rng.uniform(0.05, 1.0))
    tau = Partition.uniform(t, int(rng.integers(1, 7)))
    return g, b, B, u, x, tau


def test_criterion_07_norm_bounds():
    rng = np.random.default_rng(20240611)
    t0 = time.perf_counter()
    worst_w, worst_e, n_weights = 0.0, 0.0, 0
    for i in range(100):
        g, b, B, u, x, tau = random_config(rng)
        bound = math.exp(tau.total * b.alpha)
        batch = sample_paths(g, b, B, x, tau, np.random.default_rng(i), m=1000)
        W = batch.weights[batch.ok]
        n_weights += len(W)
        if len(W):
            worst_w = max(worst_w, float(np.max(np.linalg.norm(W, ord=2, axis=(1, 2)))) / bound)
        e = estimate_slice(g, b, B, u, x, tau, 1000, seed=i)
        worst_e = max(worst_e, float(np.linalg.norm(e.value)) / (bound * u.sup_norm))
    elapsed = time.perf_counter() - t0
    ok = worst_w <= 1 + 1e-6 and worst_e <= 1.0 and elapsed <= 60.0
    record(7, ok, f"max ||Q||/e^(t alpha) = {worst_w:.9f} over {n_weights} weights, max ||P u||/(e^(t alpha) sup|u|) = "
                  f"{worst_e:.4f}, {elapsed:.1f} s (<= 60)")
    assert ok


def test_criterion_08_generator_probe():
    g = Interval(0.0, math.pi)
    u = section_from_descriptor({"name": "sin-mode", "k": 1}, g)
    t0 = time.perf_counter()
    r = generator_probe(g, BundleSpec(), BoundaryOperator.dirichlet(), u, [1.2], M=4_000_000, seed=20240611)
    elapsed = time.perf_counter() - t0
    target = -0.9320
    tol = abs(-math.sin(1.2)) * 0.02 + 4 * r.stderr[0]
    ok = abs(r.value[0] - target) <= tol and not r.inconclusive and elapsed <= 60.0
    record(8, ok, f"estimate {r.value[0]:.5f} +- {r.stderr[0]:.5f}, |diff| = {abs(r.value[0] - target):.5f} <= {tol:.5f}, "
                  f"inconclusive={r.inconclusive}, "
                  f"{elapsed:.1f} s (<= 60)")
    assert ok


def test_criterion_09_billiard_suite():
    t0 = time.perf_counter()
    res = [speed_preservation(), flow_inversion(), rescaling(), antidevelopment_straightness(), measure_preservation()]
    elapsed = time.perf_counter() - t0
    ok = all(r.passed for r in res) and elapsed <= 60.0
    record(9, ok, ", ".join(f"{r.name}={r.measured:.3g}" for r in res) + f", {elapsed:.1f} s (<= 60)")
    assert ok


def test_criterion_10_reproducibility(flat_run, neumann_run, tmp_path):
    same = []
    for name, base in (("interval_dirichlet.toml", flat_run), ("interval_neumann_cos.toml", neumann_run)):
        _, data8, _ = timed_run(name, 8, tmp_path / f"{name}-8")
        same.append(data8 == base[1])
    _, again, _ = timed_run("interval_dirichlet.toml", 1, tmp_path / "again")
    same.append(again == flat_run[1])
    ok = all(same)
    record(10, ok, "criteria 1 and 4 CSVs byte-identical at 1 and 8 workers and on rerun" if ok else f"mismatch {same}")
    assert ok
