"""Command line entry point: ``slicedheat <group> <command> [options]``."""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np
import tomli

from ..billiard import trace_reflected
from ..exceptions import ConfigError, DomainError, InvalidInputError, SlicedHeatError, UnsupportedError
from ..geometry import geometry_from_descriptor
from ..semigroup import Partition, estimate_slice
from . import config as config_mod
from .convergence import CONVENTIONS, _versions, run_convergence, select_oracle
from .properties import run_property_suite
from .report import emit_report, write_json, write_table, x_columns

EXIT_OK, EXIT_VALIDATION, EXIT_PROPERTY = 0, 2, 3


def _floats(text: str) -> np.ndarray:
    try:
        return np.array([float(s) for s in text.split(",")])
    except ValueError as exc:
        raise InvalidInputError(f"expected comma-separated numbers, got {text!r}") from exc


def _load(args) -> config_mod.RunConfig:
    if args.config is None:
        raise ConfigError("--config is required for this command")
    cfg = config_mod.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if args.format is not None:
        cfg.output["format"] = args.format
    if args.out is not None:
        cfg.output["dir"] = args.out
    return config_mod.validate(cfg)


def _estimate_rows(cfg, N: int):
    g, b, B, u = cfg.build()
    tau = Partition.uniform(cfg.t, N)
    rows = []
    for x in cfg.grid_points(g):
        e = estimate_slice(g, b, B, u, x, tau, cfg.samples, cfg.seed, antithetic=cfg.antithetic, workers=cfg.workers)
        for c in range(u.rank):
            rows.append([*map(float, x), c, e.value[c].item(), float(e.stderr[c]), e.samples_used, e.rejected])
    return g, rows


def _write_estimates(cfg, g, rows, suffix: str, extra: dict) -> Path:
    fmt = cfg.output.get("format", "csv")
    out = Path(cfg.output.get("dir", "out"))
    stem = f"{cfg.output.get('stem', 'run')}_{suffix}"
    cols = [*x_columns(g.chart_dim), "component", "estimate", "stderr", "samples", "rejected"]
    path = write_table(out / f"{stem}.{'csv' if fmt == 'csv' else 'jsonl'}", cols, rows, fmt)
    meta = {"seed": cfg.seed, "config_sha256": cfg.hash(), "conventions": CONVENTIONS, "versions": _versions(), **extra}
    write_json(out / f"{stem}_meta.json", meta)
    return path


def cmd_billiard_trace(args) -> int:
    if args.config is None:
        raise ConfigError("--config is required for this command")
    try:
        data = tomli.loads(Path(args.config).read_text())
    except (OSError, tomli.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    if "geometry" not in data:
        raise ConfigError("[geometry] table is required")
    g = geometry_from_descriptor(data["geometry"])
    path = trace_reflected(g, _floats(args.position), _floats(args.velocity), args.time)
    rows = []
    elapsed = 0.0
    events = list(path.events)
    ei = 0
    for seg in path.segments:
        while ei < len(events) and events[ei].time <= elapsed:
            ev = events[ei]
            rows.append([ev.time, *ev.point, *ev.outgoing, 1])
            ei += 1
        s = np.linspace(0.0, seg.duration, args.samples_per_segment + 1)[:-1]
        xs, vs = seg.states(s)
        for si, xi, vi in zip(s, xs, vs):
            if si == 0.0 and rows and rows[-1][-1] == 1 and rows[-1][0] == elapsed:
                continue
            rows.append([elapsed + si, *xi, *vi, 0])
        elapsed += seg.duration
    for ev in events[ei:]:
        rows.append([ev.time, *ev.point, *ev.outgoing, 1])
    if not rows or rows[-1][0] < path.total_time:
        fin = path.final
        rows.append([path.total_time, *fin.position, *fin.velocity, 0])
    d = g.chart_dim
    xcols = x_columns(d)
    vcols = ["v"] if d == 1 else [f"v{i}" for i in range(d)]
    out = Path(args.out or "out")
    fmt = args.format or "csv"
    p = write_table(out / f"trace.{'csv' if fmt == 'csv' else 'jsonl'}", ["s", *xcols, *vcols, "event_flag"], rows, fmt)
    print(f"{path.status.value}: {path.refl} reflections, sign {path.sign}, wrote {p}")
    return EXIT_OK


def cmd_heat_step(args) -> int:
    cfg = _load(args)
    g, rows = _estimate_rows(cfg, 1)
    p = _write_estimates(cfg, g, rows, "step", {"slices": 1, "t": cfg.t})
    print(f"wrote {p}")
    return EXIT_OK


def cmd_heat_slices(args) -> int:
    cfg = _load(args)
    N = args.slices or max(cfg.partitions)
    g, rows = _estimate_rows(cfg, N)
    p = _write_estimates(cfg, g, rows, f"slices{N}", {"slices": N, "t": cfg.t})
    print(f"wrote {p}")
    return EXIT_OK


def cmd_heat_converge(args) -> int:
    cfg = _load(args)
    report = run_convergence(cfg)
    paths = emit_report(report, cfg.output.get("dir", "out"), cfg.output.get("format", "csv"), cfg.output.get("stem", "run"))
    for s in report.summary:
        print(f"N={s['N']:4d} mesh={s['mesh']:.4g} sup_error={s['sup_error']:.4g} l2_error={s['l2_error']:.4g} rejected={s['rejected']}")
    print(f"wrote {paths['data']}")
    return EXIT_OK


def cmd_oracle_eval(args) -> int:
    cfg = _load(args)
    g, b, B, u = cfg.build()
    oracle, name = select_oracle(cfg, g, b, B, u)
    if oracle is None:
        raise ConfigError("no oracle exists for this problem")
    pts = cfg.grid_points(g)
    vals = oracle(pts) if len(pts) else np.zeros((0, u.rank))
    rows = [[*map(float, x), c, vals[i, c].item(), 0.0, 0, 0] for i, x in enumerate(pts) for c in range(u.rank)]
    p = _write_estimates(cfg, g, rows, "oracle", {"oracle": name, "t": cfg.t})
    print(f"wrote {p}")
    return EXIT_OK


def cmd_props_run(args) -> int:
    modules = args.modules.split(",") if args.modules else None
    offset = args.seed or 0
    results = run_property_suite(modules, offset)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "passed", "measured", "threshold", "detail"])
    for r in results:
        w.writerow([r.name, int(r.passed), repr(float(r.measured)), repr(float(r.threshold)), r.detail])
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: measured {r.measured:.4g} (threshold {r.threshold:.4g}) {r.detail}")
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    (out / "properties.csv").write_text(buf.getvalue())
    return EXIT_OK if all(r.passed for r in results) else EXIT_PROPERTY


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--seed", type=int, help="override run.seed (unsigned 64-bit)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int, help="worker threads")
    common.add_argument("--format", choices=("csv", "jsonl"), help="output format")

    parser = argparse.ArgumentParser(prog="slicedheat", description="Time-sliced heat semigroups on model manifolds.")
    groups = parser.add_subparsers(dest="group", required=True)

    bil = groups.add_parser("billiard").add_subparsers(dest="command", required=True)
    tr = bil.add_parser("trace", parents=[common], help="trace one reflected geodesic")
    tr.add_argument("--position", required=True, help="start position, comma separated")
    tr.add_argument("--velocity", required=True, help="start velocity, comma separated")
    tr.add_argument("--time", type=float, required=True)
    tr.add_argument("--samples-per-segment", type=int, default=8)
    tr.set_defaults(func=cmd_billiard_trace)

    heat = groups.add_parser("heat").add_subparsers(dest="command", required=True)
    heat.add_parser("step", parents=[common], help="single-slice estimates on the grid").set_defaults(func=cmd_heat_step)
    sl = heat.add_parser("slices", parents=[common], help="N-slice estimates on the grid")
    sl.add_argument("--slices", type=int, help="number of slices (default: largest configured)")
    sl.set_defaults(func=cmd_heat_slices)
    heat.add_parser("converge", parents=[common], help="convergence sweep with oracle errors").set_defaults(func=cmd_heat_converge)

    orc = groups.add_parser("oracle").add_subparsers(dest="command", required=True)
    orc.add_parser("eval", parents=[common], help="oracle values on the grid").set_defaults(func=cmd_oracle_eval)

    props = groups.add_parser("props").add_subparsers(dest="command", required=True)
    pr = props.add_parser("run", parents=[common], help="run the invariant suite")
    pr.add_argument("--modules", help="comma separated subset, e.g. billiard,bundle")
    pr.set_defaults(func=cmd_props_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_VALIDATION
    if args.workers is not None and args.workers < 1:
        print("error: --workers must be positive", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except (ConfigError, InvalidInputError, DomainError, UnsupportedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SlicedHeatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
