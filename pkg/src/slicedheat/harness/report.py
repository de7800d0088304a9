"""CSV / JSON-lines emission with shortest round-trip number formatting."""

from __future__ import annotations

import json
import math
from pathlib import Path

from ..exceptions import SlicedHeatError


def fmt_number(v) -> str:
    """Shortest decimal that parses back to the same value."""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, complex):
        return repr(v)
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


def _jsonable(v):
    if isinstance(v, complex):
        return repr(v)
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if isinstance(v, list):
        return [_jsonable(a) for a in v]
    return v


def x_columns(chart_dim: int) -> list[str]:
    return ["x"] if chart_dim == 1 else [f"x{i}" for i in range(chart_dim)]


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise SlicedHeatError(f"cannot write {path}: {exc}") from exc
    return path


def table_text(columns: list[str], rows: list[list]) -> str:
    lines = [",".join(columns)]
    lines += [",".join(fmt_number(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def jsonl_text(columns: list[str], rows: list[list]) -> str:
    return "".join(json.dumps(dict(zip(columns, map(_jsonable, row)))) + "\n" for row in rows)


def write_table(path, columns: list[str], rows: list[list], fmt: str = "csv") -> Path:
    path = Path(path)
    text = table_text(columns, rows) if fmt == "csv" else jsonl_text(columns, rows)
    return _write(path, text)


def write_json(path, record: dict) -> Path:
    return _write(Path(path), json.dumps(_jsonable_tree(record), indent=2, sort_keys=True) + "\n")


def _jsonable_tree(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable_tree(v) for v in obj]
    return _jsonable(obj)


def emit_report(report, out_dir, fmt: str = "csv", stem: str = "convergence") -> dict:
    """Write data rows, plot data and the metadata sidecar; return their paths."""
    if fmt not in ("csv", "jsonl"):
        raise SlicedHeatError(f"unknown format {fmt!r}")
    out = Path(out_dir)
    xcols = x_columns(report.chart_dim)
    columns = ["N", "mesh", *xcols, "component", "estimate", "stderr", "oracle", "abs_error", "rejected"]
    rows = [
        [r["N"], r["mesh"], *r["x"], r["component"], r["estimate"], r["stderr"], r["oracle"], r["abs_error"], r["rejected"]]
        for r in report.rows
    ]
    ext = "csv" if fmt == "csv" else "jsonl"
    paths = {"data": write_table(out / f"{stem}.{ext}", columns, rows, fmt)}
    plot_cols = ["N", "mesh", "log_mesh", "sup_error", "log_sup_error", "l2_error", "log_l2_error", "max_stderr", "rejected"]
    plot_rows = []
    for s in report.summary:
        plot_rows.append(
            [
                s["N"],
                s["mesh"],
                math.log10(s["mesh"]),
                s["sup_error"],
                _log10(s["sup_error"]),
                s["l2_error"],
                _log10(s["l2_error"]),
                s["max_stderr"],
                s["rejected"],
            ]
        )
    paths["plot"] = write_table(out / f"{stem}_plot.{ext}", plot_cols, plot_rows, fmt)
    meta = dict(report.metadata)
    meta["summary"] = report.summary
    meta["descriptive"] = report.descriptive
    paths["meta"] = write_json(out / f"{stem}_meta.json", meta)
    return paths


def _log10(v: float) -> float:
    if not math.isfinite(v) or v <= 0:
        return math.nan
    return math.log10(v)
