"""Run configuration: a TOML file with a fixed schema and strict key checking.

Schema::

    [run]
    t = 0.25                 # total time
    partitions = [1, 2, 4]   # slice counts, strictly increasing
    samples = 100000         # paths per grid point and slice count
    seed = 7                 # unsigned 64-bit
    workers = 1
    antithetic = false
    oracle = "auto"          # auto | spectral | fd | none
    descriptive = false      # allow runs without an oracle
    grid = [0.3, 1.5]        # scalars for 1-D charts, lists otherwise

    [geometry]               # kind = interval | disk | circle | torus | sphere | implicit
    [bundle]                 # rank, field, alpha, [bundle.potential], [bundle.connection]
    [boundary]               # preset = dirichlet | neumann | blockwise, signs
    [section]                # name = registry section, plus parameters
    [output]                 # dir, stem, format = csv | jsonl
"""

from __future__ import annotations

import copy
import hashlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from ..bundle import boundary_from_descriptor, bundle_from_descriptor
from ..exceptions import ConfigError, InvalidInputError
from ..geometry import PointClass, geometry_from_descriptor
from ..sections import section_from_descriptor

RUN_KEYS = {"t", "partitions", "samples", "seed", "workers", "antithetic", "oracle", "descriptive", "grid"}
OUTPUT_KEYS = {"dir", "stem", "format"}
TABLES = {"run", "geometry", "bundle", "boundary", "section", "output"}
ORACLES = ("auto", "spectral", "fd", "none")


@dataclass
class RunConfig:
    geometry: dict
    section: dict
    t: float = 0.25
    partitions: list = field(default_factory=lambda: [1])
    samples: int = 10_000
    seed: int = 0
    workers: int = 1
    antithetic: bool = False
    oracle: str = "auto"
    descriptive: bool = False
    grid: list = field(default_factory=list)
    bundle: dict = field(default_factory=dict)
    boundary: dict = field(default_factory=lambda: {"preset": "neumann"})
    output: dict = field(default_factory=lambda: {"dir": "out", "stem": "run", "format": "csv"})

    def to_dict(self) -> dict:
        d = asdict(self)
        run = {k: d.pop(k) for k in sorted(RUN_KEYS)}
        return {"run": run, **{k: d[k] for k in ("geometry", "bundle", "boundary", "section", "output")}}

    def build(self):
        """Geometry, bundle, boundary operator and section objects."""
        try:
            g = geometry_from_descriptor(self.geometry)
            b = bundle_from_descriptor(self.bundle, g)
            B = boundary_from_descriptor(self.boundary, b.rank)
            u = section_from_descriptor(self.section, g)
        except InvalidInputError as exc:
            raise ConfigError(str(exc)) from exc
        if u.rank != b.rank:
            raise ConfigError("section rank differs from bundle rank")
        return g, b, B, u

    def grid_points(self, g) -> np.ndarray:
        pts = np.asarray(self.grid, dtype=float)
        if pts.size == 0:
            return np.zeros((0, g.chart_dim))
        if pts.ndim == 1 and g.chart_dim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[1] != g.chart_dim:
            raise ConfigError(f"grid points must have {g.chart_dim} coordinates")
        return pts

    def hash(self) -> str:
        return hashlib.sha256(dumps(self).encode()).hexdigest()


def _expect_table(data: dict, name: str) -> dict:
    val = data.get(name, {})
    if not isinstance(val, dict):
        raise ConfigError(f"[{name}] must be a table")
    return val


def validate(cfg: RunConfig) -> RunConfig:
    if not isinstance(cfg.t, (int, float)) or not cfg.t > 0:
        raise ConfigError("run.t must be a positive number")
    parts = cfg.partitions
    if not parts or any(not isinstance(p, int) or p < 1 for p in parts):
        raise ConfigError("run.partitions must be a nonempty list of positive integers")
    if any(b <= a for a, b in zip(parts, parts[1:])):
        raise ConfigError("run.partitions must be strictly increasing")
    if not isinstance(cfg.samples, int) or cfg.samples < 1:
        raise ConfigError("run.samples must be a positive integer")
    if not isinstance(cfg.seed, int) or not 0 <= cfg.seed < 2**64:
        raise ConfigError("run.seed must be an unsigned 64-bit integer")
    if not isinstance(cfg.workers, int) or cfg.workers < 1:
        raise ConfigError("run.workers must be a positive integer")
    if cfg.oracle not in ORACLES:
        raise ConfigError(f"run.oracle must be one of {ORACLES}")
    extra = set(cfg.output) - OUTPUT_KEYS
    if extra:
        raise ConfigError(f"unknown [output] keys: {sorted(extra)}")
    if cfg.output.get("format", "csv") not in ("csv", "jsonl"):
        raise ConfigError("output.format must be 'csv' or 'jsonl'")
    g, *_ = cfg.build()
    for x in cfg.grid_points(g):
        try:
            outside = g.classify_point(x) is PointClass.OUTSIDE
        except InvalidInputError as exc:
            raise ConfigError(str(exc)) from exc
        if outside:
            raise ConfigError(f"grid point {x.tolist()} is outside the manifold")
    return cfg


def from_dict(data: dict) -> RunConfig:
    data = copy.deepcopy(data)
    extra = set(data) - TABLES
    if extra:
        raise ConfigError(f"unknown tables: {sorted(extra)}")
    run = _expect_table(data, "run")
    extra = set(run) - RUN_KEYS
    if extra:
        raise ConfigError(f"unknown [run] keys: {sorted(extra)}")
    if "geometry" not in data or "section" not in data:
        raise ConfigError("[geometry] and [section] tables are required")
    cfg = RunConfig(
        geometry=_expect_table(data, "geometry"),
        section=_expect_table(data, "section"),
        bundle=_expect_table(data, "bundle"),
        boundary=data.get("boundary", {"preset": "neumann"}),
        output={"dir": "out", "stem": "run", "format": "csv", **_expect_table(data, "output")},
        **run,
    )
    return validate(cfg)


def loads(text: str) -> RunConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    return from_dict(data)


def load(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text)


def dumps(cfg: RunConfig) -> str:
    return tomli_w.dumps(cfg.to_dict())
