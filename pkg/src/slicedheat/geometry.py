"""Model manifolds with closed-form geodesics and boundary reflection.

Every model exposes two layers:

* a scalar API (``classify_point``, ``inward_normal``, ``reflect``,
  ``geodesic_advance``, ``first_boundary_hit``) working on single points, and
* a batch layer (methods prefixed ``batch_``) on arrays of shape ``(m, D)``
  where ``D`` is the chart dimension. The batch layer is what the billiard
  tracer and the Monte Carlo engine run on.

Charts: Interval, Disk and ImplicitPlanar use Cartesian coordinates, Circle
uses the angle in ``[0, 2*pi)``, FlatTorus uses fundamental-domain
coordinates and Sphere uses ambient 3-vectors of norm ``radius``. Velocities
are always metric (arc-length) tangent vectors in the same chart, so for the
circle ``dtheta/ds = v / radius``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .exceptions import DomainError, InvalidInputError, UnsupportedError

TWO_PI = 2.0 * np.pi


class PointClass(str, enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


@dataclass(frozen=True)
class PhasePoint:
    """A tangent vector: chart position plus velocity."""

    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.atleast_1d(np.asarray(self.position, dtype=float)).copy())
        object.__setattr__(self, "velocity", np.atleast_1d(np.asarray(self.velocity, dtype=float)).copy())
        if self.position.shape != self.velocity.shape:
            raise InvalidInputError("position and velocity must have the same shape")

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.velocity))


class BoundaryHit(NamedTuple):
    t_hit: float
    point: np.ndarray
    cosine: float


def _as_point(x, dim: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.shape != (dim,):
        raise InvalidInputError(f"expected a point with {dim} coordinate(s), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("non-finite coordinates")
    return arr


class GeometryModel:
    """Common interface of all model manifolds.

    Subclasses set ``chart_dim`` (coordinates per point), ``dim`` (intrinsic
    dimension), ``has_boundary``, ``hit_tolerance`` and ``grazing_threshold``.
    """

    chart_dim: int
    dim: int
    has_boundary: bool
    hit_tolerance: float
    grazing_threshold: float

    kind: str = "abstract"

    # ----------------------------------------------------------------- scalar API
    def classify_point(self, x) -> PointClass:
        raise NotImplementedError

    def inward_normal(self, x) -> np.ndarray:
        x = _as_point(x, self.chart_dim)
        self._require_boundary_point(x)
        return self.batch_normal(x[None, :])[0]

    def reflect(self, x, v) -> np.ndarray:
        n = self.inward_normal(x)
        v = _as_point(v, self.chart_dim)
        return v - 2.0 * np.dot(v, n) * n

    def geodesic_advance(self, p: PhasePoint, s: float) -> PhasePoint:
        if not np.isfinite(s) or s < 0:
            raise InvalidInputError(f"duration must be finite and >= 0, got {s}")
        x = _as_point(p.position, self.chart_dim)
        v = _as_point(p.velocity, self.chart_dim)
        xn, vn = self.batch_advance(x[None, :], v[None, :], np.array([float(s)]))
        return PhasePoint(xn[0], vn[0])

    def first_boundary_hit(self, p: PhasePoint, s_max: float) -> BoundaryHit | None:
        """First time in ``[0, s_max]`` at which the free geodesic meets the boundary.

        A start on the boundary with outward velocity hits at ``t = 0``; a
        start on the boundary with inward velocity ignores the trivial root.
        """
        if not s_max > 0:
            raise InvalidInputError("s_max must be positive")
        if not self.has_boundary:
            return None
        x = _as_point(p.position, self.chart_dim)
        v = _as_point(p.velocity, self.chart_dim)
        if self.classify_point(x) is PointClass.OUTSIDE:
            raise DomainError(f"start point {x} lies outside the domain")
        t = float(self.batch_hit_times(x[None, :], v[None, :], np.array([float(s_max)]))[0])
        if not t <= s_max:
            return None
        xh, vh = self.batch_advance(x[None, :], v[None, :], np.array([t]))
        xh = self.batch_snap(xh)
        n = self.batch_normal(xh)[0]
        speed = np.linalg.norm(vh[0])
        cosine = abs(float(np.dot(vh[0], n))) / speed if speed > 0 else 0.0
        return BoundaryHit(t, xh[0], cosine)

    # ------------------------------------------------------------------ batch API
    def batch_advance(self, x: np.ndarray, v: np.ndarray, s) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def batch_hit_times(self, x: np.ndarray, v: np.ndarray, s_max: np.ndarray) -> np.ndarray:
        """Hit time per row, ``inf`` when the boundary is not reached by ``s_max``."""
        raise UnsupportedError(f"{self.kind} has no boundary")

    def batch_normal(self, x: np.ndarray) -> np.ndarray:
        raise UnsupportedError(f"{self.kind} has no boundary")

    def batch_snap(self, x: np.ndarray) -> np.ndarray:
        return x

    def batch_reflect(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        n = self.batch_normal(x)
        return v - 2.0 * np.sum(v * n, axis=1, keepdims=True) * n

    def batch_on_boundary(self, x: np.ndarray) -> np.ndarray:
        return np.zeros(len(x), dtype=bool)

    def tangent_frame(self, x: np.ndarray) -> np.ndarray:
        """Orthonormal tangent frames, shape ``(m, dim, chart_dim)``."""
        eye = np.eye(self.chart_dim)
        return np.broadcast_to(eye, (len(x), self.dim, self.chart_dim))

    def sample_points(self, rng: np.random.Generator, m: int) -> np.ndarray:
        raise NotImplementedError

    def sample_boundary(self, rng: np.random.Generator, m: int) -> np.ndarray:
        raise UnsupportedError(f"{self.kind} has no boundary")

    def characteristic_size(self) -> float:
        raise NotImplementedError

    def descriptor(self) -> dict:
        """Config-style description (inverse of ``geometry_from_descriptor``)."""
        raise NotImplementedError

    # -------------------------------------------------------------------- helpers
    def _require_boundary_point(self, x: np.ndarray) -> None:
        if not self.has_boundary:
            raise UnsupportedError(f"{self.kind} is a closed model without boundary")
        cls = self.classify_point(x)
        if cls is not PointClass.BOUNDARY:
            raise DomainError(f"{x} is not a boundary point ({cls.value})")


def _validate_tolerances(obj) -> None:
    if not obj.hit_tolerance > 0:
        raise InvalidInputError("hit_tolerance must be positive")
    if not obj.grazing_threshold >= 0:
        raise InvalidInputError("grazing_threshold must be >= 0")


# ============================================================================
# Flat models with boundary
# ============================================================================


@dataclass(frozen=True)
class Interval(GeometryModel):
    a: float = 0.0
    b: float = 1.0
    hit_tolerance: float = 1e-12
    grazing_threshold: float = 1e-8

    kind = "interval"
    chart_dim = 1
    dim = 1
    has_boundary = True

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b) and self.a < self.b):
            raise InvalidInputError(f"interval needs a < b, got ({self.a}, {self.b})")
        _validate_tolerances(self)

    @property
    def length(self) -> float:
        return self.b - self.a

    def classify_point(self, x) -> PointClass:
        (xx,) = _as_point(x, 1)
        d = min(xx - self.a, self.b - xx)
        if abs(d) <= self.hit_tolerance:
            return PointClass.BOUNDARY
        return PointClass.INTERIOR if d > 0 else PointClass.OUTSIDE

    def batch_advance(self, x, v, s):
        s = np.asarray(s, dtype=float).reshape(-1, 1)
        return x + s * v, v.copy()

    def batch_hit_times(self, x, v, s_max):
        xx, vv = x[:, 0], v[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(vv > 0, (self.b - xx) / vv, (self.a - xx) / vv)
        t = np.where(vv == 0, np.inf, np.maximum(t, 0.0))
        return np.where(t <= s_max, t, np.inf)

    def batch_normal(self, x):
        mid = 0.5 * (self.a + self.b)
        return np.where(x < mid, 1.0, -1.0)

    def batch_snap(self, x):
        mid = 0.5 * (self.a + self.b)
        return np.where(x < mid, self.a, self.b)

    def batch_reflect(self, x, v):
        return -v

    def batch_on_boundary(self, x):
        xx = x[:, 0]
        return np.minimum(np.abs(xx - self.a), np.abs(self.b - xx)) <= self.hit_tolerance

    def sample_points(self, rng, m):
        return rng.uniform(self.a, self.b, size=(m, 1))

    def sample_boundary(self, rng, m):
        return np.where(rng.random((m, 1)) < 0.5, self.a, self.b)

    def characteristic_size(self):
        return self.length

    def descriptor(self):
        return {"kind": "interval", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class Disk(GeometryModel):
    radius: float = 1.0
    hit_tolerance: float = 1e-12
    grazing_threshold: float = 1e-8

    kind = "disk"
    chart_dim = 2
    dim = 2
    has_boundary = True

    def __post_init__(self):
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise InvalidInputError("radius must be positive")
        _validate_tolerances(self)

    def classify_point(self, x) -> PointClass:
        x = _as_point(x, 2)
        d = self.radius - float(np.hypot(x[0], x[1]))
        if abs(d) <= self.hit_tolerance:
            return PointClass.BOUNDARY
        return PointClass.INTERIOR if d > 0 else PointClass.OUTSIDE

    def batch_advance(self, x, v, s):
        s = np.asarray(s, dtype=float).reshape(-1, 1)
        return x + s * v, v.copy()

    def batch_hit_times(self, x, v, s_max):
        # |x + t v|^2 = R^2, written without cancellation for either sign of <x, v>
        a = np.einsum("ij,ij->i", v, v)
        b = np.einsum("ij,ij->i", x, v)
        c = np.einsum("ij,ij->i", x, x) - self.radius**2
        sq = np.sqrt(np.maximum(b * b - a * c, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            far = (-b + sq) / a
            near = -c / (b + sq)
        t = np.where(b <= 0, far, near)
        t = np.where(a == 0, np.inf, np.maximum(t, 0.0))
        t = np.where(np.isnan(t), 0.0, t)
        return np.where(t <= s_max, t, np.inf)

    def batch_normal(self, x):
        r = np.linalg.norm(x, axis=1, keepdims=True)
        return -x / r

    def batch_snap(self, x):
        r = np.linalg.norm(x, axis=1, keepdims=True)
        return self.radius * x / r

    def batch_on_boundary(self, x):
        return np.abs(self.radius - np.linalg.norm(x, axis=1)) <= self.hit_tolerance

    def sample_points(self, rng, m):
        r = self.radius * np.sqrt(rng.random(m))
        phi = rng.uniform(0, TWO_PI, m)
        return np.column_stack([r * np.cos(phi), r * np.sin(phi)])

    def sample_boundary(self, rng, m):
        phi = rng.uniform(0, TWO_PI, m)
        return self.radius * np.column_stack([np.cos(phi), np.sin(phi)])

    def characteristic_size(self):
        return 2.0 * self.radius

    def descriptor(self):
        return {"kind": "disk", "radius": self.radius}


@dataclass(frozen=True)
class ImplicitPlanar(GeometryModel):
    """Planar domain ``{f > 0}`` bounded by a nondegenerate level set.

    ``level`` maps an ``(m, 2)`` array to ``(m,)``; ``gradient`` (optional)
    maps ``(m, 2)`` to ``(m, 2)`` and defaults to central differences.
    ``bounds`` is ``(xmin, xmax, ymin, ymax)`` enclosing the domain.
    ``corners`` are points where a hit is rejected rather than reflected.
    """

    level: Callable[[np.ndarray], np.ndarray] = None
    bounds: tuple[float, float, float, float] = (-1.0, 1.0, -1.0, 1.0)
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    corners: Sequence[Sequence[float]] = ()
    hit_tolerance: float = 1e-10
    grazing_threshold: float = 1e-8
    name: str = "implicit"
    params: dict = field(default_factory=dict)

    kind = "implicit"
    chart_dim = 2
    dim = 2
    has_boundary = True

    def __post_init__(self):
        if self.level is None:
            raise InvalidInputError("ImplicitPlanar needs a level function")
        xmin, xmax, ymin, ymax = self.bounds
        if not (xmin < xmax and ymin < ymax):
            raise InvalidInputError("bounds must be (xmin, xmax, ymin, ymax) with positive extent")
        _validate_tolerances(self)
        object.__setattr__(self, "corners", np.asarray(self.corners, dtype=float).reshape(-1, 2))

    # level-set helpers
    def _f(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.level(np.atleast_2d(x)), dtype=float)

    def _grad(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        if self.gradient is not None:
            return np.asarray(self.gradient(x), dtype=float)
        h = 1e-6 * self.characteristic_size()
        ex = np.array([h, 0.0])
        ey = np.array([0.0, h])
        gx = (self._f(x + ex) - self._f(x - ex)) / (2 * h)
        gy = (self._f(x + ey) - self._f(x - ey)) / (2 * h)
        return np.column_stack([gx, gy])

    def check_nondegenerate(self, rng: np.random.Generator, m: int = 256) -> float:
        """Smallest sampled ``|grad f|`` on the boundary; raises if it vanishes."""
        g = np.linalg.norm(self._grad(self.sample_boundary(rng, m)), axis=1)
        if not np.all(g > 0):
            raise InvalidInputError("level set is degenerate (|grad f| = 0 on the boundary)")
        return float(g.min())

    def classify_point(self, x) -> PointClass:
        x = _as_point(x, 2)
        f = float(self._f(x)[0])
        if abs(f) <= self.hit_tolerance:
            return PointClass.BOUNDARY
        return PointClass.INTERIOR if f > 0 else PointClass.OUTSIDE

    def batch_advance(self, x, v, s):
        s = np.asarray(s, dtype=float).reshape(-1, 1)
        return x + s * v, v.copy()

    def lipschitz_bound(self) -> float:
        """Upper estimate of ``|grad f|`` on a padded box around the domain."""
        cached = self.__dict__.get("_lipschitz")
        if cached is None:
            xmin, xmax, ymin, ymax = self.bounds
            px, py = 0.05 * (xmax - xmin), 0.05 * (ymax - ymin)
            gx, gy = np.meshgrid(np.linspace(xmin - px, xmax + px, 129), np.linspace(ymin - py, ymax + py, 129))
            grid = np.column_stack([gx.ravel(), gy.ravel()])
            cached = 1.25 * float(np.max(np.linalg.norm(self._grad(grid), axis=1)))
            object.__setattr__(self, "_lipschitz", cached)
        return cached

    def _hit_time(self, x: np.ndarray, v: np.ndarray, s_max: float) -> float:
        return float(self.batch_hit_times(x[None, :], v[None, :], np.array([s_max]))[0])

    def batch_hit_times(self, x, v, s_max):
        # March with steps max(f / (L |v|), fine): a step longer than ``fine`` cannot
        # cross the level set, so every possible crossing is scanned at the fine step.
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        m = len(x)
        s_max = np.broadcast_to(np.asarray(s_max, dtype=float), (m,)).copy()
        out = np.full(m, np.inf)
        speed = np.linalg.norm(v, axis=1)
        L = self.lipschitz_bound()
        tol = self.hit_tolerance
        f = self._f(x)
        active = speed > 0
        on = active & (np.abs(f) <= tol)
        if on.any():
            rows = np.flatnonzero(on)
            outward = np.sum(v[rows] * self.batch_normal(x[rows]), axis=1) <= 0
            out[rows[outward]] = 0.0
            active[rows[outward]] = False
        idx = np.flatnonzero(active)
        with np.errstate(divide="ignore"):
            fine = np.sqrt(tol) * self.characteristic_size() / speed
        t = np.zeros(m)
        while idx.size:
            step = np.maximum(f[idx] / (L * speed[idx]), fine[idx])
            tn = np.minimum(t[idx] + step, s_max[idx])
            fn = self._f(x[idx] + tn[:, None] * v[idx])
            cross = fn < 0
            if cross.any():
                rows = idx[cross]
                out[rows] = self._bisect(x[rows], v[rows], t[rows], tn[cross], f[rows], speed[rows])
            t[idx] = tn
            f[idx] = fn
            keep = ~cross & (tn < s_max[idx])
            idx = idx[keep]
        return out

    def _bisect(self, x, v, lo, hi, flo, speed):
        # rows whose start is already marginally outside report the start time
        res = lo.copy()
        good = flo >= 0
        if not good.any():
            return res
        x, v, lo, hi, speed = x[good], v[good], lo[good], hi[good], speed[good]
        target = self.hit_tolerance / (2.0 * self.lipschitz_bound() * speed)
        while True:
            wide = (hi - lo) > target
            if not wide.any():
                break
            mid = 0.5 * (lo + hi)
            inside = self._f(x + mid[:, None] * v) >= 0
            lo = np.where(wide & inside, mid, lo)
            hi = np.where(wide & ~inside, mid, hi)
        res[good] = lo
        return res

    def batch_normal(self, x):
        g = self._grad(x)
        return g / np.linalg.norm(g, axis=1, keepdims=True)

    def batch_on_boundary(self, x):
        return np.abs(self._f(x)) <= self.hit_tolerance

    def near_corner(self, x: np.ndarray) -> np.ndarray:
        if len(self.corners) == 0:
            return np.zeros(len(x), dtype=bool)
        d = np.linalg.norm(x[:, None, :] - self.corners[None, :, :], axis=2)
        return np.any(d <= self.hit_tolerance, axis=1)

    def sample_points(self, rng, m):
        xmin, xmax, ymin, ymax = self.bounds
        out = np.empty((0, 2))
        while len(out) < m:
            cand = np.column_stack([rng.uniform(xmin, xmax, 2 * m), rng.uniform(ymin, ymax, 2 * m)])
            out = np.vstack([out, cand[self._f(cand) > 0]])
        return out[:m]

    def sample_boundary(self, rng, m):
        # project interior samples along rays from a domain point onto the level set
        inner = self.sample_points(rng, 1)[0]
        phi = rng.uniform(0, TWO_PI, m)
        dirs = np.column_stack([np.cos(phi), np.sin(phi)])
        pts = np.empty((m, 2))
        for i, d in enumerate(dirs):
            t = self._hit_time(inner, d, 4 * self.characteristic_size())
            pts[i] = inner + t * d
        return pts

    def characteristic_size(self):
        xmin, xmax, ymin, ymax = self.bounds
        return max(xmax - xmin, ymax - ymin)

    def descriptor(self):
        return {"kind": "implicit", "name": self.name, **self.params}


# ============================================================================
# Closed models
# ============================================================================


@dataclass(frozen=True)
class Circle(GeometryModel):
    radius: float = 1.0
    hit_tolerance: float = 1e-12
    grazing_threshold: float = 1e-8

    kind = "circle"
    chart_dim = 1
    dim = 1
    has_boundary = False

    def __post_init__(self):
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise InvalidInputError("radius must be positive")
        _validate_tolerances(self)

    def classify_point(self, x) -> PointClass:
        _as_point(x, 1)
        return PointClass.INTERIOR

    def batch_advance(self, x, v, s):
        s = np.asarray(s, dtype=float).reshape(-1, 1)
        return np.mod(x + s * v / self.radius, TWO_PI), v.copy()

    def sample_points(self, rng, m):
        return rng.uniform(0, TWO_PI, size=(m, 1))

    def characteristic_size(self):
        return TWO_PI * self.radius

    def descriptor(self):
        return {"kind": "circle", "radius": self.radius}


@dataclass(frozen=True)
class FlatTorus(GeometryModel):
    L1: float = 1.0
    L2: float = 1.0
    hit_tolerance: float = 1e-12
    grazing_threshold: float = 1e-8

    kind = "torus"
    chart_dim = 2
    dim = 2
    has_boundary = False

    def __post_init__(self):
        if not (self.L1 > 0 and self.L2 > 0 and np.isfinite(self.L1) and np.isfinite(self.L2)):
            raise InvalidInputError("torus periods must be positive")
        _validate_tolerances(self)

    @property
    def periods(self) -> np.ndarray:
        return np.array([self.L1, self.L2])

    def classify_point(self, x) -> PointClass:
        _as_point(x, 2)
        return PointClass.INTERIOR

    def batch_advance(self, x, v, s):
        s = np.asarray(s, dtype=float).reshape(-1, 1)
        return np.mod(x + s * v, self.periods), v.copy()

    def sample_points(self, rng, m):
        return rng.random((m, 2)) * self.periods

    def characteristic_size(self):
        return max(self.L1, self.L2)

    def descriptor(self):
        return {"kind": "torus", "L1": self.L1, "L2": self.L2}


@dataclass(frozen=True)
class Sphere(GeometryModel):
    radius: float = 1.0
    hit_tolerance: float = 1e-12
    grazing_threshold: float = 1e-8

    kind = "sphere"
    chart_dim = 3
    dim = 2
    has_boundary = False

    def __post_init__(self):
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise InvalidInputError("radius must be positive")
        _validate_tolerances(self)

    def classify_point(self, x) -> PointClass:
        x = _as_point(x, 3)
        r = float(np.linalg.norm(x))
        if abs(r - self.radius) <= 1e-12 * self.radius:
            return PointClass.INTERIOR
        return PointClass.OUTSIDE

    def batch_advance(self, x, v, s):
        s = np.asarray(s, dtype=float).reshape(-1)
        R = self.radius
        speed = np.linalg.norm(v, axis=1)
        ang = s * speed / R
        c = np.cos(ang)[:, None]
        sn = np.sin(ang)[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            unit_v = np.where(speed[:, None] > 0, v / speed[:, None], 0.0)
        xn = c * x + sn * R * unit_v
        vn = c * v - sn * (speed[:, None] / R) * x
        # re-project to kill rounding drift over long compositions
        xn *= R / np.linalg.norm(xn, axis=1, keepdims=True)
        xhat = xn / R
        vn -= np.sum(vn * xhat, axis=1, keepdims=True) * xhat
        new_speed = np.linalg.norm(vn, axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            vn = np.where(new_speed > 0, vn * (speed[:, None] / new_speed), vn)
        return xn, vn

    def tangent_frame(self, x):
        xhat = x / np.linalg.norm(x, axis=1, keepdims=True)
        ref = np.where(np.abs(xhat[:, 2:3]) < 0.9, np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]))
        e1 = np.cross(ref, xhat)
        e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
        e2 = np.cross(xhat, e1)
        return np.stack([e1, e2], axis=1)

    def sample_points(self, rng, m):
        g = rng.standard_normal((m, 3))
        return self.radius * g / np.linalg.norm(g, axis=1, keepdims=True)

    def characteristic_size(self):
        return np.pi * self.radius

    def descriptor(self):
        return {"kind": "sphere", "radius": self.radius}


# ============================================================================
# descriptors
# ============================================================================


def _ellipse(semi_a: float = 1.0, semi_b: float = 0.6, **kw) -> ImplicitPlanar:
    def level(x):
        return 1.0 - (x[:, 0] / semi_a) ** 2 - (x[:, 1] / semi_b) ** 2

    def grad(x):
        return np.column_stack([-2 * x[:, 0] / semi_a**2, -2 * x[:, 1] / semi_b**2])

    return ImplicitPlanar(
        level=level,
        gradient=grad,
        bounds=(-semi_a, semi_a, -semi_b, semi_b),
        name="ellipse",
        params={"semi_a": semi_a, "semi_b": semi_b},
        **kw,
    )


def _stadium(half_length: float = 0.5, radius: float = 0.5, **kw) -> ImplicitPlanar:
    # smooth superellipse-like stadium: f = 1 - (|x|/(l+r))^4 - (y/r)^2
    a = half_length + radius

    def level(x):
        return 1.0 - (x[:, 0] / a) ** 4 - (x[:, 1] / radius) ** 2

    def grad(x):
        return np.column_stack([-4 * x[:, 0] ** 3 / a**4, -2 * x[:, 1] / radius**2])

    return ImplicitPlanar(
        level=level,
        gradient=grad,
        bounds=(-a, a, -radius, radius),
        name="superellipse",
        params={"half_length": half_length, "radius": radius},
        **kw,
    )


IMPLICIT_SHAPES = {"ellipse": _ellipse, "superellipse": _stadium}


def geometry_from_descriptor(desc: dict) -> GeometryModel:
    """Build a model from a config table such as ``{"kind": "disk", "radius": 1.0}``."""
    d = dict(desc)
    kind = d.pop("kind", None)
    common = {k: d.pop(k) for k in ("hit_tolerance", "grazing_threshold") if k in d}
    try:
        if kind == "interval":
            g = Interval(a=float(d.pop("a", 0.0)), b=float(d.pop("b", 1.0)), **common)
        elif kind == "disk":
            g = Disk(radius=float(d.pop("radius", 1.0)), **common)
        elif kind == "circle":
            g = Circle(radius=float(d.pop("radius", 1.0)), **common)
        elif kind == "torus":
            g = FlatTorus(L1=float(d.pop("L1", 1.0)), L2=float(d.pop("L2", 1.0)), **common)
        elif kind == "sphere":
            g = Sphere(radius=float(d.pop("radius", 1.0)), **common)
        elif kind == "implicit":
            name = d.pop("name", None)
            if name not in IMPLICIT_SHAPES:
                raise InvalidInputError(f"unknown implicit shape {name!r}; known: {sorted(IMPLICIT_SHAPES)}")
            return IMPLICIT_SHAPES[name](**{k: float(v) for k, v in d.items()}, **common)
        else:
            raise InvalidInputError(f"unknown geometry kind {kind!r}")
    except TypeError as exc:
        raise InvalidInputError(str(exc)) from exc
    if d:
        _unknown(d)
    return g


def _unknown(d: dict):
    raise InvalidInputError(f"unknown geometry keys: {sorted(d)}")
