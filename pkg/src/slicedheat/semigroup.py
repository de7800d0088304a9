"""Time-sliced heat operator.

A sample path starts at ``x``; on each partition interval of length ``dt`` a
fresh velocity with centered Gaussian components of variance ``2/dt`` is drawn
and the reflected geodesic is followed for time ``dt``. The estimator of
``P_tau u(x)`` is the mean of ``Q(gamma) u(gamma(t))`` where ``Q`` is the
inverse of the B-path-ordered exponential, accumulated on the fly.

Random numbers come from Philox streams keyed by ``seed + (chunk << 64)``;
chunk statistics are merged in chunk order, so results do not depend on the
number of worker threads.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .billiard import OK, trace_batch
from .bundle import STEP_SCALE, BoundaryOperator, BundleSpec
from .exceptions import DomainError, InvalidInputError, UnsupportedError
from .geometry import GeometryModel, Interval, PointClass
from .sections import FieldSection

CHUNK_SIZE = 16384
REJECTION_WARNING = 0.01
GENERATOR_NAME = "philox4x64-10"


@dataclass(frozen=True)
class Partition:
    """Time grid ``0 = tau_0 < ... < tau_N = t``."""

    times: tuple[float, ...]

    def __post_init__(self):
        ts = np.asarray(self.times, dtype=float)
        if ts.ndim != 1 or len(ts) < 2:
            raise InvalidInputError("a partition needs at least two nodes")
        if ts[0] != 0.0:
            raise InvalidInputError("a partition starts at 0")
        if not np.all(np.isfinite(ts)) or np.any(np.diff(ts) <= 0):
            raise InvalidInputError("partition nodes must be finite and strictly increasing")
        object.__setattr__(self, "times", tuple(float(t) for t in ts))

    @classmethod
    def uniform(cls, t: float, n: int) -> "Partition":
        if n < 1 or int(n) != n:
            raise InvalidInputError("number of slices must be a positive integer")
        if not t > 0:
            raise InvalidInputError("total time must be positive")
        return cls(tuple(np.linspace(0.0, t, int(n) + 1)))

    @classmethod
    def from_steps(cls, steps) -> "Partition":
        return cls(tuple(np.concatenate([[0.0], np.cumsum(steps)])))

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def mesh(self) -> float:
        return float(np.max(self.steps))

    @property
    def total(self) -> float:
        return self.times[-1]

    @property
    def n(self) -> int:
        return len(self.times) - 1

    def concat(self, other: "Partition") -> "Partition":
        """``self`` followed by ``other``."""
        return Partition.from_steps(np.concatenate([self.steps, other.steps]))


@dataclass(frozen=True)
class SliceEstimate:
    value: np.ndarray
    stderr: np.ndarray
    samples_used: int
    rejected: int
    seed: dict
    warning: bool = False

    @property
    def rejection_fraction(self) -> float:
        total = self.samples_used + self.rejected
        return self.rejected / total if total else 0.0


def sample_segment_velocity(dim: int, dt: float, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Velocity with i.i.d. ``N(0, 2/dt)`` components (density ``(dt/4pi)^(n/2) exp(-dt|v|^2/4)``)."""
    if not dt > 0:
        raise InvalidInputError("segment duration must be positive")
    shape = (dim,) if size is None else (size, dim)
    return math.sqrt(2.0 / dt) * rng.standard_normal(shape)


def philox_stream(seed: int, chunk: int) -> np.random.Generator:
    """Independent stream for one chunk of samples."""
    if seed < 0 or seed >= 2**64:
        raise InvalidInputError("seed must be an unsigned 64-bit integer")
    return np.random.Generator(np.random.Philox(key=int(seed) + (int(chunk) << 64)))


# ---------------------------------------------------------------------- weights


class _Weights:
    """Running ``Q = P_B^{-1}`` for a batch of paths (right multiplication in time order)."""

    def __init__(self, g: GeometryModel, b: BundleSpec, B: BoundaryOperator, m: int):
        self.g = g
        self.b = b
        self.k = b.rank
        self.scalar = b.rank == 1
        self.B = B.matrix
        self.trivial = b.is_flat_trivial
        if self.scalar:
            self.sign = np.ones(m)
            self.expo = np.zeros(m, dtype=b.dtype)
        else:
            self.W = np.broadcast_to(np.eye(self.k, dtype=np.result_type(b.dtype, self.B.dtype)), (m, self.k, self.k)).copy()

    def on_event(self, idx, pts, vin, vout):
        if self.scalar:
            self.sign[idx] *= self.B[0, 0]
        else:
            self.W[idx] = self.W[idx] @ self.B

    def on_piece(self, idx, x, v, dt):
        if self.trivial:
            return
        b = self.b
        speed = np.linalg.norm(v, axis=1)
        if self.scalar:
            h = min(float(np.max(dt)), STEP_SCALE / (b.alpha + b.connection_bound + 1.0))
        else:
            h = min(float(np.max(dt)), float(np.min(b.max_step(float(np.max(speed))))))
        n = max(1, int(np.ceil(float(np.max(dt)) / h - 1e-12)))
        g = self.g
        frac = np.arange(2 * n + 1) / (2 * n)
        hs = dt / n
        if self.scalar:
            acc = np.zeros(len(idx), dtype=self.expo.dtype)
            for j, f in enumerate(frac):
                xs, vs = (x, v) if j == 0 else g.batch_advance(x, v, f * dt)
                c = b.generator(xs, vs)[:, 0, 0]
                w = 1.0 if j == 0 or j == 2 * n else (4.0 if j % 2 else 2.0)
                acc = acc + w * c
            self.expo[idx] -= acc * hs / 6.0
            return
        Q = self.W[idx]
        h3 = hs[:, None, None]
        c0 = b.generator(x, v)
        for i in range(n):
            cm = b.generator(*g.batch_advance(x, v, frac[2 * i + 1] * dt))
            c1 = b.generator(*g.batch_advance(x, v, frac[2 * i + 2] * dt))
            k1 = -Q @ c0
            k2 = -(Q + 0.5 * h3 * k1) @ cm
            k3 = -(Q + 0.5 * h3 * k2) @ cm
            k4 = -(Q + h3 * k3) @ c1
            Q = Q + (h3 / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            c0 = c1
        self.W[idx] = Q

    def matrices(self) -> np.ndarray:
        if self.scalar:
            return (self.sign * np.exp(self.expo))[:, None, None]
        return self.W


@dataclass
class PathBatch:
    """Endpoints and transport weights of a batch of sliced paths."""

    endpoints: np.ndarray
    weights: np.ndarray
    ok: np.ndarray
    reflections: np.ndarray
    paired: bool = False

    def apply(self, values: np.ndarray) -> np.ndarray:
        """``Q u`` per row; ``values`` has shape ``(m, k)``."""
        if self.weights.shape[1] == 1:
            return self.weights[:, 0, :] * values
        return np.einsum("mij,mj->mi", self.weights, values)


def sample_paths(
    g: GeometryModel,
    b: BundleSpec,
    B: BoundaryOperator,
    x0: np.ndarray,
    partition: Partition,
    rng: np.random.Generator | None = None,
    *,
    m: int | None = None,
    antithetic: bool = False,
    velocities: list[np.ndarray] | None = None,
) -> PathBatch:
    """Trace ``m`` sliced paths from ``x0`` (one row or ``(m, D)`` rows).

    Velocities are drawn from ``rng`` per slice unless ``velocities`` gives the
    underlying standard normal draws, a list of ``(m, dim)`` tangent-frame
    arrays (scaled by ``sqrt(2/dt)`` here). With ``antithetic`` each row
    starting on the boundary is traced inward only and stands for the pair
    ``{v, Rv}``; ``weights`` then already hold the pair average ``(I + B)/2 Q``.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 1:
        if m is None:
            raise InvalidInputError("m is required for a single start point")
        x = np.tile(x0, (m, 1))
    else:
        x = x0.copy()
        m = len(x)
    if B.rank != b.rank:
        raise InvalidInputError("boundary operator and bundle have different ranks")
    weights = _Weights(g, b, B, m)
    status = np.zeros(m, dtype=np.int8)
    refl = np.zeros(m, dtype=np.int64)
    paired = np.zeros(m, dtype=bool)
    for j, dt in enumerate(partition.steps):
        if velocities is not None:
            z = math.sqrt(2.0 / dt) * np.asarray(velocities[j], dtype=float).reshape(m, g.dim)
        else:
            z = sample_segment_velocity(g.dim, dt, rng, m)
        v = np.einsum("mi,mid->md", z, g.tangent_frame(x))
        if j == 0 and antithetic and g.has_boundary:
            paired = g.batch_on_boundary(x)
            if paired.any():
                nrm = g.batch_normal(g.batch_snap(x[paired]))
                vn = np.sum(v[paired] * nrm, axis=1)
                v[paired] = np.where((vn < 0)[:, None], v[paired] - 2.0 * vn[:, None] * nrm, v[paired])
        act = np.flatnonzero(status == OK)
        if act.size == 0:
            break

        def on_piece(idx, xs, vs, dts, act=act):
            weights.on_piece(act[idx], xs, vs, dts)

        def on_event(idx, pts, vin, vout, act=act):
            weights.on_event(act[idx], pts, vin, vout)

        flow = trace_batch(g, x[act], v[act], float(dt), on_piece=on_piece, on_event=on_event)
        x[act] = flow.position
        status[act] = flow.status
        refl[act] += flow.reflections
    W = weights.matrices()
    if paired.any():
        Pplus = 0.5 * (np.eye(b.rank) + B.matrix)
        W = W.astype(np.result_type(W.dtype, Pplus.dtype), copy=True)
        W[paired] = Pplus @ W[paired]
    return PathBatch(x, W, status == OK, refl, bool(paired.any()))


# ------------------------------------------------------------------- statistics


@dataclass
class _Moments:
    n: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def of(cls, vals: np.ndarray) -> "_Moments":
        n = len(vals)
        if n == 0:
            return cls(0, np.zeros(vals.shape[1], dtype=vals.dtype), np.zeros(vals.shape[1]))
        mean = vals.mean(axis=0)
        return cls(n, mean, np.sum(np.abs(vals - mean) ** 2, axis=0))

    def merge(self, other: "_Moments") -> "_Moments":
        if other.n == 0:
            return self
        if self.n == 0:
            return other
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.n / n)
        m2 = self.m2 + other.m2 + np.abs(delta) ** 2 * (self.n * other.n / n)
        return _Moments(n, mean, m2)

    def stderr(self) -> np.ndarray:
        if self.n < 2:
            return np.full(len(self.m2), np.nan)
        return np.sqrt(self.m2 / (self.n - 1) / self.n)


def _chunks(total: int, chunk_size: int) -> list[tuple[int, int]]:
    return [(c, min(chunk_size, total - c * chunk_size)) for c in range(-(-total // chunk_size))]


def _run_chunks(fn, chunks, workers: int):
    if workers <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, chunks))


def _check_start(g: GeometryModel, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("start position must be finite")
    if g.classify_point(x) is PointClass.OUTSIDE:
        raise DomainError(f"start position {x.tolist()} is outside the manifold")
    return x


def estimate_slice(
    g: GeometryModel,
    b: BundleSpec,
    B: BoundaryOperator,
    u: FieldSection,
    x,
    tau: Partition,
    M: int,
    seed: int = 0,
    *,
    antithetic: bool = False,
    workers: int = 1,
    chunk_size: int = CHUNK_SIZE,
) -> SliceEstimate:
    """Monte Carlo estimate of ``P_tau u(x)``.

    With ``antithetic`` at a boundary start, ``ceil(M/2)`` inward paths each
    stand for a reflected pair, so ``samples_used`` counts both members.
    """
    if not isinstance(tau, Partition):
        raise InvalidInputError("tau must be a Partition")
    if M < 1 or int(M) != M:
        raise InvalidInputError("M must be a positive integer")
    x = _check_start(g, x)
    if u.rank != b.rank:
        raise InvalidInputError("section and bundle have different ranks")
    pairing = antithetic and g.has_boundary and g.classify_point(x) is PointClass.BOUNDARY
    draws = -(-int(M) // 2) if pairing else int(M)

    def run(chunk):
        c, size = chunk
        batch = sample_paths(g, b, B, x, tau, philox_stream(seed, c), m=size, antithetic=pairing)
        vals = batch.apply(u(batch.endpoints))
        return _Moments.of(vals[batch.ok]), int(np.count_nonzero(~batch.ok))

    results = _run_chunks(run, _chunks(draws, chunk_size), workers)
    total = _Moments(0, np.zeros(u.rank), np.zeros(u.rank))
    rejected = 0
    for mom, rej in results:
        total = total.merge(mom)
        rejected += rej
    factor = 2 if pairing else 1
    est = SliceEstimate(
        value=total.mean,
        stderr=total.stderr(),
        samples_used=total.n * factor,
        rejected=rejected * factor,
        seed={"seed": int(seed), "generator": GENERATOR_NAME, "chunk_size": int(chunk_size), "antithetic": bool(pairing)},
    )
    if est.rejection_fraction > REJECTION_WARNING:
        warnings.warn(f"{est.rejection_fraction:.2%} of sample paths were rejected", RuntimeWarning, stacklevel=2)
        est = SliceEstimate(est.value, est.stderr, est.samples_used, est.rejected, est.seed, True)
    return est


def quadrature_step_1d(
    g: GeometryModel, b: BundleSpec, B: BoundaryOperator, u: FieldSection, x, t: float, nodes: int = 96
) -> np.ndarray:
    """Single-slice ``P_t u(x)`` on an interval by Gauss-Hermite quadrature in the velocity."""
    if not isinstance(g, Interval):
        raise UnsupportedError("deterministic quadrature is only available on an interval")
    if nodes < 64:
        raise InvalidInputError("use at least 64 quadrature nodes")
    if not t > 0:
        raise InvalidInputError("t must be positive")
    x = _check_start(g, x)
    xi, w = np.polynomial.hermite.hermgauss(int(nodes))
    z = xi * math.sqrt(2.0)
    batch = sample_paths(g, b, B, x, Partition((0.0, float(t))), m=len(z), velocities=[z[:, None]])
    vals = batch.apply(u(batch.endpoints))
    wq = np.where(batch.ok, w / math.sqrt(math.pi), 0.0)
    return np.einsum("m,mk->k", wq, vals)


@dataclass(frozen=True)
class GeneratorProbe:
    value: np.ndarray
    stderr: np.ndarray
    quotients: np.ndarray
    t_list: tuple[float, ...]
    samples_used: int
    rejected: int
    inconclusive: bool


def richardson_weights(t_list) -> np.ndarray:
    """Weights extrapolating samples at ``t_list`` to ``t = 0`` (polynomial in ``t``)."""
    t = np.asarray(t_list, dtype=float)
    c = np.ones(len(t))
    for i in range(len(t)):
        for j in range(len(t)):
            if j != i:
                c[i] *= t[j] / (t[j] - t[i])
    return c


def generator_probe(
    g: GeometryModel,
    b: BundleSpec,
    B: BoundaryOperator,
    u: FieldSection,
    x,
    t_list=(0.04, 0.02, 0.01),
    M: int = 200_000,
    seed: int = 0,
    *,
    workers: int = 1,
    chunk_size: int = CHUNK_SIZE,
) -> GeneratorProbe:
    """Richardson-extrapolated ``(P_t u(x) - u(x)) / t`` at ``t -> 0``, an estimate of ``-Lu(x)``.

    All step sizes reuse the same normal draws, so the extrapolation is
    applied per sample and its standard error is computed directly.
    """
    t_list = tuple(float(t) for t in t_list)
    if len(t_list) < 2 or any(t <= 0 for t in t_list) or any(np.diff(t_list) >= 0):
        raise InvalidInputError("t_list must hold at least two decreasing positive times")
    x = _check_start(g, x)
    u0 = u(x[None, :])[0]
    c = richardson_weights(t_list)
    nt = len(t_list)

    def run(chunk):
        ci, size = chunk
        z = philox_stream(seed, ci).standard_normal((size, g.dim))
        quots, ok = [], np.ones(size, dtype=bool)
        for t in t_list:
            batch = sample_paths(g, b, B, x, Partition((0.0, t)), m=size, velocities=[z])
            quots.append((batch.apply(u(batch.endpoints)) - u0) / t)
            ok &= batch.ok
        stack = np.stack(quots, axis=1)[ok]
        comb = np.einsum("i,mik->mk", c, stack)
        return _Moments.of(comb), [_Moments.of(stack[:, i]) for i in range(nt)], int(np.count_nonzero(~ok))

    results = _run_chunks(run, _chunks(int(M), chunk_size), workers)
    total = _Moments(0, np.zeros(u.rank), np.zeros(u.rank))
    per_t = [_Moments(0, np.zeros(u.rank), np.zeros(u.rank)) for _ in range(nt)]
    rejected = 0
    for mom, moms, rej in results:
        total = total.merge(mom)
        per_t = [a.merge(m_) for a, m_ in zip(per_t, moms)]
        rejected += rej
    se = total.stderr()
    quotients = np.array([m_.mean for m_ in per_t])
    increment = np.abs(total.mean - quotients[0])
    inconclusive = bool(np.any(se > 0.5 * increment))
    return GeneratorProbe(total.mean, se, quotients, t_list, total.n, rejected, inconclusive)
