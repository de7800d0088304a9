"""Reflected geodesics and the broken billiard flow.

All tracing goes through :func:`trace_batch`, an event-driven integrator over
arrays of phase points. :func:`trace_reflected` runs it on a single row and
records the pieces into a :class:`ReflectedPath`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import DomainError, InvalidInputError, RejectedPathError, UnsupportedError
from .geometry import GeometryModel, ImplicitPlanar, PhasePoint, PointClass, Sphere

REFLECTIONS_PER_UNIT = 10_000


class PathStatus(str, enum.Enum):
    OK = "ok"
    GRAZING = "grazing_rejected"
    CORNER = "corner_rejected"
    CAP = "cap_exceeded"


# integer codes used by the batch tracer, indexed like _STATUS_BY_CODE
OK, GRAZING, CORNER, CAP = 0, 1, 2, 3
_STATUS_BY_CODE = (PathStatus.OK, PathStatus.GRAZING, PathStatus.CORNER, PathStatus.CAP)


@dataclass(frozen=True)
class GeodesicSegment:
    """Free geodesic piece between two consecutive events."""

    geometry: GeometryModel
    start: PhasePoint
    duration: float

    def states(self, s) -> tuple[np.ndarray, np.ndarray]:
        """Positions and velocities at local times ``s`` (array), shapes ``(len(s), D)``."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        x = np.broadcast_to(self.start.position, (len(s), len(self.start.position)))
        v = np.broadcast_to(self.start.velocity, x.shape)
        return self.geometry.batch_advance(np.array(x), np.array(v), s)

    @property
    def end(self) -> PhasePoint:
        x, v = self.states([self.duration])
        return PhasePoint(x[0], v[0])


@dataclass(frozen=True)
class ReflectionEvent:
    time: float
    point: np.ndarray
    incoming: np.ndarray
    outgoing: np.ndarray


@dataclass
class ReflectedPath:
    geometry: GeometryModel
    start: PhasePoint
    segments: list[GeodesicSegment] = field(default_factory=list)
    events: list[ReflectionEvent] = field(default_factory=list)
    sign: int = 1
    total_time: float = 0.0
    status: PathStatus = PathStatus.OK

    @property
    def refl(self) -> int:
        return len(self.events)

    @property
    def ok(self) -> bool:
        return self.status is PathStatus.OK

    @property
    def final(self) -> PhasePoint:
        covered = sum(seg.duration for seg in self.segments)
        if self.events and self.events[-1].time >= covered:
            ev = self.events[-1]
            return PhasePoint(ev.point, ev.outgoing)
        if self.segments:
            return self.segments[-1].end
        return self.start

    def concat(self, other: "ReflectedPath") -> "ReflectedPath":
        """The concatenation ``self * other`` (other starts where self ends)."""
        shift = self.total_time
        return ReflectedPath(
            geometry=self.geometry,
            start=self.start,
            segments=self.segments + other.segments,
            events=self.events
            + [ReflectionEvent(e.time + shift, e.point, e.incoming, e.outgoing) for e in other.events],
            sign=self.sign,
            total_time=self.total_time + other.total_time,
            status=self.status if not self.ok else other.status,
        )

    def split(self, s: float) -> tuple["ReflectedPath", "ReflectedPath"]:
        """Restrictions to ``[0, s]`` and ``[s, t]``; the second is re-based to start at 0."""
        if not 0 < s < self.total_time:
            raise InvalidInputError("split time must lie strictly inside the path")
        first = ReflectedPath(self.geometry, self.start, sign=self.sign, total_time=s)
        second_segments: list[GeodesicSegment] = []
        elapsed = 0.0
        for seg in self.segments:
            lo, hi = elapsed, elapsed + seg.duration
            if hi <= s:
                first.segments.append(seg)
            elif lo >= s:
                second_segments.append(seg)
            else:
                first.segments.append(GeodesicSegment(seg.geometry, seg.start, s - lo))
                x, v = seg.states([s - lo])
                second_segments.append(GeodesicSegment(seg.geometry, PhasePoint(x[0], v[0]), hi - s))
            elapsed = hi
        first.events = [e for e in self.events if e.time <= s]
        second = ReflectedPath(
            self.geometry,
            second_segments[0].start if second_segments else first.final,
            segments=second_segments,
            events=[ReflectionEvent(e.time - s, e.point, e.incoming, e.outgoing) for e in self.events if e.time > s],
            total_time=self.total_time - s,
            status=self.status,
        )
        return first, second


@dataclass(frozen=True)
class FlowResult:
    final: PhasePoint
    reflections: int
    path: ReflectedPath
    in_domain: bool


@dataclass
class BatchFlow:
    position: np.ndarray
    velocity: np.ndarray
    reflections: np.ndarray
    status: np.ndarray
    sign: np.ndarray

    @property
    def ok(self) -> np.ndarray:
        return self.status == OK


def default_reflection_cap(duration: float, speed) -> np.ndarray:
    return np.ceil(REFLECTIONS_PER_UNIT * np.maximum(1.0, duration * np.asarray(speed))).astype(np.int64)


def trace_batch(
    g: GeometryModel,
    x: np.ndarray,
    v: np.ndarray,
    duration: float,
    *,
    substeps: int = 1,
    max_reflections=None,
    on_piece: Callable | None = None,
    on_event: Callable | None = None,
) -> BatchFlow:
    """Advance rows of ``(x, v)`` along reflected geodesics for ``duration``.

    The time span is cut into ``substeps`` equal pieces and each piece is
    further cut at reflection events, so ``on_piece(idx, x, v, dt)`` is always
    called on a free geodesic of length ``dt <= duration / substeps``.
    ``on_event(idx, point, v_in, v_out)`` is called after each accepted
    reflection. A row starting on the boundary with outward velocity reflects
    at time zero and gets ``sign = -1``.
    """
    x = np.array(x, dtype=float)
    v = np.array(v, dtype=float)
    m = len(x)
    refl = np.zeros(m, dtype=np.int64)
    status = np.zeros(m, dtype=np.int8)
    sign = np.ones(m, dtype=np.int8)
    if duration < 0:
        raise InvalidInputError("duration must be >= 0")
    if max_reflections is None:
        cap = default_reflection_cap(duration, np.linalg.norm(v, axis=1))
    else:
        cap = np.broadcast_to(np.asarray(max_reflections, dtype=np.int64), (m,))
    if duration == 0 or m == 0:
        return BatchFlow(x, v, refl, status, sign)

    h = duration / substeps
    boundary = g.has_boundary
    implicit_corners = isinstance(g, ImplicitPlanar) and len(g.corners) > 0
    first_piece = True
    for _ in range(substeps):
        idx = np.flatnonzero(status == OK)
        rem = np.full(len(idx), h)
        elapsed_zero = first_piece
        first_piece = False
        while idx.size:
            xi, vi = x[idx], v[idx]
            if boundary:
                th = g.batch_hit_times(xi, vi, rem)
                dt = np.minimum(th, rem)
            else:
                th = None
                dt = rem
            if on_piece is not None:
                live = dt > 0
                if live.all():
                    on_piece(idx, xi, vi, dt)
                elif live.any():
                    on_piece(idx[live], xi[live], vi[live], dt[live])
            xn, vn = g.batch_advance(xi, vi, dt)
            if th is None:
                x[idx], v[idx] = xn, vn
                break
            hit = th <= rem
            if hit.any():
                hrow = np.flatnonzero(hit)
                hidx = idx[hrow]
                xh = g.batch_snap(xn[hrow])
                nrm = g.batch_normal(xh)
                vin = vn[hrow]
                vdotn = np.sum(vin * nrm, axis=1)
                speed = np.linalg.norm(vin, axis=1)
                with np.errstate(divide="ignore", invalid="ignore"):
                    cosine = np.where(speed > 0, np.abs(vdotn) / speed, 0.0)
                bad = cosine < g.grazing_threshold
                status[hidx[bad]] = GRAZING
                if implicit_corners:
                    corner = g.near_corner(xh) & ~bad
                    status[hidx[corner]] = CORNER
                    bad |= corner
                vout = vin - 2.0 * vdotn[:, None] * nrm
                if elapsed_zero:
                    at_start = (dt[hrow] == 0) & (refl[hidx] == 0) & ~bad
                    sign[hidx[at_start]] = -1
                refl[hidx] += 1
                over = (refl[hidx] > cap[hidx]) & ~bad
                status[hidx[over]] = CAP
                good = ~bad & ~over
                if on_event is not None and good.any():
                    on_event(hidx[good], xh[good], vin[good], vout[good])
                xn[hrow] = np.where(bad[:, None], xn[hrow], xh)
                vn[hrow] = np.where(bad[:, None], vin, vout)
            x[idx], v[idx] = xn, vn
            rem = rem - dt
            elapsed_zero = False
            keep = hit & (status[idx] == OK) & (rem > 0)
            idx = idx[keep]
            rem = rem[keep]
    return BatchFlow(x, v, refl, status, sign)


def trace_reflected(
    g: GeometryModel, x, v, t: float, max_reflections: int | None = None
) -> ReflectedPath:
    """Trace the reflected geodesic from ``(x, v)`` for time ``t``.

    A boundary start with outward velocity reflects immediately; that event is
    recorded at time 0 and the path carries ``sign = -1``.
    """
    start = PhasePoint(x, v)
    if start.position.shape != (g.chart_dim,):
        raise InvalidInputError(f"{g.kind} points have {g.chart_dim} coordinate(s)")
    if not np.all(np.isfinite(start.position)) or not np.all(np.isfinite(start.velocity)):
        raise InvalidInputError("non-finite phase point")
    if not np.isfinite(t) or t < 0:
        raise InvalidInputError("t must be finite and >= 0")
    if g.classify_point(start.position) is PointClass.OUTSIDE:
        raise DomainError(f"{start.position} lies outside the {g.kind}")

    path = ReflectedPath(g, start, total_time=float(t))
    clock = [0.0]

    def on_piece(idx, xs, vs, dts):
        dt = float(dts[0])
        path.segments.append(GeodesicSegment(g, PhasePoint(xs[0], vs[0]), dt))
        clock[0] += dt

    def on_event(idx, pts, vin, vout):
        path.events.append(ReflectionEvent(clock[0], pts[0].copy(), vin[0].copy(), vout[0].copy()))

    flow = trace_batch(
        g,
        start.position[None, :],
        start.velocity[None, :],
        float(t),
        max_reflections=None if max_reflections is None else np.array([max_reflections]),
        on_piece=on_piece,
        on_event=on_event,
    )
    path.sign = int(flow.sign[0])
    path.status = _STATUS_BY_CODE[int(flow.status[0])]
    return path


def billiard_flow(g: GeometryModel, p: PhasePoint, t: float, max_reflections: int | None = None) -> FlowResult:
    """The broken billiard flow; negative times use ``-flow(-t, -v)``.

    Off the good set (grazing, corner or capped paths) the flow is the identity.
    """
    if t >= 0:
        path = trace_reflected(g, p.position, p.velocity, t, max_reflections)
        final = path.final
    else:
        path = trace_reflected(g, p.position, -p.velocity, -t, max_reflections)
        fp = path.final
        final = PhasePoint(fp.position, -fp.velocity)
    if not path.ok:
        return FlowResult(PhasePoint(p.position, p.velocity), path.refl, path, False)
    return FlowResult(final, path.refl, path, True)


def path_energy(path: ReflectedPath) -> float:
    """``1/4 * integral |dgamma/ds|^2 ds`` summed over the free pieces."""
    if not path.ok:
        raise RejectedPathError(f"energy undefined for a {path.status.value} path")
    return 0.25 * sum(float(np.dot(s.start.velocity, s.start.velocity)) * s.duration for s in path.segments)


def anti_development(path: ReflectedPath, samples_per_segment: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Roll a reflected path out into the tangent space at its start.

    Across every event the transport picks up the boundary reflection, so the
    result is a single straight polyline. Returns ``(s, U)`` with ``U`` of
    shape ``(len(s), chart_dim)``.
    """
    if not path.ok:
        raise RejectedPathError(f"anti-development undefined for a {path.status.value} path")
    g = path.geometry
    if isinstance(g, Sphere):
        raise UnsupportedError("anti-development needs flat transport; the sphere is curved")
    D = g.chart_dim
    transport = np.eye(D)
    events = iter(path.events)
    pending = next(events, None)
    s_out = [0.0]
    u_out = [np.zeros(D)]
    clock = 0.0
    u = np.zeros(D)
    for seg in path.segments:
        while pending is not None and pending.time <= clock:
            transport = transport @ _reflection_matrix(g, pending.point)
            pending = next(events, None)
        direction = transport @ seg.start.velocity
        for k in range(1, samples_per_segment + 1):
            ds = seg.duration * k / samples_per_segment
            s_out.append(clock + ds)
            u_out.append(u + ds * direction)
        u = u + seg.duration * direction
        clock += seg.duration
    return np.array(s_out), np.array(u_out)


def _reflection_matrix(g: GeometryModel, point: np.ndarray) -> np.ndarray:
    n = g.batch_normal(point[None, :])[0]
    return np.eye(len(n)) - 2.0 * np.outer(n, n)
