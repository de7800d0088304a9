"""Metric bundle data and path-ordered transport along reflected paths.

Bundles are globally trivialized, so a connection is a matrix-valued 1-form
``A(x, xi)`` (``nabla = d + A``) and the potential a matrix field ``V(x)``.
Along a curve the path-ordered exponential solves

    P' = (V(gamma) - A(gamma, gamma')) P,    P(0) = I,

and its inverse solves ``Q' = -Q (V - A)``. Both are integrated with fixed-step
RK4; rank-one bundles use the closed form ``P = exp(integral of (V - A))``
with Simpson quadrature on the same substeps.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .billiard import GeodesicSegment, ReflectedPath
from .exceptions import InvalidInputError, RejectedPathError
from .geometry import Circle, GeometryModel, Interval

Potential = Callable[[np.ndarray], np.ndarray]
Connection = Callable[[np.ndarray, np.ndarray], np.ndarray]

STEP_SCALE = 0.01


@dataclass(frozen=True)
class BundleSpec:
    """Rank-``k`` metric bundle with connection ``A`` and potential ``V``.

    ``potential(x)`` maps ``(m, D)`` positions to ``(m, k, k)``;
    ``connection(x, xi)`` maps positions and chart vectors to ``(m, k, k)``.
    ``None`` means identically zero. ``alpha`` bounds the operator norm of
    ``V`` and ``connection_bound`` bounds ``||A(x, xi)||`` for unit ``xi``.
    """

    rank: int = 1
    field: str = "real"
    potential: Potential | None = None
    connection: Connection | None = None
    alpha: float = 0.0
    connection_bound: float = 0.0
    name: str = "custom"
    params: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if int(self.rank) != self.rank or self.rank < 1:
            raise InvalidInputError("rank must be a positive integer")
        if self.field not in ("real", "complex"):
            raise InvalidInputError("field must be 'real' or 'complex'")
        if not self.alpha >= 0 or not self.connection_bound >= 0:
            raise InvalidInputError("alpha and connection_bound must be >= 0")

    @property
    def dtype(self):
        return np.complex128 if self.field == "complex" else np.float64

    @property
    def is_flat_trivial(self) -> bool:
        """True when transport is the identity (no potential, no connection)."""
        return self.potential is None and self.connection is None

    def generator(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """``V(x) - A(x, v)`` with shape ``(m, k, k)``."""
        m, k = len(x), self.rank
        out = np.zeros((m, k, k), dtype=self.dtype)
        if self.potential is not None:
            out = out + np.asarray(self.potential(x)).reshape(m, k, k)
        if self.connection is not None:
            out = out - np.asarray(self.connection(x, v)).reshape(m, k, k)
        return out

    def max_step(self, speed: float) -> float:
        return STEP_SCALE / (self.alpha + self.connection_bound * speed + 1.0)

    def validate(self, g: GeometryModel, rng: np.random.Generator, n: int = 1000) -> dict:
        """Sampled checks: skew ``A``, self-adjoint ``V``, ``alpha >= sup ||V||``."""
        x = g.sample_points(rng, n)
        frames = g.tangent_frame(x)
        xi = np.einsum("mi,mid->md", rng.standard_normal((n, g.dim)), frames)
        report = {"skew_error": 0.0, "symmetry_error": 0.0, "sup_potential_norm": 0.0}
        if self.connection is not None:
            A = np.asarray(self.connection(x, xi)).reshape(n, self.rank, self.rank)
            report["skew_error"] = float(np.max(np.abs(A + np.conj(np.swapaxes(A, 1, 2)))))
        if self.potential is not None:
            V = np.asarray(self.potential(x)).reshape(n, self.rank, self.rank)
            report["symmetry_error"] = float(np.max(np.abs(V - np.conj(np.swapaxes(V, 1, 2)))))
            report["sup_potential_norm"] = float(np.max(np.linalg.norm(V, ord=2, axis=(1, 2))))
        report["valid"] = (
            report["skew_error"] <= 1e-10
            and report["symmetry_error"] <= 1e-10
            and self.alpha >= report["sup_potential_norm"] - 1e-12
        )
        return report


@dataclass(frozen=True)
class BoundaryOperator:
    """Constant symmetric involution ``B`` on the fibre at the boundary."""

    matrix: np.ndarray
    preset: str = "custom"

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.matrix))
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise InvalidInputError("B must be a square matrix")
        I = np.eye(len(B))
        if np.max(np.abs(B @ B - I)) > 1e-12:
            raise InvalidInputError("B must be an involution (B @ B = I)")
        if np.max(np.abs(B - np.conj(B.T))) > 1e-12:
            raise InvalidInputError("B must be self-adjoint")
        object.__setattr__(self, "matrix", B)

    @classmethod
    def dirichlet(cls, rank: int = 1) -> "BoundaryOperator":
        return cls(-np.eye(rank), "dirichlet")

    @classmethod
    def neumann(cls, rank: int = 1) -> "BoundaryOperator":
        return cls(np.eye(rank), "neumann")

    @classmethod
    def blockwise(cls, signs) -> "BoundaryOperator":
        signs = np.asarray(signs, dtype=float)
        if not np.all(np.abs(signs) == 1):
            raise InvalidInputError("blockwise signs must be +1 or -1")
        return cls(np.diag(signs), "blockwise")

    @property
    def rank(self) -> int:
        return len(self.matrix)

    @property
    def is_scalar_multiple(self) -> bool:
        return np.array_equal(self.matrix, self.matrix[0, 0] * np.eye(self.rank))

    def projectors(self) -> tuple[np.ndarray, np.ndarray]:
        """Orthogonal projectors onto the +1 and -1 eigenspaces."""
        I = np.eye(self.rank)
        return 0.5 * (I + self.matrix), 0.5 * (I - self.matrix)


@dataclass(frozen=True)
class TransportResult:
    P: np.ndarray
    P_inv: np.ndarray
    b_insertions: int

    @property
    def inverse_residual(self) -> float:
        return float(np.max(np.abs(self.P @ self.P_inv - np.eye(len(self.P)))))


# --------------------------------------------------------------------------- transport


def _substeps(b: BundleSpec, segment: GeodesicSegment) -> int:
    h = min(segment.duration, b.max_step(segment.start.speed))
    return max(1, int(np.ceil(segment.duration / h - 1e-12))) if segment.duration > 0 else 0


def _generator_samples(b: BundleSpec, segment: GeodesicSegment, n: int) -> np.ndarray:
    # values at s_i, s_i + h/2, ..., shape (2n + 1, k, k)
    s = np.linspace(0.0, segment.duration, 2 * n + 1)
    x, v = segment.states(s)
    return b.generator(x, v)


def transport_segment(
    b: BundleSpec, segment: GeodesicSegment, method: str = "auto", inverse: bool = False, refine: int = 1
) -> np.ndarray:
    """Path-ordered exponential along one free geodesic piece.

    ``method`` is ``"rk4"``, ``"closed_form"`` (rank one only) or ``"auto"``.
    With ``inverse=True`` the inverse is obtained from its own ODE.
    ``refine`` multiplies the number of substeps.
    """
    k = b.rank
    if segment.duration < 0:
        raise InvalidInputError("negative segment duration")
    if segment.duration == 0 or b.is_flat_trivial:
        return np.eye(k, dtype=b.dtype)
    if method == "auto":
        method = "closed_form" if k == 1 else "rk4"
    n = _substeps(b, segment) * int(refine)
    C = _generator_samples(b, segment, n)
    h = segment.duration / n
    if method == "closed_form":
        if k != 1:
            raise InvalidInputError("closed form transport needs a rank-one bundle")
        c = C[:, 0, 0]
        integral = h / 6.0 * np.sum(c[0:-1:2] + 4.0 * c[1::2] + c[2::2])
        return np.array([[np.exp(-integral if inverse else integral)]])
    if method != "rk4":
        raise InvalidInputError(f"unknown transport method {method!r}")
    M = np.eye(k, dtype=C.dtype)
    for i in range(n):
        c0, cm, c1 = C[2 * i], C[2 * i + 1], C[2 * i + 2]
        if inverse:
            k1 = -M @ c0
            k2 = -(M + 0.5 * h * k1) @ cm
            k3 = -(M + 0.5 * h * k2) @ cm
            k4 = -(M + h * k3) @ c1
        else:
            k1 = c0 @ M
            k2 = cm @ (M + 0.5 * h * k1)
            k3 = cm @ (M + 0.5 * h * k2)
            k4 = c1 @ (M + h * k3)
        M = M + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return M


def b_transport(
    b: BundleSpec, B: BoundaryOperator, path: ReflectedPath, method: str = "auto", refine: int = 1
) -> TransportResult:
    """B-path-ordered exponential and its inverse along a traced path.

    ``B`` is inserted at every reflection event in time order, including the
    time-zero event of a path that starts outward on the boundary.
    """
    if not path.ok:
        raise RejectedPathError(f"transport undefined for a {path.status.value} path")
    if B.rank != b.rank:
        raise InvalidInputError("boundary operator and bundle have different ranks")
    k = b.rank
    dtype = np.result_type(b.dtype, B.matrix.dtype)
    P = np.eye(k, dtype=dtype)
    Q = np.eye(k, dtype=dtype)
    Bm = B.matrix
    events = list(path.events)
    ei = 0
    clock = 0.0
    inserted = 0
    for seg in path.segments:
        while ei < len(events) and events[ei].time <= clock:
            P = Bm @ P
            Q = Q @ Bm
            ei += 1
            inserted += 1
        P = transport_segment(b, seg, method, refine=refine) @ P
        Q = Q @ transport_segment(b, seg, method, inverse=True, refine=refine)
        clock += seg.duration
    while ei < len(events):
        P = Bm @ P
        Q = Q @ Bm
        ei += 1
        inserted += 1
    return TransportResult(P, Q, inserted)


@dataclass(frozen=True)
class BoundaryValidation:
    valid: bool
    involution_error: float
    symmetry_error: float
    commutator_error: float
    notes: tuple[str, ...] = ()


def validate_boundary_operator(
    b: BundleSpec, B: BoundaryOperator, g: GeometryModel, rng: np.random.Generator | None = None, n: int = 1000
) -> BoundaryValidation:
    """Check ``B^2 = I``, ``B = B*`` and ``[A(x, xi), B] = 0`` on boundary tangents."""
    Bm = B.matrix
    I = np.eye(B.rank)
    inv_err = float(np.max(np.abs(Bm @ Bm - I)))
    sym_err = float(np.max(np.abs(Bm - np.conj(Bm.T))))
    notes: list[str] = []
    if not g.has_boundary:
        return BoundaryValidation(True, inv_err, sym_err, 0.0, ("closed geometry: no boundary condition to check",))
    comm_err = 0.0
    if isinstance(g, Interval):
        notes.append("boundary of an interval is zero-dimensional; commutator check is vacuous")
    elif b.connection is not None:
        rng = rng if rng is not None else np.random.default_rng(0)
        x = g.sample_boundary(rng, n)
        nrm = g.batch_normal(x)
        tangent = np.column_stack([-nrm[:, 1], nrm[:, 0]]) * rng.standard_normal((n, 1))
        A = np.asarray(b.connection(x, tangent)).reshape(n, b.rank, b.rank)
        comm = A @ Bm - Bm @ A
        comm_err = float(np.max(np.linalg.norm(comm, ord=2, axis=(1, 2))))
    valid = inv_err <= 1e-12 and sym_err <= 1e-12 and comm_err <= 1e-8
    if comm_err > 1e-8:
        notes.append("B is not parallel along the boundary for this connection")
    return BoundaryValidation(valid, inv_err, sym_err, comm_err, tuple(notes))


# ---------------------------------------------------------------------------- registry


def _constant_potential(value: float = 1.0, rank: int = 1):
    def V(x):
        return np.broadcast_to(value * np.eye(rank), (len(x), rank, rank))

    return V, abs(value)


def _diagonal_potential(values=(0.0,), rank: int = 1):
    values = np.asarray(values, dtype=float)
    if len(values) != rank:
        raise InvalidInputError("diagonal potential needs one value per fibre dimension")
    D = np.diag(values)

    def V(x):
        return np.broadcast_to(D, (len(x), rank, rank))

    return V, float(np.max(np.abs(values)))


def _cosine_well(amplitude: float = 1.0, frequency: float = 1.0, coordinate: int = 0, rank: int = 1):
    coordinate = int(coordinate)

    def V(x):
        c = amplitude * np.cos(frequency * x[:, coordinate])
        return c[:, None, None] * np.eye(rank)

    return V, abs(amplitude)


POTENTIALS = {
    "constant": _constant_potential,
    "diagonal": _diagonal_potential,
    "cosine-well": _cosine_well,
}


def _circle_holonomy(g: GeometryModel, rank: int, c: float = 0.5):
    if not isinstance(g, Circle):
        raise InvalidInputError("circle-holonomy needs a circle geometry")
    if rank != 1:
        raise InvalidInputError("circle-holonomy is a rank-one connection")
    r = g.radius

    def A(x, xi):
        return (1j * c / r) * xi.reshape(len(x), 1, 1)

    return A, abs(c) / r


def _constant_connection(g: GeometryModel, rank: int, matrices=()):
    mats = np.asarray(matrices, dtype=complex).reshape(-1, rank, rank)
    if len(mats) != g.chart_dim:
        raise InvalidInputError("constant connection needs one matrix per chart coordinate")
    if np.allclose(mats.imag, 0):
        mats = mats.real

    def A(x, xi):
        return np.einsum("md,dij->mij", xi, mats)

    bound = float(np.sqrt(sum(np.linalg.norm(Ai, 2) ** 2 for Ai in mats)))
    return A, bound


CONNECTIONS = {"circle-holonomy": _circle_holonomy, "constant": _constant_connection}


def bundle_from_descriptor(desc: dict, g: GeometryModel) -> BundleSpec:
    """Build a registry bundle from a config table.

    ``{"rank": 1, "field": "real", "alpha": 1.0,
    "potential": {"name": "cosine-well"}, "connection": {"name": "zero"}}``
    """
    d = dict(desc)
    rank = int(d.pop("rank", 1))
    fld = d.pop("field", None)
    alpha = d.pop("alpha", None)
    pot = dict(d.pop("potential", {"name": "zero"}))
    con = dict(d.pop("connection", {"name": "zero"}))
    if d:
        raise InvalidInputError(f"unknown bundle keys: {sorted(d)}")
    V, V_bound = None, 0.0
    pname = pot.pop("name", "zero")
    if pname != "zero":
        if pname not in POTENTIALS:
            raise InvalidInputError(f"unknown potential {pname!r}; known: zero, {', '.join(sorted(POTENTIALS))}")
        try:
            V, V_bound = POTENTIALS[pname](rank=rank, **pot)
        except TypeError as exc:
            raise InvalidInputError(f"bad parameters for potential {pname!r}: {exc}") from exc
    elif pot:
        raise InvalidInputError("the zero potential takes no parameters")
    A, A_bound = None, 0.0
    cname = con.pop("name", "zero")
    if cname != "zero":
        if cname not in CONNECTIONS:
            raise InvalidInputError(f"unknown connection {cname!r}; known: zero, {', '.join(sorted(CONNECTIONS))}")
        try:
            A, A_bound = CONNECTIONS[cname](g, rank, **con)
        except TypeError as exc:
            raise InvalidInputError(f"bad parameters for connection {cname!r}: {exc}") from exc
    elif con:
        raise InvalidInputError("the zero connection takes no parameters")
    if fld is None:
        fld = "complex" if cname == "circle-holonomy" else "real"
    if alpha is None:
        alpha = V_bound
    alpha = float(alpha)
    if alpha < V_bound - 1e-12:
        raise InvalidInputError(f"alpha={alpha} is below the potential bound {V_bound}")
    return BundleSpec(
        rank=rank,
        field=fld,
        potential=V,
        connection=A,
        alpha=alpha,
        connection_bound=A_bound,
        name=f"{pname}/{cname}",
        params={"potential": {"name": pname, **pot}, "connection": {"name": cname, **con}},
    )


def boundary_from_descriptor(desc: dict, rank: int) -> BoundaryOperator:
    d = dict(desc)
    preset = d.pop("preset", "neumann")
    signs = d.pop("signs", None)
    if d:
        raise InvalidInputError(f"unknown boundary keys: {sorted(d)}")
    if preset == "dirichlet":
        return BoundaryOperator.dirichlet(rank)
    if preset == "neumann":
        return BoundaryOperator.neumann(rank)
    if preset == "blockwise":
        if signs is None or len(signs) != rank:
            raise InvalidInputError("blockwise boundary needs one sign per fibre dimension")
        return BoundaryOperator.blockwise(signs)
    raise InvalidInputError(f"unknown boundary preset {preset!r}")
