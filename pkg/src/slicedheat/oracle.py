"""Reference solutions of the heat equation ``u_t = -L u``.

Eigenfunction expansions for the models with known spectra, method-of-images
kernels on the half-line and on intervals, and a Crank-Nicolson finite
difference solver for interval problems with a potential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg
from scipy.interpolate import CubicSpline

from .exceptions import InvalidInputError, UnsupportedError
from .geometry import Interval
from .sections import FieldSection

PROBLEMS = ("interval-dirichlet", "interval-neumann", "circle", "circle-holonomy", "torus", "sphere")
_BASIS = {
    "interval-dirichlet": "sin",
    "interval-neumann": "cos",
    "circle": "fourier",
    "circle-holonomy": "fourier",
    "torus": "torus",
    "sphere": "sphere-band",
}


@dataclass(frozen=True)
class SpectralModel:
    """Exact spectrum of ``L = nabla^* nabla + shift`` on a model problem.

    ``a``/``b`` bound the interval, ``radius`` belongs to circle and sphere,
    ``holonomy`` is ``c`` in ``nabla = d + i c dtheta``, ``periods`` belong to
    the torus and ``potential_shift`` is a constant potential.
    """

    problem: str
    a: float = 0.0
    b: float = math.pi
    radius: float = 1.0
    holonomy: float = 0.0
    periods: tuple[float, float] = (1.0, 1.0)
    potential_shift: float = 0.0

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise UnsupportedError(f"no spectral oracle for {self.problem!r}; known: {', '.join(PROBLEMS)}")
        if self.problem != "circle-holonomy" and self.holonomy != 0:
            raise InvalidInputError("holonomy is only meaningful for circle-holonomy")

    @property
    def length(self) -> float:
        return self.b - self.a

    def eigenvalue(self, mode) -> float:
        p = self.problem
        if p in ("interval-dirichlet", "interval-neumann"):
            lam = (mode * math.pi / self.length) ** 2
        elif p in ("circle", "circle-holonomy"):
            lam = ((mode + self.holonomy) / self.radius) ** 2
        elif p == "torus":
            lam = 4 * math.pi**2 * ((mode[0] / self.periods[0]) ** 2 + (mode[1] / self.periods[1]) ** 2)
        else:
            lam = mode * (mode + 1) / self.radius**2
        return lam + self.potential_shift

    def eigenpairs(self, J: int) -> list[tuple[float, object]]:
        """The ``J`` lowest eigenvalues with mode labels, nondecreasing."""
        p = self.problem
        if p == "interval-dirichlet":
            modes = list(range(1, J + 1))
        elif p == "interval-neumann":
            modes = list(range(J))
        elif p in ("circle", "circle-holonomy"):
            modes = list(range(-J, J + 1))
        elif p == "torus":
            modes = [(i, j) for i in range(-J, J + 1) for j in range(-J, J + 1)]
        else:
            modes = list(range(J))
        pairs = sorted(((self.eigenvalue(mm), mm) for mm in modes), key=lambda q: q[0])
        return pairs[:J]

    def eigenfunction(self, mode, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        p = self.problem
        if p == "interval-dirichlet":
            return np.sin(mode * math.pi * (x[:, 0] - self.a) / self.length)
        if p == "interval-neumann":
            return np.cos(mode * math.pi * (x[:, 0] - self.a) / self.length)
        if p in ("circle", "circle-holonomy"):
            return np.exp(1j * mode * x[:, 0])
        if p == "torus":
            L1, L2 = self.periods
            return np.exp(2j * math.pi * (mode[0] * x[:, 0] / L1 + mode[1] * x[:, 1] / L2))
        raise UnsupportedError("sphere eigenfunctions are represented by bands")

    def kernel(self, x: float, y: float, t: float, tol: float = 1e-12) -> float:
        """Interval heat kernel by eigenfunction expansion, tail below ``tol``."""
        if self.problem not in ("interval-dirichlet", "interval-neumann"):
            raise UnsupportedError("kernel expansion is implemented for intervals")
        if not t > 0:
            raise InvalidInputError("t must be positive")
        L = self.length
        J = self.truncation(t, tol)
        k = np.arange(0 if self.problem == "interval-neumann" else 1, J + 1)
        norm = np.where(k == 0, 1.0 / L, 2.0 / L)
        phase = k * math.pi / L
        trig = np.sin if self.problem == "interval-dirichlet" else np.cos
        terms = norm * np.exp(-(phase**2 + self.potential_shift) * t) * trig(phase * (x - self.a)) * trig(phase * (y - self.a))
        return float(np.sum(terms))

    def truncation(self, t: float, tol: float) -> int:
        """Smallest ``J`` whose interval-kernel tail is below ``tol``."""
        L = self.length
        q = (math.pi / L) ** 2 * t
        J = 1
        while True:
            # sum_{k>J} e^{-q k^2} <= e^{-q (J+1)^2} / (1 - e^{-q (2J+3)})
            lead = math.exp(-q * (J + 1) ** 2)
            tail = (2.0 / L) * lead / (1.0 - math.exp(-q * (2 * J + 3)))
            if tail * math.exp(-self.potential_shift * t) <= tol:
                return J
            J += 1


def spectral_evolve(model: SpectralModel, u0: FieldSection, t: float) -> FieldSection:
    """``e^{-tL} u0`` for a section given by finitely many eigen-coefficients.

    Finite coefficient sets are evolved exactly, so the reported tail bound
    (``params["tail_bound"]``) is zero.
    """
    if not t >= 0:
        raise InvalidInputError("t must be nonnegative")
    want = _BASIS[model.problem]
    if u0.basis != want:
        raise UnsupportedError(f"section {u0.name!r} is not expanded in the {want} basis of {model.problem}")
    _check_domain(model, u0)
    coeffs = u0.coefficients
    if model.problem == "sphere":
        decay = {ell: math.exp(-model.eigenvalue(ell) * t) for ell in coeffs}
        c0 = coeffs.get(0, 0.0) * decay.get(0, 0.0)
        a = np.asarray(coeffs.get(1, np.zeros(3))) * decay.get(1, 0.0)
        Q = np.asarray(coeffs.get(2, np.zeros((3, 3)))) * decay.get(2, 0.0)
        R = model.radius

        def f(x):
            xh = x / R
            return c0 + xh @ a + np.einsum("mi,ij,mj->m", xh, Q, xh)

        new = {0: c0, 1: a, 2: Q}
        sup = abs(c0) + float(np.linalg.norm(a)) + float(np.max(np.abs(np.linalg.eigvalsh(Q))))
    else:
        new = {mode: c * math.exp(-model.eigenvalue(mode) * t) for mode, c in coeffs.items()}

        def f(x):
            out = np.zeros(len(x), dtype=complex if u0.complex_valued else float)
            for mode, c in new.items():
                out = out + c * model.eigenfunction(mode, x)
            return out

        sup = float(sum(abs(c) for c in new.values()))
    params = {"source": u0.name, "source_params": u0.params, "t": t, "problem": model.problem, "tail_bound": 0.0}
    return FieldSection(f, sup, 1, u0.complex_valued, "spectral-evolved", params, u0.basis, new, u0.domain)


def _check_domain(model: SpectralModel, u0: FieldSection) -> None:
    d = u0.domain
    if not d:
        return
    kind = d.get("kind")
    if model.problem.startswith("interval"):
        ok = kind == "interval" and math.isclose(d["a"], model.a) and math.isclose(d["b"], model.b)
    elif model.problem.startswith("circle") or model.problem == "sphere":
        ok = kind in ("circle", "sphere") and math.isclose(d["radius"], model.radius)
    else:
        ok = kind == "torus" and math.isclose(d["L1"], model.periods[0]) and math.isclose(d["L2"], model.periods[1])
    if not ok:
        raise InvalidInputError(f"section lives on {d}, not on the {model.problem} model")


def spectral_model_for(g, bc: str, holonomy: float = 0.0, potential_shift: float = 0.0) -> SpectralModel:
    """Spectral model matching a geometry and a scalar boundary condition."""
    kind = g.kind
    if kind == "interval":
        if bc not in ("dirichlet", "neumann"):
            raise UnsupportedError("interval oracles need a Dirichlet or Neumann condition")
        return SpectralModel(f"interval-{bc}", a=g.a, b=g.b, potential_shift=potential_shift)
    if kind == "circle":
        prob = "circle-holonomy" if holonomy else "circle"
        return SpectralModel(prob, radius=g.radius, holonomy=holonomy, potential_shift=potential_shift)
    if kind == "torus":
        return SpectralModel("torus", periods=(g.L1, g.L2), potential_shift=potential_shift)
    if kind == "sphere":
        return SpectralModel("sphere", radius=g.radius, potential_shift=potential_shift)
    raise UnsupportedError(f"no spectral oracle on a {kind}")


# --------------------------------------------------------------------- images


def _gauss(d, t):
    return np.exp(-(d**2) / (4.0 * t)) / math.sqrt(4.0 * math.pi * t)


def image_kernel(problem: str, bc: str, x: float, y: float, t: float, interval=(0.0, math.pi)) -> float:
    """Heat kernel as a signed sum of free Gaussians over mirror images.

    ``problem`` is ``"half-line"`` (``[0, inf)``) or ``"interval"``; Dirichlet
    images carry sign ``(-1)^(number of mirrorings)``.
    """
    if not t > 0:
        raise InvalidInputError("t must be positive")
    if bc not in ("dirichlet", "neumann"):
        raise InvalidInputError("bc must be 'dirichlet' or 'neumann'")
    s = -1.0 if bc == "dirichlet" else 1.0
    if problem == "half-line":
        return float(_gauss(x - y, t) + s * _gauss(x + y, t))
    if problem != "interval":
        raise InvalidInputError("problem must be 'half-line' or 'interval'")
    a, b = interval
    L = b - a
    total = 0.0
    n = 0
    while True:
        shifts = [0] if n == 0 else [n, -n]
        terms = 0.0
        for j in shifts:
            # images of y under the reflection group: y + 2jL (even), 2a - y + 2jL (odd)
            terms += _gauss(x - (y + 2 * j * L), t) + s * _gauss(x - (2 * a - y + 2 * j * L), t)
        total += terms
        if n > 0 and abs(terms) < 1e-16 and 2 * (n - 1) * L > abs(x - y) + 2 * L:
            return float(total)
        n += 1


def image_evolve(bc: str, u0, x: float, t: float, interval=(0.0, math.pi)) -> float:
    """``int K(x, y, t) u0(y) dy`` over the interval with the image kernel."""
    a, b = interval

    def integrand(y):
        val = u0(np.array([[y]]))[0, 0]
        return image_kernel("interval", bc, x, y, t, interval) * float(np.real(val))

    val, _ = integrate.quad(integrand, a, b, points=[min(max(x, a), b)], epsabs=1e-13, epsrel=1e-12, limit=200)
    return float(val)


# -------------------------------------------------------------- finite difference


def _cn_solution(a, b, V, bc, u0, t, n, dt_max=None):
    h = (b - a) / n
    nodes = np.linspace(a, b, n + 1)
    Vn = np.asarray(V(nodes[:, None]), dtype=float).reshape(n + 1)
    if bc == "dirichlet":
        inner = nodes[1:-1]
        d = 2.0 / h**2 + Vn[1:-1]
        e = np.full(n - 2, -1.0 / h**2)
        lam, Y = linalg.eigh_tridiagonal(d, e)
        w = np.ones(n - 1)
        f0 = np.real(u0(inner[:, None])[:, 0])
    else:
        d = 2.0 / h**2 + Vn
        e = np.full(n, -1.0 / h**2)
        # ghost-node rows are -2/h^2 off the diagonal; symmetrize with trapezoid weights
        e[0] = e[-1] = -math.sqrt(2.0) / h**2
        lam, Y = linalg.eigh_tridiagonal(d, e)
        w = np.ones(n + 1)
        w[0] = w[-1] = 0.5
        f0 = np.real(u0(nodes[:, None])[:, 0])
    dt_cap = h**2 if dt_max is None else dt_max
    steps = max(1, math.ceil(t / dt_cap - 1e-12))
    dt = t / steps
    z = lam * dt
    growth = ((1.0 - 0.5 * z) / (1.0 + 0.5 * z)) ** steps
    sq = np.sqrt(w)
    out = (Y @ (growth * (Y.T @ (sq * f0)))) / sq
    if bc == "dirichlet":
        out = np.concatenate([[0.0], out, [0.0]])
    return nodes, out


def fd_reference_evolve(
    g: Interval, V, bc: str, u0: FieldSection, t: float, grid_size: int = 2000, dt: float | None = None
) -> FieldSection:
    """Crank-Nicolson solution of ``u_t = u_xx - V u`` with Richardson extrapolation.

    ``V`` maps ``(m, 1)`` positions to values (``None`` for zero). Grids with
    ``grid_size/2``, ``grid_size`` and ``2*grid_size`` cells are solved; the
    two Richardson values are compared and their gap is reported as
    ``params["self_consistency"]``. CN steps are applied exactly through the
    eigendecomposition of the symmetrized tridiagonal matrix.
    """
    if not isinstance(g, Interval):
        raise UnsupportedError("finite-difference reference needs an interval")
    if bc not in ("dirichlet", "neumann"):
        raise InvalidInputError("bc must be 'dirichlet' or 'neumann'")
    if grid_size < 2000 or grid_size % 2:
        raise InvalidInputError("grid_size must be an even number >= 2000")
    if not t >= 0:
        raise InvalidInputError("t must be nonnegative")
    h = g.length / grid_size
    if dt is not None and not 0 < dt <= h**2:
        raise InvalidInputError(f"time step {dt} exceeds the stability cap h^2 = {h * h}")
    if t == 0:
        return u0
    if V is None:
        V = lambda x: np.zeros(len(x))  # noqa: E731
    else:
        V0 = V
        V = lambda x: np.asarray(V0(x)).reshape(len(x))  # noqa: E731
    sols = {}
    for n in (grid_size // 2, grid_size, 2 * grid_size):
        cap = None if dt is None else dt * (n / grid_size) ** -2
        sols[n] = _cn_solution(g.a, g.b, V, bc, u0, t, n, cap)
    coarse = (4.0 * sols[grid_size][1][::2] - sols[grid_size // 2][1]) / 3.0
    fine = (4.0 * sols[2 * grid_size][1][::2] - sols[grid_size][1]) / 3.0
    consistency = float(np.max(np.abs(fine[::2] - coarse)))
    nodes = sols[grid_size][0]
    spline = CubicSpline(nodes, fine)

    def f(x):
        return spline(np.clip(x[:, 0], g.a, g.b))

    params = {
        "source": u0.name,
        "source_params": u0.params,
        "t": t,
        "bc": bc,
        "grid_size": grid_size,
        "self_consistency": consistency,
    }
    return FieldSection(f, float(np.max(np.abs(fine))), 1, False, "fd-evolved", params, None, {}, g.descriptor())
