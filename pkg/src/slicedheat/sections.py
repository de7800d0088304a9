"""Registry of sections (initial data and test functions) on the model manifolds."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import InvalidInputError
from .geometry import Circle, FlatTorus, GeometryModel, Interval, Sphere


@dataclass(frozen=True)
class FieldSection:
    """A section ``x -> u(x)`` with values in ``R^k`` or ``C^k``.

    ``basis``/``coefficients`` describe the section in an eigenbasis when it
    has one (``"sin"``, ``"cos"``, ``"fourier"``, ``"torus"``,
    ``"sphere-band"``); spectral oracles only accept such sections.
    """

    func: Callable[[np.ndarray], np.ndarray]
    sup_norm: float
    rank: int = 1
    complex_valued: bool = False
    name: str = "custom"
    params: dict = field(default_factory=dict)
    basis: str | None = None
    coefficients: dict = field(default_factory=dict)
    domain: dict = field(default_factory=dict)

    def __call__(self, x) -> np.ndarray:
        """Values at ``(m, D)`` positions, shape ``(m, k)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.asarray(self.func(x))
        return out.reshape(len(x), self.rank)

    @property
    def dtype(self):
        return np.complex128 if self.complex_valued else np.float64

    def check_sup_norm(self, g: GeometryModel, rng: np.random.Generator, n: int = 2000) -> float:
        """Sampled sup of ``|u|``; raises if it exceeds the declared bound."""
        x = g.sample_points(rng, n)
        if g.has_boundary:
            x = np.vstack([x, g.sample_boundary(rng, max(1, n // 10))])
        vals = self(x)
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError(f"section {self.name!r} is not finite on the manifold")
        sup = float(np.max(np.linalg.norm(vals, axis=1)))
        if sup > self.sup_norm + 1e-9:
            raise InvalidInputError(f"section {self.name!r}: sampled sup {sup} exceeds declared {self.sup_norm}")
        return sup


def _interval_phase(g: GeometryModel, k: float):
    if not isinstance(g, Interval):
        raise InvalidInputError("this section is defined on an interval")
    scale = np.pi / g.length
    return lambda x: k * scale * (x[:, 0] - g.a)


def _constant(g, value=1.0):
    vals = np.atleast_1d(np.asarray(value))
    cplx = np.iscomplexobj(vals)
    rank = len(vals)

    def f(x):
        return np.broadcast_to(vals, (len(x), rank))

    coeff = {}
    basis = None
    if rank == 1:
        c = complex(vals[0]) if cplx else float(vals[0])
        if isinstance(g, Interval):
            basis, coeff = "cos", {0: c}
        elif isinstance(g, Circle):
            basis, coeff = "fourier", {0: c}
        elif isinstance(g, FlatTorus):
            basis, coeff = "torus", {(0, 0): c}
        elif isinstance(g, Sphere):
            basis, coeff = "sphere-band", {0: c}
    return FieldSection(f, float(np.linalg.norm(vals)), rank, cplx, "constant", {"value": value}, basis, coeff)


def _sin_series(g, coefficients=(1.0,)):
    coefficients = [float(c) for c in coefficients]
    phase = _interval_phase(g, 1.0)

    def f(x):
        th = phase(x)
        return sum(c * np.sin((j + 1) * th) for j, c in enumerate(coefficients))

    coeff = {j + 1: c for j, c in enumerate(coefficients) if c != 0}
    return FieldSection(
        f, float(sum(abs(c) for c in coefficients)), 1, False, "sin-series", {"coefficients": coefficients}, "sin", coeff
    )


def _cos_series(g, coefficients=(1.0,)):
    coefficients = [float(c) for c in coefficients]
    phase = _interval_phase(g, 1.0)

    def f(x):
        th = phase(x)
        return sum(c * np.cos(j * th) for j, c in enumerate(coefficients))

    coeff = {j: c for j, c in enumerate(coefficients) if c != 0}
    return FieldSection(
        f, float(sum(abs(c) for c in coefficients)), 1, False, "cos-series", {"coefficients": coefficients}, "cos", coeff
    )


def _sin_mode(g, k=1, amplitude=1.0):
    if int(k) != k or k < 1:
        raise InvalidInputError("sin-mode index must be a positive integer")
    sec = _sin_series(g, [0.0] * (int(k) - 1) + [float(amplitude)])
    return FieldSection(sec.func, sec.sup_norm, 1, False, "sin-mode", {"k": k, "amplitude": amplitude}, "sin", sec.coefficients)


def _cos_mode(g, k=0, amplitude=1.0):
    if int(k) != k or k < 0:
        raise InvalidInputError("cos-mode index must be a nonnegative integer")
    sec = _cos_series(g, [0.0] * int(k) + [float(amplitude)])
    return FieldSection(sec.func, sec.sup_norm, 1, False, "cos-mode", {"k": k, "amplitude": amplitude}, "cos", sec.coefficients)


def _fourier_mode(g, k=1, amplitude=1.0):
    if not isinstance(g, Circle):
        raise InvalidInputError("fourier-mode is defined on a circle")
    if int(k) != k:
        raise InvalidInputError("fourier-mode index must be an integer")
    k = int(k)

    def f(x):
        return amplitude * np.exp(1j * k * x[:, 0])

    return FieldSection(f, abs(amplitude), 1, True, "fourier-mode", {"k": k, "amplitude": amplitude}, "fourier", {k: complex(amplitude)})


def _torus_mode(g, k=(1, 0), amplitude=1.0):
    if not isinstance(g, FlatTorus):
        raise InvalidInputError("torus-mode is defined on a flat torus")
    k1, k2 = (int(i) for i in k)
    L1, L2 = g.periods

    def f(x):
        return amplitude * np.exp(2j * np.pi * (k1 * x[:, 0] / L1 + k2 * x[:, 1] / L2))

    return FieldSection(
        f, abs(amplitude), 1, True, "torus-mode", {"k": [k1, k2], "amplitude": amplitude}, "torus", {(k1, k2): complex(amplitude)}
    )


def _sphere_band(g, c0=0.0, linear=(0.0, 0.0, 1.0), quadratic=None):
    """``c0 + a . xhat + xhat^T Q xhat`` with ``Q`` traceless symmetric."""
    if not isinstance(g, Sphere):
        raise InvalidInputError("sphere-band is defined on a sphere")
    a = np.asarray(linear, dtype=float).reshape(3)
    Q = np.zeros((3, 3)) if quadratic is None else np.asarray(quadratic, dtype=float).reshape(3, 3)
    if np.max(np.abs(Q - Q.T)) > 1e-12 or abs(np.trace(Q)) > 1e-12:
        raise InvalidInputError("sphere-band quadratic part must be symmetric and traceless")
    R = g.radius

    def f(x):
        xh = x / R
        return c0 + xh @ a + np.einsum("mi,ij,mj->m", xh, Q, xh)

    bound = abs(c0) + float(np.linalg.norm(a)) + float(np.max(np.abs(np.linalg.eigvalsh(Q))))
    params = {"c0": c0, "linear": a.tolist()}
    if quadratic is not None:
        params["quadratic"] = Q.tolist()
    coeff = {0: float(c0), 1: a, 2: Q}
    return FieldSection(f, bound, 1, False, "sphere-band", params, "sphere-band", coeff)


SECTIONS = {
    "constant": _constant,
    "sin-mode": _sin_mode,
    "cos-mode": _cos_mode,
    "sin-series": _sin_series,
    "cos-series": _cos_series,
    "fourier-mode": _fourier_mode,
    "torus-mode": _torus_mode,
    "sphere-band": _sphere_band,
}


def section_from_descriptor(desc: dict, g: GeometryModel) -> FieldSection:
    """``{"name": "sin-mode", "k": 1}`` -> section on ``g``."""
    d = dict(desc)
    name = d.pop("name", None)
    if name not in SECTIONS:
        raise InvalidInputError(f"unknown section {name!r}; known: {', '.join(sorted(SECTIONS))}")
    try:
        sec = SECTIONS[name](g, **d)
    except TypeError as exc:
        raise InvalidInputError(f"bad parameters for section {name!r}: {exc}") from exc
    return FieldSection(
        sec.func, sec.sup_norm, sec.rank, sec.complex_valued, sec.name, sec.params, sec.basis, sec.coefficients, g.descriptor()
    )
