import math

import numpy as np
import pytest

from slicedheat.exceptions import InvalidInputError
from slicedheat.geometry import Circle, Disk, FlatTorus, Interval, Sphere
from slicedheat.sections import section_from_descriptor


def test_interval_modes():
    g = Interval(0, math.pi)
    x = np.linspace(0, math.pi, 11)[:, None]
    u = section_from_descriptor({"name": "sin-mode", "k": 2, "amplitude": 0.5}, g)
    np.testing.assert_allclose(u(x)[:, 0], 0.5 * np.sin(2 * x[:, 0]), atol=1e-15)
    u = section_from_descriptor({"name": "cos-series", "coefficients": [1.0, 0.0, 0.3]}, g)
    np.testing.assert_allclose(u(x)[:, 0], 1 + 0.3 * np.cos(2 * x[:, 0]), atol=1e-15)
    assert u.sup_norm == pytest.approx(1.3)
    assert u.coefficients == {0: 1.0, 2: 0.3}


def test_scaled_interval():
    g = Interval(1.0, 3.0)
    u = section_from_descriptor({"name": "sin-mode", "k": 1}, g)
    assert u([[2.0]])[0, 0] == pytest.approx(1.0)
    assert u([[1.0]])[0, 0] == pytest.approx(0.0, abs=1e-15)


def test_complex_modes():
    u = section_from_descriptor({"name": "fourier-mode", "k": 1}, Circle(1))
    assert u.complex_valued
    assert u([[0.5]])[0, 0] == pytest.approx(np.exp(0.5j))
    u = section_from_descriptor({"name": "torus-mode", "k": [1, 2]}, FlatTorus(1, 2))
    assert u([[0.25, 0.5]])[0, 0] == pytest.approx(np.exp(2j * math.pi * (0.25 + 0.5)))


def test_sphere_band_is_eigenfunction():
    """Laplace-Beltrami via the Euclidean Laplacian of the degree-0 homogeneous extension."""
    g = Sphere(1)
    Q = np.array([[0.3, 0.1, 0.0], [0.1, -0.5, 0.2], [0.0, 0.2, 0.2]])
    u1 = section_from_descriptor({"name": "sphere-band", "linear": [0.2, -0.4, 0.9]}, g)
    u2 = section_from_descriptor({"name": "sphere-band", "linear": [0.0, 0.0, 0.0], "quadratic": Q.tolist()}, g)
    rng = np.random.default_rng(0)
    pts = g.sample_points(rng, 5)
    h = 1e-3
    for u, lam in ((u1, 2.0), (u2, 6.0)):
        F = lambda y: u(y / np.linalg.norm(y, axis=1, keepdims=True))[:, 0]
        for p in pts:
            lap = sum(F(np.array([p + h * e])) + F(np.array([p - h * e])) - 2 * F(np.array([p])) for e in np.eye(3)) / h**2
            assert lap[0] == pytest.approx(-lam * F(np.array([p]))[0], abs=2e-5)


def test_sup_norm_check():
    rng = np.random.default_rng(0)
    u = section_from_descriptor({"name": "sin-series", "coefficients": [1.0, 0.5]}, Interval(0, math.pi))
    assert u.check_sup_norm(Interval(0, math.pi), rng) <= u.sup_norm


def test_constant_rank_two():
    u = section_from_descriptor({"name": "constant", "value": [1.0, -2.0]}, Disk(1))
    assert u.rank == 2
    np.testing.assert_array_equal(u([[0.1, 0.2]]), [[1.0, -2.0]])


def test_descriptor_errors():
    with pytest.raises(InvalidInputError):
        section_from_descriptor({"name": "sin-mode"}, Disk(1))
    with pytest.raises(InvalidInputError):
        section_from_descriptor({"name": "gaussian"}, Interval(0, 1))
    with pytest.raises(InvalidInputError):
        section_from_descriptor({"name": "sin-mode", "q": 1}, Interval(0, 1))
    with pytest.raises(InvalidInputError):
        section_from_descriptor({"name": "sphere-band", "quadratic": np.eye(3).tolist()}, Sphere(1))
