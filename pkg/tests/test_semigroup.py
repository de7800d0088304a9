import math
import warnings

import numpy as np
import pytest
from scipy import integrate

from slicedheat.bundle import BoundaryOperator, BundleSpec, bundle_from_descriptor
from slicedheat.exceptions import DomainError, InvalidInputError, UnsupportedError
from slicedheat.geometry import Disk, Interval, Sphere
from slicedheat.oracle import image_evolve
from slicedheat.sections import section_from_descriptor
from slicedheat.semigroup import (
    Partition,
    estimate_slice,
    generator_probe,
    philox_stream,
    quadrature_step_1d,
    richardson_weights,
    sample_paths,
    sample_segment_velocity,
)

PI_I = Interval(0.0, math.pi)
DIR = BoundaryOperator.dirichlet()
NEU = BoundaryOperator.neumann()


def sin_u():
    return section_from_descriptor({"name": "sin-mode", "k": 1}, PI_I)


def test_velocity_moments():
    z = sample_segment_velocity(2, 0.5, np.random.default_rng(0), 1_000_000)
    np.testing.assert_allclose(z.var(axis=0), 4.0, rtol=0.01)
    assert np.all(np.abs(z.mean(axis=0)) <= 3 * math.sqrt(4.0 / 1e6))


def test_velocity_density_normalised():
    dt = 1.0
    dens = lambda y, x: (dt / (4 * math.pi)) * math.exp(-dt * (x * x + y * y) / 4)
    val = integrate.dblquad(dens, -40, 40, -40, 40, epsabs=1e-10)[0]
    assert val == pytest.approx(1.0, abs=1e-6)


def test_partition():
    p = Partition.uniform(1.0, 4)
    assert p.n == 4 and p.mesh == pytest.approx(0.25)
    q = p.concat(Partition.from_steps([0.5, 0.1]))
    assert q.total == pytest.approx(1.6) and q.mesh == pytest.approx(0.5)
    with pytest.raises(InvalidInputError):
        Partition((0.0, 0.5, 0.5))
    with pytest.raises(InvalidInputError):
        Partition((0.1, 0.5))
    with pytest.raises(InvalidInputError):
        Partition.uniform(1.0, 0)


def test_flat_single_step_exact_in_mean():
    b = BundleSpec()
    for x in (0.3, 1.5, 2.8):
        e = estimate_slice(PI_I, b, DIR, sin_u(), [x], Partition.uniform(0.25, 1), 200_000, seed=11)
        assert abs(e.value[0] - math.exp(-0.25) * math.sin(x)) <= 4 * e.stderr[0]


def test_constant_preserved_exactly():
    g = Disk(1)
    u = section_from_descriptor({"name": "constant", "value": 2.5}, g)
    e = estimate_slice(g, BundleSpec(), NEU, u, [0.3, 0.2], Partition.uniform(0.5, 3), 5000, seed=1)
    assert e.value[0] == 2.5 and e.stderr[0] == 0.0


def test_antithetic_boundary_zero():
    g = Interval(0, 1)
    u = section_from_descriptor({"name": "cos-mode", "k": 1}, g)
    for M in (1, 2, 3, 1001, 40_000):
        e = estimate_slice(g, BundleSpec(), DIR, u, [0.0], Partition.uniform(0.3, 2), M, seed=5, antithetic=True)
        assert e.value[0] == 0.0
        assert e.samples_used == 2 * (-(-M // 2))


def test_antithetic_matches_plain_in_mean():
    g = Interval(0, 1)
    u = section_from_descriptor({"name": "cos-mode", "k": 1}, g)
    a = estimate_slice(g, BundleSpec(), NEU, u, [0.0], Partition.uniform(0.05, 1), 100_000, seed=5, antithetic=True)
    p = estimate_slice(g, BundleSpec(), NEU, u, [0.0], Partition.uniform(0.05, 1), 100_000, seed=6)
    assert abs(a.value[0] - p.value[0]) <= 4 * math.hypot(a.stderr[0], p.stderr[0])


def test_quadrature_examples():
    b = BundleSpec()
    q = quadrature_step_1d(PI_I, b, DIR, sin_u(), [1.0], 0.25)
    assert q[0] == pytest.approx(math.exp(-0.25) * math.sin(1.0), abs=1e-4)
    assert q[0] == pytest.approx(image_evolve("dirichlet", sin_u(), 1.0, 0.25), abs=1e-4)
    one = section_from_descriptor({"name": "constant"}, PI_I)
    assert quadrature_step_1d(PI_I, b, NEU, one, [0.7], 0.25)[0] == pytest.approx(1.0, abs=1e-12)
    assert quadrature_step_1d(PI_I, b, DIR, sin_u(), [1.0], 1e-4)[0] == pytest.approx(math.sin(1.0), abs=1e-3)


def test_quadrature_guards():
    with pytest.raises(UnsupportedError):
        quadrature_step_1d(Disk(1), BundleSpec(), DIR, None, [0.0, 0.0], 0.1)
    with pytest.raises(InvalidInputError):
        quadrature_step_1d(PI_I, BundleSpec(), DIR, sin_u(), [1.0], 0.1, nodes=10)


def test_richardson_weights():
    c = richardson_weights((0.04, 0.02, 0.01))
    t = np.array([0.04, 0.02, 0.01])
    assert c.sum() == pytest.approx(1.0)
    assert c @ t == pytest.approx(0.0, abs=1e-15)
    assert c @ t**2 == pytest.approx(0.0, abs=1e-15)


def test_generator_probe_constants():
    one = section_from_descriptor({"name": "constant"}, PI_I)
    r = generator_probe(PI_I, BundleSpec(), NEU, one, [1.0], M=1000, seed=1)
    assert r.value[0] == 0.0
    b = bundle_from_descriptor({"potential": {"name": "constant", "value": 0.8}}, PI_I)
    r = generator_probe(PI_I, b, NEU, one, [1.0], M=1000, seed=1)
    assert r.value[0] == pytest.approx(-0.8, abs=1e-6)


def test_seed_and_worker_determinism():
    b = bundle_from_descriptor({"potential": {"name": "cosine-well"}}, PI_I)
    tau = Partition.uniform(0.25, 3)
    runs = [estimate_slice(PI_I, b, NEU, sin_u(), [1.0], tau, 5000, seed=9, workers=w, chunk_size=1024) for w in (1, 3, 8)]
    assert all(r.value[0] == runs[0].value[0] and r.stderr[0] == runs[0].stderr[0] for r in runs)
    other = estimate_slice(PI_I, b, NEU, sin_u(), [1.0], tau, 5000, seed=10, chunk_size=1024)
    assert other.value[0] != runs[0].value[0]


def test_philox_streams_differ():
    a = philox_stream(1, 0).standard_normal(4)
    b = philox_stream(1, 1).standard_normal(4)
    c = philox_stream(2, 0).standard_normal(4)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)
    with pytest.raises(InvalidInputError):
        philox_stream(-1, 0)


def test_norm_bound_per_sample():
    b = bundle_from_descriptor({"potential": {"name": "cosine-well", "amplitude": 0.9}, "alpha": 1.0}, PI_I)
    batch = sample_paths(PI_I, b, DIR, np.array([0.4]), Partition.uniform(0.7, 4), np.random.default_rng(0), m=4000)
    norms = np.abs(batch.weights[batch.ok, 0, 0])
    assert np.max(norms) <= math.exp(0.7) * (1 + 1e-6)


def test_rejection_warning():
    g = Disk(1, grazing_threshold=0.5)
    u = section_from_descriptor({"name": "constant"}, g)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        e = estimate_slice(g, BundleSpec(), NEU, u, [0.95, 0.0], Partition.uniform(1.0, 1), 2000)
    assert e.warning and e.rejected > 20
    assert any(issubclass(x.category, RuntimeWarning) for x in w)


def test_closed_model_estimate():
    g = Sphere(1)
    u = section_from_descriptor({"name": "sphere-band", "linear": [0.0, 0.0, 1.0]}, g)
    e = estimate_slice(g, BundleSpec(), NEU, u, [0.0, 0.0, 1.0], Partition.uniform(0.2, 8), 40_000, seed=3)
    assert abs(e.value[0] - math.exp(-0.4)) <= 0.01 + 4 * e.stderr[0]


def test_input_validation():
    with pytest.raises(DomainError):
        estimate_slice(PI_I, BundleSpec(), DIR, sin_u(), [4.0], Partition.uniform(0.1, 1), 10)
    with pytest.raises(InvalidInputError):
        estimate_slice(PI_I, BundleSpec(), DIR, sin_u(), [1.0], Partition.uniform(0.1, 1), 0)
    with pytest.raises(InvalidInputError):
        estimate_slice(PI_I, BundleSpec(), DIR, sin_u(), [1.0], 0.1, 10)
    with pytest.raises(InvalidInputError):
        generator_probe(PI_I, BundleSpec(), DIR, sin_u(), [1.0], t_list=(0.01, 0.02))
