import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad, solve_ivp

from slicedheat.billiard import (
    PathStatus,
    anti_development,
    billiard_flow,
    path_energy,
    trace_batch,
    trace_reflected,
)
from slicedheat.exceptions import DomainError, InvalidInputError, RejectedPathError
from slicedheat.geometry import Circle, Disk, Interval, PhasePoint


def unfold(x, v, t, a, b):
    """Interval billiard by unfolding onto a circle of length 2L."""
    L = b - a
    y = (x - a + v * t) % (2 * L)
    if y <= L:
        return a + y, v
    return a + 2 * L - y, -v


def disk_by_events(x, v, t, R=1.0):
    """Disk billiard with solve_ivp event detection and explicit restarts."""
    x, v = np.array(x, float), np.array(v, float)
    clock, refl = 0.0, 0

    def hit(s, y):
        return y[0] ** 2 + y[1] ** 2 - R * R

    hit.terminal = True
    hit.direction = 1
    while clock < t:
        sol = solve_ivp(lambda s, y: [v[0], v[1]], (0, t - clock), x, events=hit, rtol=1e-13, atol=1e-14)
        if sol.t_events[0].size == 0:
            return sol.y[:, -1], v, refl
        s = sol.t_events[0][0]
        x = x + s * v
        x *= R / np.linalg.norm(x)
        n = -x / R
        v = v - 2 * np.dot(v, n) * n
        clock += s
        refl += 1
    return x, v, refl


@given(st.floats(0.0, 1.0), st.floats(-20, 20).filter(lambda v: abs(v) > 1e-3), st.floats(0, 5))
def test_interval_matches_unfolding(x, v, t):
    path = trace_reflected(Interval(0, 1), [x], [v], t)
    if not path.ok:
        return
    xe, ve = unfold(x, v, t, 0.0, 1.0)
    fin = path.final
    assert fin.position[0] == pytest.approx(xe, abs=1e-9)
    if min(abs(fin.position[0]), abs(fin.position[0] - 1)) > 1e-9:
        assert fin.velocity[0] == pytest.approx(ve)


def test_disk_matches_event_integration():
    rng = np.random.default_rng(3)
    g = Disk(1.0)
    for _ in range(25):
        x = g.sample_points(rng, 1)[0]
        v = rng.standard_normal(2) * 2
        t = rng.uniform(0.5, 3)
        path = trace_reflected(g, x, v, t)
        xe, ve, re = disk_by_events(x, v, t)
        np.testing.assert_allclose(path.final.position, xe, atol=1e-8)
        np.testing.assert_allclose(path.final.velocity, ve, atol=1e-8)
        assert path.refl == re


def test_interval_example():
    p = trace_reflected(Interval(0, 1), [0.3], [1.0], 1.0)
    assert p.final.position[0] == pytest.approx(0.7)
    assert p.final.velocity[0] == -1.0
    assert p.refl == 1 and p.sign == 1


def test_disk_diameter_bounce():
    p = trace_reflected(Disk(1), [0.0, 0.0], [1.0, 0.0], 3.0)
    assert [e.time for e in p.events] == pytest.approx([1.0, 3.0])
    np.testing.assert_allclose(p.events[0].point, [1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(p.final.position, [-1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(p.final.velocity, [1.0, 0.0], atol=1e-12)
    p = trace_reflected(Disk(1), [0.0, 0.0], [1.0, 0.0], 4.0)
    np.testing.assert_allclose(p.final.position, [0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(p.final.velocity, [1.0, 0.0], atol=1e-12)
    assert p.refl == 2


def test_outward_boundary_start():
    p = trace_reflected(Interval(0, 1), [0.0], [-1.0], 0.25)
    assert p.sign == -1
    assert p.refl == 1 and p.events[0].time == 0.0
    assert p.final.position[0] == pytest.approx(0.25)
    assert p.final.velocity[0] == 1.0
    p = trace_reflected(Interval(0, 1), [0.0], [1.0], 0.25)
    assert p.sign == 1 and p.refl == 0


def test_flow_backwards_on_circle():
    r = billiard_flow(Circle(1), PhasePoint([0.0], [1.0]), -math.pi / 2)
    assert r.final.position[0] % (2 * math.pi) == pytest.approx(3 * math.pi / 2)
    assert r.final.velocity[0] == 1.0


def test_flow_interval():
    r = billiard_flow(Interval(0, 1), PhasePoint([0.3], [1.0]), 1.0)
    assert r.in_domain
    assert r.final.position[0] == pytest.approx(0.7)
    assert r.final.velocity[0] == -1.0


def test_grazing_leaves_domain():
    g = Disk(1, grazing_threshold=0.1)
    r = billiard_flow(g, PhasePoint([0.999, 0.0], [0.0, 1.0]), 1.0)
    assert not r.in_domain
    assert r.path.status is PathStatus.GRAZING
    np.testing.assert_array_equal(r.final.position, [0.999, 0.0])
    np.testing.assert_array_equal(r.final.velocity, [0.0, 1.0])


def test_reflection_cap():
    p = trace_reflected(Interval(0, 1), [0.5], [100.0], 1.0, max_reflections=10)
    assert p.status is PathStatus.CAP
    with pytest.raises(RejectedPathError):
        path_energy(p)


def test_energy_examples():
    assert path_energy(trace_reflected(Interval(0, 10), [5.0], [2.0], 1.0)) == pytest.approx(1.0)
    assert path_energy(trace_reflected(Disk(1), [0.1, 0.0], [0.0, 0.0], 1.0)) == 0.0
    a = trace_reflected(Interval(0, 10), [5.0], [1.0], 0.5)
    b = trace_reflected(Interval(0, 10), [a.final.position[0]], [3.0], 0.5)
    ab = a.concat(b)
    ref = quad(lambda s: 1.0 if s < 0.5 else 9.0, 0, 1, points=[0.5])[0] / 4
    assert path_energy(ab) == pytest.approx(1.25)
    assert path_energy(ab) == pytest.approx(ref)


def test_energy_independent_of_reflections():
    p = trace_reflected(Disk(1), [0.2, 0.1], [3.0, 1.0], 2.0)
    assert p.refl > 0
    assert path_energy(p) == pytest.approx(0.25 * 10.0 * 2.0)


def test_anti_development_examples():
    s, U = anti_development(trace_reflected(Interval(0, 1), [0.2], [1.0], 0.3))
    np.testing.assert_allclose(U[:, 0], s, atol=1e-14)
    assert U[-1, 0] == pytest.approx(0.3)
    s, U = anti_development(trace_reflected(Interval(0, 1), [0.3], [1.0], 1.0))
    np.testing.assert_allclose(U[:, 0], s, atol=1e-12)
    s, U = anti_development(trace_reflected(Disk(1), [0.0, 0.0], [1.0, 0.0], 3.0))
    np.testing.assert_allclose(U[:, 0], s, atol=1e-12)
    np.testing.assert_allclose(U[:, 1], 0.0, atol=1e-12)


def test_split_and_concat_roundtrip():
    p = trace_reflected(Disk(1), [0.2, 0.1], [3.0, 1.0], 2.0)
    a, b = p.split(0.77)
    q = a.concat(b)
    assert q.refl == p.refl
    np.testing.assert_allclose(q.final.position, p.final.position, atol=1e-12)
    assert a.total_time + b.total_time == pytest.approx(2.0)


def test_batch_matches_scalar():
    rng = np.random.default_rng(1)
    g = Disk(1)
    x = g.sample_points(rng, 50)
    v = rng.standard_normal((50, 2)) * 3
    flow = trace_batch(g, x, v, 1.3)
    for i in range(50):
        p = trace_reflected(g, x[i], v[i], 1.3)
        np.testing.assert_allclose(flow.position[i], p.final.position, atol=1e-12)
        assert flow.reflections[i] == p.refl


def test_invalid_inputs():
    with pytest.raises(DomainError):
        trace_reflected(Disk(1), [2.0, 0.0], [1.0, 0.0], 1.0)
    with pytest.raises(InvalidInputError):
        trace_reflected(Disk(1), [0.0, 0.0], [1.0, 0.0], -1.0)
    with pytest.raises(InvalidInputError):
        trace_reflected(Disk(1), [0.0], [1.0], 1.0)
