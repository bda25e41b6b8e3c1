import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blochb2.geometry import (
    DiskPoint,
    MetricConvention,
    MobiusMap,
    StolzAngle,
    geodesic_sample,
    hyperbolic_distance,
    hyperbolic_length,
    mobius_apply,
    pseudo_hyperbolic,
)

PAPER = MetricConvention.PAPER_SQUARED
STD = MetricConvention.STANDARD


def disk_points(max_r=0.99):
    return st.builds(
        lambda r, t: r * complex(math.cos(t), math.sin(t)),
        st.floats(0.0, max_r),
        st.floats(0.0, 2 * math.pi),
    )


def random_disk(rng, n, max_r=0.99):
    r = max_r * np.sqrt(rng.random(n))
    return r * np.exp(2j * np.pi * rng.random(n))


def test_disk_point_rejects_boundary():
    with pytest.raises(ValueError):
        DiskPoint(1.0, 0.0)
    with pytest.raises(ValueError):
        DiskPoint(0.8, 0.7)
    assert abs(DiskPoint(0.3, -0.4)) == pytest.approx(0.5)


def test_mobius_examples():
    z = DiskPoint(0.5, 0.0)
    assert mobius_apply(MobiusMap(z), z.z) == 0
    assert mobius_apply(0.0, 0.3 + 0.2j) == -(0.3 + 0.2j)
    # (0.5 - 0.25) / (1 - 0.125)
    assert mobius_apply(MobiusMap(z), 0.25) == pytest.approx(0.2857142857142857, abs=1e-15)


@given(disk_points(), disk_points())
def test_mobius_involution(a, z):
    phi = MobiusMap(DiskPoint.from_complex(a))
    assert abs(phi(phi(z)) - z) < 1e-9
    assert abs(phi(0.0) - a) < 1e-15


def test_distance_examples():
    assert hyperbolic_distance(0.3j, 0.3j) == 0.0
    assert hyperbolic_distance(0, 0.5, PAPER) == pytest.approx(0.2554128118829953, rel=1e-12)
    assert hyperbolic_distance(0, 0.5, STD) == pytest.approx(math.atanh(0.5), rel=1e-12)


def test_distance_near_boundary_is_finite():
    z = 1 - 1e-15
    for conv in MetricConvention:
        d = hyperbolic_distance(0.0, z, conv)
        assert np.isfinite(d) and d > 10


def test_mobius_invariance_random_triples():
    rng = np.random.default_rng(1)
    a, z, w = (random_disk(rng, 1000) for _ in range(3))
    for conv in MetricConvention:
        d0 = hyperbolic_distance(z, w, conv)
        d1 = hyperbolic_distance(mobius_apply(a[:, None], z[:, None])[:, 0], mobius_apply(a[:, None], w[:, None])[:, 0], conv)
        assert np.max(np.abs(d1 - d0)) < 1e-9


@settings(max_examples=200)
@given(disk_points(), disk_points())
def test_distance_symmetric_and_comparable(z, w):
    for conv in MetricConvention:
        assert hyperbolic_distance(z, w, conv) == pytest.approx(hyperbolic_distance(w, z, conv), abs=1e-12)
    p, s = hyperbolic_distance(z, w, PAPER), hyperbolic_distance(z, w, STD)
    assert p <= 2 * s + 1e-12
    assert s <= 2 * p + math.log(2) + 1e-12


def test_distance_monotone_in_pseudo_distance():
    r = np.linspace(0, 0.999, 500)
    for conv in MetricConvention:
        d = hyperbolic_distance(0.0, r, conv)
        assert np.all(np.diff(d) > 0)
    assert np.allclose(pseudo_hyperbolic(0.0, r), r)


@settings(max_examples=100)
@given(disk_points(0.95), disk_points(0.95), disk_points(0.95))
def test_standard_triangle_inequality(a, b, c):
    d = lambda x, y: hyperbolic_distance(x, y, STD)
    assert d(a, c) <= d(a, b) + d(b, c) + 1e-9


def test_geodesic_examples():
    assert np.allclose(geodesic_sample(0, 0.6, 2), [0, 0.6])
    pts = geodesic_sample(0, 0.3 + 0.4j, 9)
    assert np.allclose(np.angle(pts[1:]), np.angle(0.3 + 0.4j))
    mid = geodesic_sample(-0.7, 0.7, 3)[1]
    assert abs(mid) < 1e-15
    assert np.all(geodesic_sample(0.2, 0.2, 4) == 0.2)
    with pytest.raises(ValueError):
        geodesic_sample(0, 0.5, 1)


def test_geodesic_uniform_in_arclength():
    pts = geodesic_sample(0.5j, -0.3 + 0.1j, 11)
    steps = hyperbolic_distance(pts[:-1], pts[1:], STD)
    assert np.allclose(steps, steps[0], rtol=1e-9)
    assert steps.sum() == pytest.approx(hyperbolic_distance(0.5j, -0.3 + 0.1j, STD), rel=1e-9)


def test_hyperbolic_length():
    r = 0.9
    path = np.linspace(0, r, 10_001)
    # int_0^r dt / (1 - t^2) = atanh(r)
    assert hyperbolic_length(path) == pytest.approx(math.atanh(r), abs=1e-6)
    assert hyperbolic_length([0.3, 0.3, 0.3]) == 0.0
    rng = np.random.default_rng(0)
    p = random_disk(rng, 50, 0.9)
    assert hyperbolic_length(p) == pytest.approx(hyperbolic_length(p[::-1]), rel=1e-13)


def test_stolz_angle():
    S = StolzAngle(1j, 2.0)
    s = np.logspace(-12, -1e-3, 200)
    assert np.all(S.contains(1j * (1 - s)))
    assert not S.contains(-0.5j)
    with pytest.raises(ValueError):
        StolzAngle(0.5, 2.0)
    with pytest.raises(ValueError):
        StolzAngle(1.0, 1.0)


def test_convention_parse():
    assert MetricConvention.parse("standard") is STD
    with pytest.raises(ValueError):
        MetricConvention.parse("euclid")
