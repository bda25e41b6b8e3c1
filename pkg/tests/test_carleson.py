import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blochb2.carleson import (
    Arc,
    BoxQuadrature,
    CarlesonSquare,
    DyadicTree,
    QuadratureCache,
    TopHalfTiling,
    box_average,
    dyadic_sup_scan,
    integrate_signed,
    square_area,
    tile_top_halves,
)
from blochb2.weights.families import LogFunction, PointPower, RadialPower, constant_weight

arcs = st.builds(Arc, st.floats(0, 2 * math.pi), st.floats(1e-6, 1.0))


@given(arcs)
def test_square_area_and_membership(arc):
    Q = CarlesonSquare(arc)
    m = arc.length
    assert Q.area == pytest.approx(m * (1 - (1 - m) ** 2), rel=1e-12)
    assert 0 < Q.area <= 1
    z = (1 - 0.75 * m) * np.exp(1j * arc.center_angle)
    assert Q.contains(z) and Q.in_top_half(z)
    assert not Q.contains((1 - 1.01 * m) * np.exp(1j * arc.center_angle)) or m > 0.99


def test_full_square_excludes_origin():
    Q = CarlesonSquare(Arc.full())
    assert Q.area == 1.0
    assert not Q.contains(0.0)
    assert Q.anchor == 0


def test_arc_children_partition_parent():
    tree = DyadicTree(Arc(1.0, 0.5), 6)
    for k in range(7):
        arcs = tree.arcs(k)
        assert len(arcs) == 2 ** k
        assert all(a.length == pytest.approx(0.5 * 2.0 ** -k) for a in arcs)
        assert sum(a.length for a in arcs) == pytest.approx(0.5)


@pytest.mark.parametrize("depth", [0, 3, 10, 14])
def test_tiling_conserves_area(depth):
    Q = CarlesonSquare(Arc(0.3, 0.25))
    tiles, residual = tile_top_halves(Q, depth)
    assert len(tiles) == 2 ** (depth + 1) - 1
    total = sum(t.area for _, t in tiles) + residual.area
    assert total == pytest.approx(Q.area, abs=1e-9)
    if depth == 0:
        assert residual.area == pytest.approx(Q.area - tiles[0][1].area, abs=1e-15)


def test_quadrature_weights_sum_to_area():
    quad = BoxQuadrature(radial_levels=8)
    for m in (1.0, 0.5, 1 / 64):
        t = TopHalfTiling(Arc(0.0, m), quad.radial_levels, quad)
        tot = sum(t.weights(n).sum() * t.tiles_in_row(n) for n in range(t.depth + 1)) + t.strip_below(0, t.depth)
        assert tot == pytest.approx(square_area(m), rel=1e-12)


def test_box_average_constant_is_one():
    flat = LogFunction(lambda z: np.zeros(np.shape(z)), "zero")
    for m in (1.0, 0.3, 2.0 ** -12):
        Q = CarlesonSquare(Arc(2.0, m))
        assert box_average(constant_weight(), Q).value == 1.0
        for L in (2, 4, 8):
            assert box_average(flat, Q, BoxQuadrature(radial_levels=L)).value == pytest.approx(1.0, abs=1e-12)


def test_box_average_radial_closed_form_and_tiling():
    # int (1 - r^2) 2r dr = 1/2
    assert box_average(RadialPower(1.0), CarlesonSquare(Arc.full())).value == pytest.approx(0.5, abs=1e-15)
    generic = LogFunction(lambda z: np.log1p(-np.abs(z) ** 2), "radial-1")
    assert box_average(generic, CarlesonSquare(Arc.full()), BoxQuadrature(radial_levels=10)).value == pytest.approx(0.5, rel=1e-4)


def test_radial_average_depends_only_on_length():
    w = LogFunction(lambda z: 0.5 * np.log1p(-np.abs(z) ** 2), "radial-half")
    a = box_average(w, CarlesonSquare(Arc(0.4, 1 / 16))).value
    b = box_average(w, CarlesonSquare(Arc(4.1, 1 / 16))).value
    assert a == pytest.approx(b, rel=1e-10)


def test_box_average_point_divergence():
    Q = CarlesonSquare(Arc(0.0, 1 / 8))
    out = box_average(PointPower(-2.5, 1.0), Q)
    assert out.divergent and out.value == math.inf
    ok = box_average(PointPower(-1.0, 1.0), Q)
    assert not ok.divergent and np.isfinite(ok.value)


def test_scan_examples():
    root = Arc.full()
    res = dyadic_sup_scan(lambda Q: Q.area, root, 6)
    assert res.argmax.arc.length == 1.0
    assert dyadic_sup_scan(lambda Q: 1.0, root, 5).value == 1.0
    L = 9
    res = dyadic_sup_scan(lambda Q: Q.m ** -0.1, Arc(0.0, 0.5), L)
    assert res.value == pytest.approx(2 ** (0.1 * L) * 0.5 ** -0.1, rel=1e-12)
    assert res.argmax.m == pytest.approx(0.5 * 2.0 ** -L)


def test_scan_propagates_divergence_and_is_monotone():
    res = dyadic_sup_scan(lambda Q: (1.0, Q.m < 0.1), Arc.full(), 6)
    assert res.divergent and res.value == math.inf
    vals = [dyadic_sup_scan(lambda Q: math.sin(7 * Q.arc.center_angle) ** 2 + Q.m, Arc.full(), L).value for L in range(6)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        dyadic_sup_scan(lambda Q: 1.0, Arc.full(), 25)


def test_integrate_signed_polynomial():
    quad = BoxQuadrature(radial_levels=8, angular_nodes=8)
    t = TopHalfTiling(Arc.full(), quad.radial_levels, quad)
    vals = [np.real(t.nodes(n)) for n in range(t.depth + 1)]
    assert abs(integrate_signed(t, vals)[0]) < 1e-12


def test_quadrature_cache_roundtrip(tmp_path):
    path = tmp_path / "cache.json"
    cache = QuadratureCache(path)
    w = PointPower(-1.0, 1.0)
    Q = CarlesonSquare(Arc(0.0, 0.25))
    first = box_average(w, Q, cache=cache)
    cache.save()
    again = QuadratureCache(path)
    hit = again.get(w, Q, BoxQuadrature().radial_levels)
    assert hit is not None and hit.value == first.value


def test_box_quadrature_validation():
    with pytest.raises(ValueError):
        BoxQuadrature(radial_levels=1)
    with pytest.raises(ValueError):
        BoxQuadrature(scheme="adaptive")
    assert BoxQuadrature().refined().radial_levels == 8
