import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from blochb2.bloch.functions import little_bloch_lacunary, parse_function
from blochb2.carleson import Arc, BoxQuadrature, CarlesonSquare
from blochb2.weights import (
    Composed,
    ExpHarmonic,
    GridSampled,
    LogFunction,
    PointPower,
    RadialPower,
    arctan_re_weight,
    b2_characteristic,
    b2_predicate,
    constant_weight,
    gamma,
    parse_weight,
    vanishing_b2_profile,
)
from blochb2.weights.b2 import b1star_ratio, conformal_sweep


def radial_average(alpha, m):
    """Independent oracle: average of (1-|z|^2)^alpha over a Carleson square of length m."""
    lo = 1.0 - m
    # substitute t = 1 - r^2 so the integrand is the smooth t^alpha
    num = integrate.quad(lambda t: t**alpha, 0.0, 1 - lo * lo, epsabs=0, epsrel=1e-13)[0]
    return num / (1 - lo * lo)


def test_radial_closed_form_matches_quadrature():
    w = RadialPower(0.5)
    for m in (1.0, 0.25, 1e-3):
        assert math.exp(w.closed_form_log_average(m)) == pytest.approx(radial_average(0.5, m), rel=1e-10)
    assert RadialPower(-1.0).closed_form_log_average(0.5) == math.inf


def test_constant_weight_characteristic():
    for L in (0, 4, 10):
        rep = b2_characteristic(constant_weight(), max_level=L)
        assert rep.characteristic_sq == 1.0
        assert all(v == 1.0 for v in rep.per_level)


def test_radial_half_characteristic():
    # oracle: product of the two quadrature averages, the same for every m
    oracle = radial_average(0.5, 0.1) * radial_average(-0.5, 0.1)
    assert oracle == pytest.approx(4 / 3, rel=1e-9)
    r8 = b2_characteristic(RadialPower(0.5), max_level=8)
    r12 = b2_characteristic(RadialPower(0.5), max_level=12)
    assert r8.characteristic_sq == pytest.approx(oracle, rel=1e-12)
    assert abs(r12.characteristic_sq / r8.characteristic_sq - 1) < 0.02
    assert b2_predicate(r12)


def test_generic_tiling_agrees_with_closed_form():
    w = LogFunction(lambda z: 0.5 * np.log1p(-np.abs(z) ** 2), "radial-half")
    rep = b2_characteristic(w, max_level=8)
    assert rep.method == "tiling"
    assert rep.characteristic_sq == pytest.approx(4 / 3, rel=1e-4)


def test_radial_power_one_is_not_b2():
    # the average of (1-|z|^2)^-1 over any Carleson square is infinite
    assert b2_characteristic(RadialPower(1.0)).divergent
    assert not b2_predicate(b2_characteristic(RadialPower(1.0)))


def test_point_power_divergence():
    assert b2_characteristic(PointPower(-2.5, 1.0)).divergent
    assert not b2_characteristic(PointPower(-1.5, 1.0)).divergent


def test_duality_scaling_and_lower_bound():
    w = PointPower(1.3, 1j)
    a = b2_characteristic(w).characteristic_sq
    assert b2_characteristic(w.inverse).characteristic_sq == a
    assert b2_characteristic(w.scaled(3.7)).characteristic_sq == a
    assert a >= 1 - 1e-9


@settings(max_examples=15, deadline=None)
@given(st.floats(-0.95, 0.95), st.floats(0.01, 100.0))
def test_radial_family_properties(alpha, c):
    w = RadialPower(alpha)
    rep = b2_characteristic(w.scaled(c), max_level=6)
    assert rep.characteristic_sq == pytest.approx(1 / (1 - alpha * alpha), rel=1e-12)
    assert b2_characteristic(w.inverse, max_level=6).characteristic_sq == rep.characteristic_sq


def test_gamma_examples():
    assert gamma(constant_weight()).value == 0.0
    assert gamma(arctan_re_weight()).value == 0.0
    # (1-|z|^2)^(-1/t) is B2 iff 1/t < 1
    g = gamma(RadialPower(-1.0), tol=0.01)
    assert abs(g.value - 1.0) <= 0.01
    assert g.t_lo < g.t_hi
    # |1-z|^(-1/t) is B2 iff 1/t < 2
    g = gamma(PointPower(-1.0, 1.0), tol=0.01)
    assert abs(g.value - 0.5) <= 0.01


@pytest.mark.parametrize("s", [2.0, 0.5])
def test_gamma_homogeneity(s):
    tol = 0.01
    base = gamma(RadialPower(-1.0), tol=tol).value
    assert abs(gamma(RadialPower(-s), tol=tol).value - s * base) <= 2 * tol


def test_gamma_unbounded_status():
    g = gamma(None, predicate=lambda t: False, t_max=16)
    assert g.status == "unbounded" and g.value == math.inf


def test_conformal_sweep():
    reps = conformal_sweep(constant_weight(), [0, 0.5, 0.9j])
    assert all(r.characteristic_sq == 1.0 for r in reps)
    vals = [r.characteristic_sq for r in conformal_sweep(RadialPower(0.5), [0.0, 0.3, 0.6, 0.9, 0.9j])]
    assert all(np.isfinite(vals))
    assert max(vals) / min(vals) < 10
    assert vals[0] == pytest.approx(4 / 3, rel=1e-4)


def test_composed_at_origin_is_reflection():
    w = PointPower(1.0, 1.0)
    z = np.array([0.1 + 0.2j, -0.5, 0.7j])
    assert np.allclose(Composed(w, 0.0).log_eval(z), w.log_eval(-z))


def test_vanishing_profile():
    deltas = [2.0 ** -k for k in range(1, 20, 2)]
    assert all(v == 1.0 for _, v in vanishing_b2_profile(constant_weight(), deltas, max_level=8) if np.isfinite(v))
    prof = [v for _, v in vanishing_b2_profile(ExpHarmonic(little_bloch_lacunary(16)), deltas, max_level=8)]
    prof = [v for v in prof if np.isfinite(v)]
    assert len(prof) >= 6
    assert all(b <= a for a, b in zip(prof, prof[1:]))
    assert prof[-1] < prof[0]
    flat = [v for _, v in vanishing_b2_profile(RadialPower(0.5), deltas, max_level=8) if np.isfinite(v)]
    assert all(v == pytest.approx(4 / 3) for v in flat)
    with pytest.raises(ValueError):
        vanishing_b2_profile(constant_weight(), [0.1, 0.2])


def test_b1star():
    ratio, per, div = b1star_ratio(constant_weight(), [0, 0.5, 0.9j])
    assert np.allclose(per, 1.0, atol=1e-9) and not div
    pts = [0, 0.5, 0.9, 0.95, 0.95j]
    coarse = b1star_ratio(RadialPower(0.5), pts)[0]
    fine = b1star_ratio(RadialPower(0.5), pts, BoxQuadrature(8, 8, 4))[0]
    assert abs(fine / coarse - 1) < 0.05
    # at z = 0 the ratio is int w dA / w(0) = 1 / (1 + alpha)
    assert b1star_ratio(RadialPower(0.5), [0])[0] == pytest.approx(2 / 3, rel=1e-4)


def test_bmo_direction_small_multiple():
    # Re z has disc oscillation at most 2; e^{0.1 Re z} is B2
    rep = b2_characteristic(ExpHarmonic(parse_function("z"), 0.1))
    assert np.isfinite(rep.characteristic_sq)


def test_grid_sampled_roundtrip(tmp_path):
    src = PointPower(1.0, 1.0)
    g = GridSampled.from_weight(src, np.linspace(0, 0.9, 46), 256)
    z = np.array([0.1, 0.3 + 0.4j, -0.85j])
    assert np.allclose(g.log_eval(z), src.log_eval(z), atol=5e-3)
    path = tmp_path / "w.grid"
    g.save(path)
    h = GridSampled.load(path)
    assert np.array_equal(h.log_eval(z), g.log_eval(z))
    with pytest.raises(ValueError):
        g.log_eval(0.95)


def test_parse_weight():
    assert isinstance(parse_weight("const"), RadialPower)
    assert parse_weight("radial:0.5").alpha == 0.5
    w = parse_weight("point:1.5,3.14159")
    assert abs(w.xi0 + 1) < 1e-5
    e = parse_weight("exp-harmonic:log,2")
    assert e.scale == 2
    assert e.log_eval(0.5) == pytest.approx(2 * math.log(2))
    with pytest.raises(ValueError):
        parse_weight("nope")
