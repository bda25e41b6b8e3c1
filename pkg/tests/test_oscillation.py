import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blochb2.bloch.functions import ClosedForm
from blochb2.carleson import Arc, CarlesonSquare
from blochb2.geometry import MetricConvention, hyperbolic_distance
from blochb2.weights import (
    ExpHarmonic,
    PointPower,
    RadialPower,
    bmo_disc_norm,
    constant_weight,
    epsilon_condition,
    epsilon_stability,
    jn_profile,
    oscillation_constant,
    sarason_check,
    sarason_search,
)
from blochb2.weights.oscillation import jn_bound, jn_check, jn_lambda_grid, sample_pairs, sample_square
from blochb2.weights.sarason import random_space, sarason_check_log


def test_pairs_reproducible_and_inside():
    a = sample_pairs(2000, 3)
    b = sample_pairs(2000, 3)
    assert np.array_equal(a.z, b.z) and np.array_equal(a.zeta, b.zeta)
    assert np.all(np.abs(a.z) < 1) and np.all(np.abs(a.zeta) < 1)
    assert len(a) >= 2000 and a.budget == 2000


def test_oscillation_constant_trivial():
    assert oscillation_constant(constant_weight(), 1000) == 0.0
    with pytest.raises(ValueError):
        oscillation_constant(constant_weight(), 10)


def test_oscillation_constant_exp_re_z():
    # |Re z - Re zeta| <= beta(z, zeta) for the Bloch function z
    c = oscillation_constant(ExpHarmonic(ClosedForm("identity")), 4000)
    assert 0 < c <= 2.1


def test_oscillation_bound_holds_on_pairs():
    w = RadialPower(0.5)
    c = oscillation_constant(w, 2000, seed=1)
    p = sample_pairs(2000, 1)
    d = np.abs(w.log_eval(p.z) - w.log_eval(p.zeta))
    b = hyperbolic_distance(p.z, p.zeta, MetricConvention.PAPER_SQUARED)
    assert np.all(d <= c * (1 + b) + 1e-12)


def test_epsilon_condition():
    assert epsilon_condition(constant_weight(), 0.3, 1000) == 0.0
    w = RadialPower(1.0)
    small = epsilon_condition(w, 0.5, 2000)
    large = epsilon_condition(w, 2.0, 2000)
    assert small >= large >= 0
    with pytest.raises(ValueError):
        epsilon_condition(w, 0.0, 2000)


def test_epsilon_stability_radial():
    st_ = epsilon_stability(RadialPower(1.0), 2.5, 2000)
    assert st_.stable and st_.budgets == [2000, 4000]
    assert epsilon_stability(RadialPower(1.0), 0.5, 2000).constants[1] > 0


def test_bmo():
    assert bmo_disc_norm(lambda z: np.full(np.shape(z), 3.0), 100, 100) == 0.0
    v = bmo_disc_norm(lambda z: -np.log(1 - np.abs(z) ** 2), 100, 200)
    assert 0.3 < v < 2.0
    with pytest.raises(ValueError):
        bmo_disc_norm(lambda z: z.real, 10, 100)


def test_jn_constant_and_lambda_zero():
    Q = CarlesonSquare(Arc(0.0, 0.5))
    p = jn_profile(constant_weight(), Q, [0.1, 1.0], mc_samples=10_000)
    assert p.tail_fraction == [0.0, 0.0]
    p = jn_profile(RadialPower(0.5), Q, [0.0], mc_samples=10_000)
    assert p.tail_fraction[0] > 0.999


def test_jn_bound_pointpower():
    w = PointPower(1.0, 1.0)
    cs = 1.834
    lam = jn_lambda_grid(cs)
    assert lam[0] == pytest.approx(2.5 + 0.5 * math.log(cs))
    assert lam[-1] - lam[0] == pytest.approx(3.5)
    for k in (1, 3, 5):
        Q = CarlesonSquare(Arc(0.0, 2.0 ** -k))
        prof = jn_profile(w, Q, lam, mc_samples=20_000, seed=k)
        assert all(jn_check(prof, cs))
    assert jn_bound(1.0, 0.0) == pytest.approx(2 * math.e ** 2)
    with pytest.raises(ValueError):
        jn_check(prof, math.inf)


def test_sample_square_inside():
    Q = CarlesonSquare(Arc(1.0, 0.25))
    z = sample_square(Q, 5000, 0)
    assert np.all(1 - np.abs(z) <= Q.m + 1e-15)


def test_sarason_constant():
    r = sarason_check([2.0, 2.0, 2.0], [0.2, 0.3, 0.5])
    assert r.epsilon == 0.0 and r.variance == 0.0 and r.bound_ok


def test_sarason_two_point():
    d = 0.1
    r = sarason_check([math.exp(d), math.exp(-d)], [0.5, 0.5])
    # (cosh d)^2 - 1, computed here as sinh^2 d
    assert r.epsilon == pytest.approx(math.sinh(d) ** 2, rel=1e-12)
    assert r.epsilon == pytest.approx(0.0100334, abs=1e-7)
    assert r.variance == pytest.approx(0.01, rel=1e-12)
    assert r.bound_ok


def test_sarason_rejects_bad_input():
    with pytest.raises(ValueError):
        sarason_check([1.0, 1.0], [0.5, 0.6])
    with pytest.raises(ValueError):
        sarason_check([1.0, -1.0], [0.5, 0.5])
    with pytest.raises(ValueError):
        sarason_check([1.0, 100.0], [0.5, 0.5])


def test_sarason_random_search():
    violations, results = sarason_search(1000, seed=0)
    assert violations == 0 and len(results) == 1000
    assert all(0 <= r.epsilon < 1 for r in results)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_sarason_property(seed):
    log_w, masses = random_space(np.random.default_rng(seed))
    r = sarason_check_log(log_w, masses)
    assert r.variance <= 4 * r.epsilon
