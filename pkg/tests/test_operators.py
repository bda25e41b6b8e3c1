import math

import numpy as np
import pytest

from blochb2.bloch import ClosedForm, PowerSeries, build_counterexample
from blochb2.operators import (
    BergmanProjection,
    SpectrumReport,
    antiderivative_product,
    cesaro_matrix,
    conformal_identity_residual,
    gelfand_trace,
    mobius_derivative,
    project,
    residual_halves,
    residual_trace,
    spectral_radius_b2,
    spectral_radius_eps,
    truncation_spectral_radius,
)

Z = np.array([0.0, 0.3, 0.5j, -0.6 + 0.2j, 0.8])


def test_nodes_normalized():
    for L in range(4):
        zeta, w = BergmanProjection(L).nodes()
        assert w.sum() == pytest.approx(1.0, abs=1e-13)
        assert np.sum(w * np.abs(zeta) ** 2) == pytest.approx(0.5, abs=1e-13)
    with pytest.raises(ValueError):
        BergmanProjection(8)


def test_project_polynomial():
    res = project(lambda z: z * z, Z)
    assert np.max(np.abs(res.values - Z * Z)) < 1e-6
    assert not res.divergent


def test_project_conjugate_is_zero():
    assert np.max(np.abs(project(np.conj, Z).values)) < 1e-6


def test_project_modulus_squared():
    assert np.max(np.abs(project(lambda z: np.abs(z) ** 2, Z).values - 0.5)) < 1e-6


def test_project_errors():
    with pytest.raises(ValueError):
        project(np.conj, [1.0])
    bad = project(lambda z: 1 / (1 - np.abs(z)), [0.0], BergmanProjection(1))
    assert bad.divergent or bad.tolerance > 0


def test_mobius_derivative():
    z, zeta, h = 0.4 + 0.2j, 0.1 - 0.3j, 1e-6
    phi = lambda x: (z - x) / (1 - np.conj(z) * x)  # noqa: E731
    fd = (phi(zeta + h) - phi(zeta - h)) / (2 * h)
    assert abs(fd - mobius_derivative(z, zeta)) < 1e-8


def test_confid_polynomial():
    assert conformal_identity_residual(lambda z: z ** 3 + 1, 0.5) < 1e-6


def test_confid_origin():
    assert conformal_identity_residual(lambda z: np.abs(z) ** 2, 0.0) < 1e-9


@pytest.mark.parametrize("z", [0.0, 0.5, 0.5j, -0.8])
def test_confid_halving(z):
    trace = residual_trace(lambda x: np.abs(x) ** 2, z, levels=(0, 1, 2, 3, 4))
    assert trace[-1][1] < 1e-5
    assert residual_halves(trace)


def test_residual_halves_floor():
    assert residual_halves([(0, 1.0), (1, 0.4), (2, 1e-13), (3, 2e-13)])
    assert not residual_halves([(0, 1.0), (1, 0.6)])


def test_cesaro_matches_convolution():
    g = PowerSeries([0.0, 0.5, -0.25j, 0.3, 0.1])
    N = 24
    M = cesaro_matrix(g, N)
    rng = np.random.default_rng(0)
    c = rng.normal(size=N) + 1j * rng.normal(size=N)
    c[N // 2 :] = 0
    direct = antiderivative_product(c, g.deriv_coefficients(N), N)
    assert np.max(np.abs(M.apply_monomial(c) - direct)) < 1e-12


def test_cesaro_log_matches_convolution():
    g = ClosedForm("neglog")
    N = 40
    c = np.zeros(N, dtype=complex)
    c[:5] = [1, -1, 2, 0.5j, 1]
    direct = antiderivative_product(c, g.deriv_coefficients(N), N)
    assert np.max(np.abs(cesaro_matrix(g, N).apply_monomial(c) - direct)) < 1e-12


def test_volterra_structure():
    M = cesaro_matrix(ClosedForm("identity"), 16)
    assert np.all(np.triu(M.entries) == 0)
    # e_n maps to z^{n+1}/(n+1) times sqrt(n+1), i.e. e_{n+1} / sqrt((n+1)(n+2))
    n = np.arange(15)
    assert np.allclose(np.diag(M.entries, -1), 1 / np.sqrt((n + 1) * (n + 2)))


def test_constant_g_zero_matrix():
    assert np.all(cesaro_matrix(PowerSeries([3.0]), 10).entries == 0)
    with pytest.raises(ValueError):
        cesaro_matrix(ClosedForm("identity"), 0)


@pytest.mark.parametrize("N", [16, 64, 256])
def test_volterra_eigenvalues_zero(N):
    rep = truncation_spectral_radius(cesaro_matrix(ClosedForm("identity"), N), doublings=0)
    assert rep.radius == 0.0 and rep.trace == [(N, 0.0)]


def test_truncation_zero_and_log():
    assert truncation_spectral_radius(cesaro_matrix(ClosedForm("zero"), 8)).radius == 0.0
    rep = truncation_spectral_radius(cesaro_matrix(ClosedForm("neglog"), 16), doublings=2)
    assert [r for _, r in rep.trace] == [0.0, 0.0, 0.0]
    with pytest.raises(ValueError):
        truncation_spectral_radius(cesaro_matrix(ClosedForm("identity"), 4))


def test_gelfand_trace_nilpotent():
    a = np.diag(np.ones(3), -1)
    tr = gelfand_trace(a)
    assert tr[-1][1] == 0.0


def test_spectrum_report_validation():
    with pytest.raises(ValueError):
        SpectrumReport("B2Criterion", 2.0, -1.0)


@pytest.mark.slow
def test_spectral_radius_b2_log():
    rep = spectral_radius_b2(ClosedForm("neglog"), p=2, xi_count=16, tol=0.02)
    assert rep.status == "ok"
    assert rep.radius == pytest.approx(1.0, rel=0.1)


@pytest.mark.slow
def test_spectral_radius_b2_bounded():
    rep = spectral_radius_b2(ClosedForm("identity").scaled(0.5), p=2, xi_count=16, tol=0.01)
    assert rep.radius <= 0.01


def test_spectral_radius_eps():
    rep = spectral_radius_eps(ClosedForm("identity").scaled(0.5), pair_budget=2000)
    assert rep.radius == 0.0 and rep.status == "ok"
    rep = spectral_radius_eps(build_counterexample("factorial", 10), pair_budget=10_000)
    assert rep.radius == 0.0
    rep = spectral_radius_eps(ClosedForm("neglog"), pair_budget=2000)
    assert math.isfinite(rep.radius) and rep.radius > 0
    with pytest.raises(ValueError):
        spectral_radius_eps(ClosedForm("identity"), eps_grid=[0.0])
