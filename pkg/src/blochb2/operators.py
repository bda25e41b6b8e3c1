"""Bergman projection by quadrature, the conformal-invariance identity,
Cesaro-type integration operators ``T_g f = int_0^z f g'`` and their
spectral radii."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bloch.functions import AnalyticFunction
from .carleson import DEFAULT_SHIFTS, Arc, BoxQuadrature, cached_tiling
from .geometry import MetricConvention, as_complex, mobius_apply, one_minus_abs2
from .weights.b2 import B2_GROWTH_THRESHOLD, DEFAULT_SCAN_QUAD, gamma, scan_log_rows
from .weights.oscillation import epsilon_stability

BASE_RADIAL = 16
BASE_ANGULAR = 32
ROUNDOFF_FLOOR = 1e-12
MIN_TRUNCATION = 8


def _evaluator(f) -> Callable:
    if isinstance(f, AnalyticFunction):
        return f.eval
    if callable(f):
        return f
    raise TypeError("f must be callable on complex arrays")


@dataclass(frozen=True)
class BergmanProjection:
    """Polar product rule for ``P f(z) = int f(zeta) / (1 - conj(zeta) z)^2 dA(zeta)``.

    Level ``L`` uses ``16 * 2**L`` Gauss nodes in ``r`` and ``32 * 2**L``
    equispaced angles; the angular trapezoid rule is spectrally accurate
    for the periodic integrand. ``dA`` is normalized to ``A(D) = 1``.
    """

    level: int = 3

    def __post_init__(self):
        if not 0 <= self.level <= 7:
            raise ValueError("level must lie in [0, 7]")

    @property
    def radial_nodes(self) -> int:
        return BASE_RADIAL * 2 ** self.level

    @property
    def angular_nodes(self) -> int:
        return BASE_ANGULAR * 2 ** self.level

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened nodes and weights (weights sum to 1)."""
        x, wx = np.polynomial.legendre.leggauss(self.radial_nodes)
        r = 0.5 * (x + 1.0)
        wr = 0.5 * wx
        nt = self.angular_nodes
        theta = 2.0 * math.pi * np.arange(nt) / nt
        zeta = (r[:, None] * np.exp(1j * theta)[None, :]).ravel()
        # r dr dtheta / pi with dtheta = 2 pi / nt
        w = np.repeat(2.0 * r * wr / nt, nt)
        return zeta, w

    def refined(self) -> "BergmanProjection":
        return BergmanProjection(self.level + 1)

    def apply(self, values: np.ndarray, zeta: np.ndarray, w: np.ndarray, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        out = np.empty(z.shape, dtype=complex)
        fw = values * w
        cz = np.conj(zeta)
        for i, zi in enumerate(z):
            out[i] = np.sum(fw / (1.0 - cz * zi) ** 2)
        return out


@dataclass
class ProjectionResult:
    values: np.ndarray
    tolerance: float
    divergent: bool
    level: int


def project(f, z_grid, quad: BergmanProjection = BergmanProjection()) -> ProjectionResult:
    """``P f`` on ``z_grid`` at ``quad.level``; the tolerance is the change
    from one level coarser. Non-finite integrand values or a refinement
    change above 1 flag divergence."""
    fn = _evaluator(f)
    z = np.atleast_1d(as_complex(z_grid))
    if np.any(np.abs(z) >= 1.0):
        raise ValueError("z_grid must lie in the open disk")
    coarse = BergmanProjection(max(quad.level - 1, 0))
    results = []
    for q in (coarse, quad):
        zeta, w = q.nodes()
        vals = np.asarray(fn(zeta), dtype=complex)
        if not np.all(np.isfinite(vals)):
            return ProjectionResult(np.full(z.shape, np.nan + 0j), math.inf, True, quad.level)
        results.append(q.apply(vals, zeta, w, z))
    tol = float(np.max(np.abs(results[1] - results[0]))) if quad.level > 0 else math.nan
    return ProjectionResult(results[1], tol, bool(np.isfinite(tol) and tol > 1.0), quad.level)


def mobius_derivative(z: complex, zeta) -> np.ndarray:
    """``phi_z'(zeta) = -(1 - |z|^2) / (1 - conj(z) zeta)^2`` for ``phi_z(zeta) = (z - zeta) / (1 - conj(z) zeta)``."""
    zeta = np.asarray(zeta, dtype=complex)
    return -one_minus_abs2(z) / (1.0 - np.conj(z) * zeta) ** 2


def default_zeta_grid(n: int = 24, radius: float = 0.5) -> np.ndarray:
    """Two circles and the origin."""
    t = 2.0 * math.pi * np.arange(n) / n
    return np.concatenate([[0.0], 0.5 * radius * np.exp(1j * t), radius * np.exp(1j * (t + math.pi / n))])


def conformal_identity_residual(f, z, zeta_grid=None, quad: BergmanProjection = BergmanProjection()) -> float:
    """``max |P(f)(phi_z(zeta)) phi_z'(zeta) - P((f o phi_z) phi_z')(zeta)|`` over ``zeta_grid``."""
    fn = _evaluator(f)
    z = complex(as_complex(z))
    if abs(z) >= 1.0:
        raise ValueError("z must lie in the open disk")
    zg = default_zeta_grid() if zeta_grid is None else np.atleast_1d(as_complex(zeta_grid))
    zeta, w = quad.nodes()
    lhs = quad.apply(np.asarray(fn(zeta), dtype=complex), zeta, w, mobius_apply(z, zg)) * mobius_derivative(z, zg)
    pulled = np.asarray(fn(mobius_apply(z, zeta)), dtype=complex) * mobius_derivative(z, zeta)
    rhs = quad.apply(pulled, zeta, w, zg)
    return float(np.max(np.abs(lhs - rhs)))


def residual_trace(f, z, zeta_grid=None, levels: Sequence[int] = (0, 1, 2, 3)) -> list[tuple[int, float]]:
    return [(int(L), conformal_identity_residual(f, z, zeta_grid, BergmanProjection(int(L)))) for L in levels]


def residual_halves(trace, floor: float = ROUNDOFF_FLOOR) -> bool:
    """Each refinement at least halves the residual, unless both are below ``floor``."""
    vals = [r for _, r in trace]
    return all(b <= 0.5 * a or max(a, b) <= floor for a, b in zip(vals, vals[1:]))


@dataclass
class CesaroMatrix:
    """Truncation of ``T_g`` to ``span{e_0..e_{N-1}}``, ``e_n = sqrt(n+1) z^n``.

    With ``<z^a, z^b> = delta_ab / (a+1)`` and ``g' = sum b_m z^m`` the
    ``(k, n)`` entry is ``b_{k-n-1} sqrt(n+1) / (k sqrt(k+1))`` for
    ``k >= n+1`` and 0 otherwise.
    """

    g: AnalyticFunction
    N: int
    entries: np.ndarray

    def apply_monomial(self, c) -> np.ndarray:
        """``T_g`` on monomial coefficients ``c`` (length ``N``), truncated to degree ``N-1``."""
        c = np.asarray(c, dtype=complex)
        root = np.sqrt(np.arange(self.N) + 1.0)
        return (self.entries @ (c / root)) * root


def cesaro_matrix(g: AnalyticFunction, N: int) -> CesaroMatrix:
    if N < 1:
        raise ValueError("N must be positive")
    b = np.asarray(g.deriv_coefficients(N), dtype=complex)[:N]
    if np.all(b.imag == 0):
        b = b.real
    k = np.arange(N)[:, None]
    n = np.arange(N)[None, :]
    m = k - n - 1
    lower = m >= 0
    bm = np.where(lower, b[np.clip(m, 0, N - 1)], 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.sqrt(n + 1.0) / (k * np.sqrt(k + 1.0))
        entries = np.where(lower, bm * coef, 0.0)
    return CesaroMatrix(g, N, entries)


def antiderivative_product(c, b, N: int) -> np.ndarray:
    """Monomial coefficients of ``int_0^z f g'`` up to degree ``N-1`` by direct convolution."""
    c = np.asarray(c, dtype=complex)
    prod = np.convolve(c, np.asarray(b, dtype=complex)[:N])[: N - 1]
    out = np.zeros(N, dtype=complex)
    out[1:] = prod / np.arange(1, N)
    return out


@dataclass
class SpectrumReport:
    method: str
    p: float | None
    radius: float
    trace: list = field(default_factory=list)
    xi_grid: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    levels: dict = field(default_factory=dict)
    status: str = "ok"
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.radius >= 0:
            raise ValueError("radius must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)


def _triangular_eigenvalues(a: np.ndarray) -> np.ndarray | None:
    if np.all(np.triu(a, 1) == 0) or np.all(np.tril(a, -1) == 0):
        return np.diag(a).astype(complex)
    return None


def gelfand_trace(a: np.ndarray, max_power: int = 64) -> list[tuple[int, float]]:
    """``||M^k||_2^{1/k}`` for ``k = 1, 2, 4, ...`` (stops once ``M^k`` vanishes)."""
    out = []
    k, pk = 1, np.array(a, dtype=complex)
    while k <= max_power:
        nrm = float(np.linalg.norm(pk, 2))
        out.append((k, nrm ** (1.0 / k) if nrm > 0 else 0.0))
        if nrm == 0:
            break
        pk = pk @ pk
        k *= 2
    return out


def matrix_radius(a: np.ndarray) -> tuple[float, str]:
    ev = _triangular_eigenvalues(a)
    if ev is None:
        try:
            ev = np.linalg.eigvals(a)
        except np.linalg.LinAlgError as exc:
            return math.nan, f"eigensolver failed: {exc}"
    return float(np.max(np.abs(ev))) if ev.size else 0.0, "ok"


def truncation_spectral_radius(M: CesaroMatrix, doublings: int = 3) -> SpectrumReport:
    """Largest eigenvalue modulus of the truncation at ``N, 2N, ...``.

    A heuristic cross-check: truncations of a non-normal operator need not
    see its spectrum. Triangular matrices have their eigenvalues read off
    the diagonal exactly.
    """
    if M.N < MIN_TRUNCATION:
        raise ValueError(f"N must be at least {MIN_TRUNCATION}")
    trace, gel, status = [], [], "ok"
    for i in range(doublings + 1):
        N = M.N * 2 ** i
        mat = M.entries if i == 0 else cesaro_matrix(M.g, N).entries
        rad, st = matrix_radius(mat)
        if st != "ok":
            status = st
        trace.append((N, rad))
        gel.append((N, gelfand_trace(mat)))
    radius = trace[0][1]
    return SpectrumReport(
        "MatrixTruncation",
        None,
        radius if np.isfinite(radius) else 0.0,
        trace=trace,
        levels={"N": M.N, "doublings": doublings},
        status=status,
        diagnostics={"gelfand": gel, "g": M.g.params()},
    )


def xi_grid(count: int) -> np.ndarray:
    return np.exp(2j * math.pi * np.arange(count) / count)


class _HarmonicScan:
    """``g`` cached at the tiling nodes; ``log w = Re(c g)`` per ``(lambda, xi)``."""

    def __init__(self, g: AnalyticFunction, max_level: int, quad: BoxQuadrature, shifts):
        self.max_level = max_level
        depth = max_level + quad.radial_levels
        self.tilings = [cached_tiling(Arc.full(), depth, quad, s) for s in shifts]
        self.values = [[np.asarray(g.eval(t.nodes(n)), dtype=complex) for n in range(depth + 1)] for t in self.tilings]

    def passes(self, c: complex, growth: float = B2_GROWTH_THRESHOLD) -> bool:
        best = np.full(self.max_level + 1, -math.inf)
        for tiling, vals in zip(self.tilings, self.values):
            rows = [np.real(c * v) for v in vals]
            per, _, div, _ = scan_log_rows(tiling, rows, self.max_level)
            if div:
                return False
            best = np.maximum(best, per)
        cum = np.maximum.accumulate(best)
        if len(cum) < 2:
            return bool(np.isfinite(cum[-1]))
        return bool(np.isfinite(cum[-1]) and math.exp(cum[-1] - cum[-2]) <= growth)


def spectral_radius_b2(
    g: AnalyticFunction,
    p: float = 2.0,
    xi_count: int = 64,
    tol: float = 0.01,
    max_level: int = 8,
    quad: BoxQuadrature = DEFAULT_SCAN_QUAD,
    shifts: Sequence[float] = DEFAULT_SHIFTS,
) -> SpectrumReport:
    """``inf {lambda > 0 : exp(p Re(g / (lambda xi))) in B2 for all xi}`` by
    bisection; each ``lambda`` is tested on a uniform ``xi`` grid through 1
    and fails at the first failing ``xi``."""
    if not p > 0:
        raise ValueError("p must be positive")
    if xi_count < 16:
        raise ValueError("xi_count must be at least 16")
    scan = _HarmonicScan(g, max_level, quad, tuple(shifts))
    xis = xi_grid(xi_count)
    failing: dict = {}

    def predicate(lam: float) -> bool:
        for xi in xis:
            if not scan.passes(p * np.conj(xi) / lam):
                failing[lam] = [xi.real, xi.imag]
                return False
        return True

    rep = gamma(None, tol=tol, max_level=max_level, predicate=predicate)
    status = "ok" if rep.status == "ok" else "inconclusive"
    return SpectrumReport(
        "B2Criterion",
        float(p),
        rep.value if np.isfinite(rep.value) else 0.0 if status == "ok" else math.inf,
        trace=[(t, ok, failing.get(t)) for t, ok in rep.trace],
        xi_grid=[[x.real, x.imag] for x in xis],
        levels={"max_level": max_level, "quadrature": quad.to_dict(), "shifts": list(shifts), "tol": tol},
        status=status,
        diagnostics={"lambda_lo": rep.t_lo, "lambda_hi": rep.t_hi, "g": g.params()},
    )


DEFAULT_EPS_GRID = (0.125, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 6.0, 8.0)


def spectral_radius_eps(
    g: AnalyticFunction,
    pair_budget: int = 10_000,
    eps_grid: Sequence[float] = DEFAULT_EPS_GRID,
    seed: int = 0,
    convention: MetricConvention | str = MetricConvention.PAPER_SQUARED,
) -> SpectrumReport:
    """Smallest grid ``eps`` whose ``C(eps)`` in ``|g(z) - g(zeta)| <= C(eps) + eps beta``
    is stable under budget doubling; 0 when the smallest grid value is
    already stable. Reported next to the B2 radius without a fixed ratio."""
    grid = sorted(float(e) for e in eps_grid)
    if not grid or grid[0] <= 0:
        raise ValueError("eps_grid must hold positive values")
    trace = []
    radius, status = None, "ok"
    for eps in grid:
        st = epsilon_stability(g, eps, pair_budget, seed, convention)
        trace.append(st.to_dict())
        if st.stable:
            radius = eps
            break
    if radius is None:
        radius, status = math.inf, "inconclusive"
    elif radius == grid[0]:
        radius = 0.0
    return SpectrumReport(
        "EpsilonCriterion",
        None,
        radius,
        trace=trace,
        seeds=[seed],
        levels={"pair_budget": pair_budget, "eps_grid": grid, "convention": MetricConvention.parse(convention).value},
        status=status,
        diagnostics={"smallest_stable": None if not np.isfinite(radius) else (grid[0] if radius == 0 else radius), "g": g.params()},
    )
