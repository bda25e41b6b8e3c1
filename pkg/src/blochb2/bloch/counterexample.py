"""The super-lacunary Bloch function with unit coefficients and its diagnostics:
annuli ``A_k(M)``, floors of ``(1-|z|^2)|z||g'(z)|`` on ``A_j(2)``, sups off
the annuli, and the truncated area function over a Stolz angle."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import qmc

from ..geometry import DEFAULT_STOLZ_APERTURE
from .functions import AnalyticFunction, Lacunary, check_superlacunary, factorial_exponents, superlacunary_exponents
from .seminorm import GridSpec, bloch_quantity

MAX_TERMS = 25


def build_counterexample(sequence_spec="factorial", K: int = 10) -> Lacunary:
    """``sum_{k<=K} z^{n_k}`` for ``n_k = k!`` (``factorial``), the
    ``superlacunary`` sequence, or an explicit exponent list."""
    if not (1 <= K <= MAX_TERMS):
        raise ValueError(f"K must lie in [1, {MAX_TERMS}]")
    if isinstance(sequence_spec, str):
        if sequence_spec == "factorial":
            n = factorial_exponents(K)
        elif sequence_spec == "superlacunary":
            n = superlacunary_exponents(K)
        else:
            raise ValueError(f"unknown sequence spec {sequence_spec!r}")
        label = sequence_spec
    else:
        n = np.asarray(sequence_spec, dtype=np.int64)[:K]
        label = "custom"
    if len(n) >= 3:
        check_superlacunary(n)
    return Lacunary(np.ones(len(n)), n, label=label)


@dataclass(frozen=True)
class AnnulusFamily:
    """``A_k(M) = {1/(M n_k) <= 1 - |z| <= M/n_k}``."""

    M: float
    n: tuple

    def __post_init__(self):
        if not self.M > 1:
            raise ValueError("M must exceed 1")

    @classmethod
    def of(cls, g: Lacunary, M: float) -> "AnnulusFamily":
        return cls(float(M), tuple(int(x) for x in g.n))

    def bounds(self, k: int) -> tuple[float, float]:
        """Gap range ``(lo, hi)`` of ``A_k`` (1-based ``k``)."""
        nk = self.n[k - 1]
        return 1.0 / (self.M * nk), min(self.M / nk, 1.0)

    def proper(self, k: int) -> bool:
        """The annulus stays away from the origin (``M / n_k < 1``)."""
        return self.M / self.n[k - 1] < 1.0

    def pairwise_disjoint(self, start: int = 1) -> bool:
        for k in range(start, len(self.n)):
            if self.bounds(k)[0] <= self.bounds(k + 1)[1]:
                return False
        return True

    def member(self, z) -> np.ndarray:
        s = 1.0 - np.abs(np.asarray(z, dtype=complex))
        out = np.zeros(np.shape(s), dtype=bool)
        for k in range(1, len(self.n) + 1):
            lo, hi = self.bounds(k)
            out |= (s >= lo) & (s <= hi)
        return out


def annulus_samples(n_j: int, samples: int, seed: int = 0) -> np.ndarray:
    """Area-uniform scrambled-Sobol points of ``A_j(2)``."""
    r_lo = max(0.0, 1.0 - 2.0 / n_j)
    r_hi = 1.0 - 1.0 / (2.0 * n_j)
    m = max(1, math.ceil(math.log2(samples)))
    u = qmc.Sobol(d=2, scramble=True, seed=seed).random_base2(m)[:samples]
    r = np.sqrt(r_lo ** 2 + (r_hi ** 2 - r_lo ** 2) * u[:, 0])
    return r * np.exp(2j * math.pi * u[:, 1])


@dataclass
class AnnulusFloor:
    j: int
    n_j: int
    floor: float
    lower_correction: float
    upper_correction: float
    samples: int


def annulus_diagnostics(g: Lacunary, j: int, samples: int = 10_000, seed: int = 0) -> AnnulusFloor:
    """Sampled floor of ``(1-|z|^2)|z||g'(z)|`` on ``A_j(2)`` and the two
    correction terms: ``(4/n_j) sum_{k<j} |a_k| n_k`` from the lower
    frequencies and ``sum_{k>j} |a_k| (4 n_k/n_j) e^{-n_k/(2 n_j)}`` from
    the higher ones."""
    if not (1 <= j <= g.K):
        raise ValueError(f"j must lie in [1, {g.K}]")
    if samples < 1000:
        raise ValueError("at least 1e3 samples are required")
    n = g.n.astype(float)
    a = np.abs(g.scale * g.a)
    nj = n[j - 1]
    z = annulus_samples(int(nj), samples, seed)
    vals = (1.0 - np.abs(z) ** 2) * np.abs(g.z_deriv(z))
    lower = 4.0 / nj * float(np.sum(a[: j - 1] * n[: j - 1]))
    hi = n[j:]
    upper = float(np.sum(a[j:] * 4.0 * hi / nj * np.exp(-hi / (2.0 * nj))))
    return AnnulusFloor(j, int(nj), float(vals.min()), lower, upper, samples)


def annulus_floor(g: Lacunary, j: int, samples: int = 10_000, seed: int = 0) -> float:
    return annulus_diagnostics(g, j, samples, seed).floor


def off_annuli_sup(g: AnalyticFunction, M: float, grid: GridSpec = GridSpec(levels=30)) -> float:
    """Grid sup of ``(1-|z|^2)|g'(z)|`` outside ``A(M)``.

    For a non-lacunary ``g`` there are no annuli and this is the grid
    Bloch seminorm. When ``A(M)`` covers the whole grid the value is 0 and a
    warning is issued.
    """
    fam = AnnulusFamily.of(g, M) if isinstance(g, Lacunary) else None
    best, seen = 0.0, False
    for _, pts in grid.circles():
        if fam is not None:
            pts = pts[~fam.member(pts)]
        if pts.size == 0:
            continue
        seen = True
        best = max(best, float(np.max(bloch_quantity(g, pts))))
    if not seen:
        warnings.warn(f"A({M}) covers the whole grid; off-annuli sup reported as 0", RuntimeWarning)
    return best


def stolz_half_width(s, aperture: float = DEFAULT_STOLZ_APERTURE) -> np.ndarray:
    """Angular half-width of the Stolz angle at ``1 - |z| = s``."""
    s = np.asarray(s, dtype=float)
    r = 1.0 - s
    with np.errstate(divide="ignore"):
        h = (aperture ** 2 - 1.0) * s * s / (2.0 * r)
    return np.where(h >= 2.0, math.pi, 2.0 * np.arcsin(np.sqrt(np.minimum(h, 2.0) / 2.0)))


def _area_panels(delta: float, g: AnalyticFunction) -> np.ndarray:
    """Panel breakpoints in ``s``: a fixed half-octave ladder plus annulus edges, cut at ``delta``."""
    ladder = 2.0 ** (-np.arange(0, 2 * 60) / 2.0)
    pts = [ladder]
    if isinstance(g, Lacunary):
        n = g.n.astype(float)
        pts += [1.0 / (2.0 * n), 2.0 / n]
    b = np.unique(np.concatenate(pts + [[delta, 1.0]]))
    return b[(b >= delta) & (b <= 1.0)]


def area_function_truncated(
    g: AnalyticFunction,
    eps: float,
    xi: complex = 1.0,
    delta: float = 1e-3,
    radial_nodes: int = 8,
    angular_nodes: int = 64,
    aperture: float = DEFAULT_STOLZ_APERTURE,
) -> float:
    """``sqrt( int_{Gamma(xi) cap K(eps,g), 1-|z| >= delta} dA / (1-|z|^2)^2 )``.

    Panels follow the annulus edges of ``g`` so the indicator of
    ``K(eps, g)`` jumps at panel boundaries where possible. Panels above
    ``delta`` do not depend on ``delta``, so the value is monotone in it.
    """
    if not (0.0 < delta < 0.25):
        raise ValueError("delta must lie in (0, 1/4)")
    xi = complex(xi)
    phi0 = math.atan2(xi.imag, xi.real)
    xs, xw = np.polynomial.legendre.leggauss(radial_nodes)
    ts, tw = np.polynomial.legendre.leggauss(angular_nodes)
    b = _area_panels(delta, g)
    total = 0.0
    for lo, hi in zip(b[:-1], b[1:]):
        # Gauss in log s
        a0, a1 = math.log(lo), math.log(hi)
        u = 0.5 * (a1 - a0) * xs + 0.5 * (a1 + a0)
        s = np.exp(u)
        ws = 0.5 * (a1 - a0) * xw * s
        r = 1.0 - s
        hw = stolz_half_width(s, aperture)
        theta = phi0 + hw[:, None] * ts[None, :]
        z = r[:, None] * np.exp(1j * theta)
        ind = bloch_quantity(g, z) > eps
        one_m = s * (2.0 - s)
        dens = r / (math.pi * one_m * one_m)
        total += float(np.sum(ws[:, None] * hw[:, None] * tw[None, :] * dens[:, None] * ind))
    return math.sqrt(total)


@dataclass
class CounterexampleReport:
    spec: str
    K: int
    a: list
    n: list
    floors: list = field(default_factory=list)
    off_annuli: list = field(default_factory=list)
    area_function: list = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def counterexample_report(
    spec: str = "factorial",
    K: int = 10,
    floor_js=(6, 7, 8, 9),
    samples: int = 10_000,
    M_values=(3.0, 5.0, 8.0),
    area_eps: float | None = None,
    delta0: float = 1e-3,
    halvings: int = 6,
    seed: int = 0,
    grid: GridSpec = GridSpec(levels=30),
) -> CounterexampleReport:
    """Diagnostics of the counterexample. ``area_eps`` defaults to half the
    smallest measured floor."""
    g = build_counterexample(spec, K)
    floors = [annulus_diagnostics(g, j, samples, seed) for j in floor_js if j <= g.K]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        off = [(float(M), off_annuli_sup(g, M, grid)) for M in M_values]
    if area_eps is None:
        area_eps = 0.5 * min(f.floor for f in floors) if floors else 0.01
    deltas = [delta0 * 2.0 ** -i for i in range(halvings + 1)]
    area = [(d, area_function_truncated(g, area_eps, 1.0, d)) for d in deltas]
    return CounterexampleReport(
        spec=spec,
        K=K,
        a=np.real(g.a).tolist(),
        n=g.n.tolist(),
        floors=[asdict(f) for f in floors],
        off_annuli=off,
        area_function=area,
        settings={"samples": samples, "seed": seed, "area_eps": area_eps, "grid": grid.to_dict(), "aperture": DEFAULT_STOLZ_APERTURE},
    )
