"""Pair-sampling estimators: hyperbolic oscillation, the epsilon-condition,
disc BMO norms, and John-Nirenberg tail profiles."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from ..bloch.functions import AnalyticFunction
from ..carleson import CarlesonSquare
from ..geometry import MetricConvention, hyperbolic_distance
from .families import Weight

N_RAYS = 16
N_EXTREMAL = 64
N_REFINE = 16
STABILITY_FRACTION = 0.1


def _value_fn(f) -> Callable:
    """Values whose pairwise differences are measured: log w, g, or a callable."""
    if isinstance(f, Weight):
        return f.log_eval
    if isinstance(f, AnalyticFunction):
        return f.eval
    if callable(f):
        return f
    raise TypeError(f"cannot evaluate {type(f).__name__}")


def _support(f) -> float:
    return float(getattr(f, "support_radius", 1.0))


def boundary_depth(budget: int) -> float:
    """Decades of ``1 - |z|`` explored by boundary-clustered samples; grows with the budget."""
    return float(np.clip(3.0 + 1.5 * math.log2(max(budget, 1) / 1000.0), 2.0, 13.0))


def sobol_disc(n: int, seed: int, r_max: float = 1.0) -> np.ndarray:
    """Scrambled Sobol points, area-uniform in the disc of radius ``r_max``."""
    m = max(1, math.ceil(math.log2(max(n, 2))))
    u = qmc.Sobol(d=2, scramble=True, seed=seed).random_base2(m)[:n]
    r = np.sqrt(u[:, 0]) * r_max
    return r * np.exp(2j * math.pi * u[:, 1])


@dataclass
class PairSample:
    z: np.ndarray
    zeta: np.ndarray
    budget: int
    seed: int
    depth: float
    r_max: float

    def __len__(self):
        return len(self.z)


def _clip_radius(s, r_max):
    return 1.0 - np.maximum(s, 1.0 - r_max) if r_max < 1.0 else 1.0 - s


def sample_pairs(budget: int, seed: int, values: Callable | None = None, r_max: float = 1.0) -> PairSample:
    """Quasi-random pairs mixing area-uniform, boundary-clustered, radial,
    tangential and extremal-value pairs.

    With ``values`` given, all pairs among the points with the largest and
    smallest values are added, which is where oscillation suprema live.
    """
    if budget < 4 * N_RAYS:
        raise ValueError("pair budget too small")
    rng = np.random.default_rng(seed)
    U = boundary_depth(budget)
    q = budget // 4
    zs, zetas = [], []
    # area-uniform
    a = sobol_disc(q, seed, r_max=min(r_max, 1.0 - 1e-15))
    zs.append(a)
    zetas.append(a[rng.permutation(q)])
    zs.append(np.zeros(q // 4, dtype=complex))
    zetas.append(a[: q // 4])
    # boundary-clustered, far and near partners
    s = 10.0 ** (-U * rng.random(q))
    th = 2 * math.pi * rng.random(q)
    b = _clip_radius(s, r_max) * np.exp(1j * th)
    zs.append(b)
    zetas.append(b[rng.permutation(q)])
    s2 = s * 10.0 ** rng.uniform(-1.0, 1.0, q)
    th2 = th + s * rng.normal(size=q) * 4.0
    zs.append(b)
    zetas.append(_clip_radius(np.minimum(s2, 1.0), r_max) * np.exp(1j * th2))
    # rays: radial, origin and tangential pairs
    per_ray = max(4, q // (3 * N_RAYS))
    sr = 10.0 ** (-U * np.linspace(0.0, 1.0, per_ray))
    rr = _clip_radius(sr, r_max)
    for k in range(N_RAYS):
        e = np.exp(2j * math.pi * k / N_RAYS)
        e2 = np.exp(2j * math.pi * (k + 1) / N_RAYS)
        ray = rr * e
        zs += [ray[1:], np.zeros(per_ray, dtype=complex), ray]
        zetas += [ray[:-1], ray, rr * e2]
    z = np.concatenate(zs)
    zeta = np.concatenate(zetas)
    if values is not None:
        pts = np.concatenate([a, b] + [rr * np.exp(2j * math.pi * k / N_RAYS) for k in range(N_RAYS)])
        v = np.asarray(values(pts))
        comps = [v.real, v.imag] if np.iscomplexobj(v) else [v]
        idx = []
        for c in comps:
            order = np.argsort(c, kind="stable")
            idx.append(order[: N_EXTREMAL // 2])
            idx.append(order[-(N_EXTREMAL // 2):])
        ext = pts[np.unique(np.concatenate(idx))]
        i, j = np.triu_indices(len(ext), k=1)
        z = np.concatenate([z, ext[i]])
        zeta = np.concatenate([zeta, ext[j]])
    return PairSample(z, zeta, budget, seed, U, r_max)


def _pair_data(f, budget, seed, convention):
    fn = _value_fn(f)
    pairs = sample_pairs(budget, seed, values=fn, r_max=_support(f))
    dv = np.abs(np.asarray(fn(pairs.z)) - np.asarray(fn(pairs.zeta)))
    beta = np.asarray(hyperbolic_distance(pairs.z, pairs.zeta, convention), dtype=float)
    return dv, beta, pairs


def _refined_max(f, budget, seed, convention, score) -> float:
    """Largest ``score(|df|, beta)`` over sampled pairs, polished by local
    Nelder-Mead searches from the best pairs.

    Searches keep ``1 - |z| >= 10**-U`` with ``U`` the sampler depth, so a
    score unbounded toward the boundary still grows with the budget.
    """
    fn = _value_fn(f)
    dv, beta, pairs = _pair_data(f, budget, seed, convention)
    vals = score(dv, beta)
    best = float(np.max(vals))
    r_max = pairs.r_max
    t_max = pairs.depth if r_max >= 1.0 else min(pairs.depth, -math.log10(1.0 - r_max))

    def unpack(x):
        t = np.clip(x[[0, 2]], 0.0, t_max)
        p = (1.0 - 10.0 ** -t) * np.exp(1j * x[[1, 3]])
        return p[0], p[1]

    def neg(x):
        z, zeta = unpack(x)
        d = abs(complex(np.asarray(fn(np.array([z])))[0]) - complex(np.asarray(fn(np.array([zeta])))[0]))
        b = float(hyperbolic_distance(z, zeta, convention))
        return -float(score(np.array([d]), np.array([b]))[0])

    order = np.argsort(vals, kind="stable")[::-1][:N_REFINE]
    for i in order:
        z0, z1 = pairs.z[i], pairs.zeta[i]
        x0 = []
        for p in (z0, z1):
            s = max(1.0 - abs(p), 10.0 ** -t_max)
            x0 += [-math.log10(s), float(np.angle(p))]
        res = minimize(neg, np.array(x0), method="Nelder-Mead", options={"maxiter": 200, "xatol": 1e-6, "fatol": 1e-9})
        best = max(best, -float(res.fun))
    return best


def oscillation_constant(
    w, pair_budget: int = 10_000, seed: int = 0, convention: MetricConvention | str = MetricConvention.PAPER_SQUARED
) -> float:
    """Least ``C`` with ``|log w(z) - log w(zeta)| <= C (1 + beta(z, zeta))`` on the sampled pairs."""
    if pair_budget < 1000:
        raise ValueError("pair_budget must be at least 1000")
    return _refined_max(w, pair_budget, seed, convention, lambda d, b: d / (1.0 + b))


def epsilon_condition(
    w, eps: float, pair_budget: int = 10_000, seed: int = 0, convention: MetricConvention | str = MetricConvention.PAPER_SQUARED
) -> float:
    """``max(|log w(z) - log w(zeta)| - eps beta(z, zeta))`` over sampled pairs (at least 0)."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return max(0.0, _refined_max(w, pair_budget, seed, convention, lambda d, b: d - eps * b))


@dataclass
class EpsilonStability:
    eps: float
    budgets: list
    constants: list
    stable: bool
    max_beta: float

    def to_dict(self):
        return asdict(self)


def epsilon_stability(
    w, eps: float, pair_budget: int = 10_000, seed: int = 0, convention: MetricConvention | str = MetricConvention.PAPER_SQUARED
) -> EpsilonStability:
    """``C(eps)`` at ``pair_budget`` and twice that; stable when the change is
    below ``0.1 max(|C|, 1)``. Doubling the budget also pushes the samples
    closer to the boundary, so an unbounded ``C(eps)`` shows up as growth."""
    c1 = epsilon_condition(w, eps, pair_budget, seed, convention)
    c2 = epsilon_condition(w, eps, 2 * pair_budget, seed, convention)
    _, beta, _ = _pair_data(w, 2 * pair_budget, seed, convention)
    stable = abs(c2 - c1) < STABILITY_FRACTION * max(abs(c1), 1.0)
    return EpsilonStability(eps, [pair_budget, 2 * pair_budget], [c1, c2], bool(stable), float(beta.max()))


def bmo_disc_norm(f, disc_budget: int = 200, samples_per_disc: int = 400, seed: int = 0) -> float:
    """Largest sampled mean oscillation of ``f`` over ``D cap disc``.

    Centers are area-uniform Sobol points and radii are log-uniform in
    ``[(1 - |c|)/8, 2]``; the result is a lower bound for the BMO norm.
    """
    if disc_budget < 100 or samples_per_disc < 100:
        raise ValueError("budgets must be at least 100")
    fn = _value_fn(f)
    rng = np.random.default_rng(seed)
    centers = sobol_disc(disc_budget, seed, r_max=0.999)
    lo = np.log((1.0 - np.abs(centers)) / 8.0)
    radii = np.exp(lo + (math.log(2.0) - lo) * rng.random(disc_budget))
    best = 0.0
    for c, rho in zip(centers, radii):
        pts = np.empty(0, dtype=complex)
        tries = 0
        while pts.size < samples_per_disc and tries < 20:
            k = 4 * samples_per_disc
            p = c + rho * np.sqrt(rng.random(k)) * np.exp(2j * math.pi * rng.random(k))
            pts = np.concatenate([pts, p[np.abs(p) < 1.0]])
            tries += 1
        pts = pts[:samples_per_disc]
        if pts.size < 2:
            continue
        v = np.real(np.asarray(fn(pts)))
        best = max(best, float(np.mean(np.abs(v - v.mean()))))
    return best


@dataclass
class JNProfile:
    square: dict
    lambda_grid: list
    tail_fraction: list
    eps_fit: float
    std_error: float
    mean_log: float
    mc_samples: int
    seed: int
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def sample_square(Q: CarlesonSquare, n: int, seed: int) -> np.ndarray:
    """Area-uniform points of the Carleson square ``Q``."""
    rng = np.random.default_rng(seed)
    lo = (1.0 - Q.m) ** 2
    r = np.sqrt(lo + (1.0 - lo) * rng.random(n))
    th = Q.arc.start + Q.arc.width * rng.random(n)
    return r * np.exp(1j * th)


def jn_profile(w: Weight, Q: CarlesonSquare, lambda_grid, mc_samples: int = 100_000, seed: int = 0) -> JNProfile:
    """Monte Carlo tail fractions ``A({|log w - (log w)_Q| > lambda}) / A(Q)``.

    ``eps_fit`` is minus the least-squares slope of ``log tail`` against
    ``lambda`` over the nonzero tails.
    """
    if mc_samples < 10_000:
        raise ValueError("mc_samples must be at least 1e4")
    lam = np.asarray(lambda_grid, dtype=float)
    v = w.log_eval(sample_square(Q, mc_samples, seed))
    mean = float(v.mean())
    dev = np.abs(v - mean)
    tails = np.array([np.mean(dev > l) for l in lam])
    nz = tails > 0
    eps_fit = math.nan
    if nz.sum() >= 2:
        slope = np.polyfit(lam[nz], np.log(tails[nz]), 1)[0]
        eps_fit = float(-slope)
    return JNProfile(
        square=Q.to_dict(),
        lambda_grid=lam.tolist(),
        tail_fraction=tails.tolist(),
        eps_fit=eps_fit,
        std_error=1.0 / math.sqrt(mc_samples),
        mean_log=mean,
        mc_samples=mc_samples,
        seed=seed,
    )


def jn_bound(characteristic_sq: float, lam) -> np.ndarray:
    """``2 e^2 [w]^2 e^{-lambda}`` with ``[w]^2`` the B2 characteristic."""
    return 2.0 * math.e ** 2 * characteristic_sq * np.exp(-np.asarray(lam, dtype=float))


def jn_lambda_grid(characteristic_sq: float, count: int = 6) -> np.ndarray:
    """``count`` values spanning ``[2 + log[w] + 0.5, 2 + log[w] + 4]``."""
    base = 2.0 + 0.5 * math.log(characteristic_sq)
    return np.linspace(base + 0.5, base + 4.0, count)


def jn_check(profile: JNProfile, characteristic_sq: float, sigmas: float = 3.0) -> list[bool]:
    """Tail fraction at most the bound plus ``sigmas`` Monte Carlo standard errors, per lambda."""
    if not math.isfinite(characteristic_sq):
        raise ValueError("the bound needs a finite B2 characteristic")
    bound = jn_bound(characteristic_sq, profile.lambda_grid)
    tails = np.asarray(profile.tail_fraction)
    return [bool(t <= b + sigmas * profile.std_error) for t, b in zip(tails, bound)]
