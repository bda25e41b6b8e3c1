"""Hyperbolic nets, McShane extension, and the decomposition ``f = u + v``
into a bounded part and a hyperbolic-Lipschitz part.

Lipschitz constructions use the standard hyperbolic metric: the McShane
formula needs a genuine metric, and the squared-modulus variant fails the
triangle inequality.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import qmc

from .geometry import MetricConvention, hyperbolic_distance
from .weights.b2 import GammaReport, gamma
from .weights.families import Weight
from .weights.oscillation import _value_fn, bmo_disc_norm, epsilon_condition, sample_pairs

STD = MetricConvention.STANDARD
CHUNK = 4096


class LipschitzViolation(ValueError):
    def __init__(self, i: int, j: int, gap: float):
        super().__init__(f"net values at points {i} and {j} violate the Lipschitz bound by {gap:.3e}")
        self.i, self.j, self.gap = i, j, gap


def two_sum(a, b):
    """``(s, e)`` with ``s = fl(a + b)`` and ``a + b = s + e`` exactly."""
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@dataclass
class HyperbolicNet:
    points: np.ndarray
    separation: float
    covering: float
    r_max: float
    seed: int
    candidates: int
    probes: int

    def __len__(self):
        return len(self.points)

    def min_separation(self) -> float:
        if len(self.points) < 2:
            return math.inf
        i, j = np.triu_indices(len(self.points), k=1)
        return float(np.min(hyperbolic_distance(self.points[i], self.points[j], STD)))

    def nearest_distance(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        out = np.empty(z.shape, dtype=float)
        for a in range(0, z.size, CHUNK):
            blk = z[a : a + CHUNK]
            d = hyperbolic_distance(blk[:, None], self.points[None, :], STD)
            out[a : a + CHUNK] = d.min(axis=1)
        return out

    def to_dict(self):
        return {
            "points": [[p.real, p.imag] for p in self.points],
            "separation": self.separation,
            "covering": self.covering,
            "r_max": self.r_max,
            "seed": self.seed,
            "candidates": self.candidates,
            "probes": self.probes,
        }

    @classmethod
    def from_dict(cls, d):
        pts = np.array([complex(a, b) for a, b in d["points"]])
        return cls(pts, d["separation"], d["covering"], d["r_max"], d["seed"], d["candidates"], d["probes"])


def hyperbolic_area_points(n: int, r_max: float, seed: int) -> np.ndarray:
    """Scrambled Sobol points with density ``dA / (1-|z|^2)^2`` on ``|z| <= r_max``."""
    c = r_max ** 2 / (1.0 - r_max ** 2)
    m = max(1, math.ceil(math.log2(max(n, 2))))
    u = qmc.Sobol(d=2, scramble=True, seed=seed).random_base2(m)[:n]
    v = u[:, 0] * c
    r = np.sqrt(v / (1.0 + v))
    return r * np.exp(2j * math.pi * u[:, 1])


def build_net(separation: float, r_max: float, seed: int = 0, candidates: int | None = None, probes: int | None = None) -> HyperbolicNet:
    """Greedy ``separation``-separated net over a Sobol candidate stream.

    The covering radius is measured on an independent probe set; a warning
    is issued when it exceeds ``2 * separation``.
    """
    if not separation > 0:
        raise ValueError("separation must be positive")
    if not 0 < r_max < 1:
        raise ValueError("r_max must lie in (0, 1)")
    # candidates scale with the hyperbolic area over the area of a ball of radius separation/2
    harea = r_max ** 2 / (1.0 - r_max ** 2)
    ball = math.sinh(min(separation, 30.0) / 2.0) ** 2
    if candidates is None:
        candidates = int(np.clip(40.0 * harea / ball, 2048, 200_000))
    if probes is None:
        probes = min(4 * candidates, 50_000)
    cand = hyperbolic_area_points(candidates, r_max, seed)
    cand = np.concatenate([[0.0 + 0.0j], cand])
    acc = np.empty(len(cand), dtype=complex)
    acc[0] = cand[0]
    k = 1
    for c in cand[1:]:
        d = hyperbolic_distance(c, acc[:k], STD)
        if np.all(d >= separation):
            acc[k] = c
            k += 1
    points = acc[:k].copy()
    net = HyperbolicNet(points, float(separation), math.nan, float(r_max), seed, candidates, probes)
    probe = hyperbolic_area_points(probes, r_max, seed + 7919)
    net.covering = float(net.nearest_distance(probe).max())
    if net.covering > 2.0 * separation:
        warnings.warn(
            f"probe covering radius {net.covering:.3f} exceeds twice the separation {separation}; "
            "the candidate mesh is too coarse",
            RuntimeWarning,
        )
    return net


class McShaneExtension:
    """``v(z) = min_j (values_j + L beta(z, z_j))`` over the net."""

    def __init__(self, net: HyperbolicNet, values, L: float, validate: bool = True):
        self.net = net
        self.values = np.asarray(values, dtype=float)
        self.L = float(L)
        if self.values.shape != net.points.shape:
            raise ValueError("one value per net point is required")
        if not self.L >= 0:
            raise ValueError("L must be nonnegative")
        if validate:
            self.validate()

    def validate(self) -> None:
        """Require ``values_j <= values_i + L beta(z_i, z_j)`` for all pairs, exactly."""
        p, v = self.net.points, self.values
        for a in range(0, len(p), CHUNK):
            d = hyperbolic_distance(p[a : a + CHUNK, None], p[None, :], STD)
            gap = v[None, :] - (v[a : a + CHUNK, None] + self.L * d)
            if np.any(gap > 0):
                i, j = np.unravel_index(int(np.argmax(gap)), gap.shape)
                raise LipschitzViolation(int(a + i), int(j), float(gap[i, j]))

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        flat = np.atleast_1d(z).ravel()
        out = np.empty(flat.shape, dtype=float)
        for a in range(0, flat.size, CHUNK):
            blk = flat[a : a + CHUNK]
            d = hyperbolic_distance(blk[:, None], self.net.points[None, :], STD)
            out[a : a + CHUNK] = np.min(self.values[None, :] + self.L * d, axis=1)
        return out.reshape(np.shape(z)) if np.ndim(z) else float(out[0])


def mcshane_extend(net: HyperbolicNet, values, L: float) -> McShaneExtension:
    return McShaneExtension(net, values, L)


@dataclass
class Decomposition:
    """``f = u + v`` with ``v`` hyperbolic-Lipschitz and ``u = f - v`` bounded on ``|z| <= r_max``."""

    f: object
    extension: McShaneExtension | None
    L: float
    eps: float
    eta: float
    C_eps: float
    u_sup: float = math.nan
    u_range: tuple = (math.nan, math.nan)
    v_lip: float = math.nan
    r_max: float = 0.0
    seed: int = 0
    probe_budget: int = 0
    source: str = "measured epsilon-condition constant"

    def v(self, z):
        z = np.asarray(z, dtype=complex)
        if self.extension is None:
            return np.zeros(np.shape(z)) if np.ndim(z) else 0.0
        return self.extension(z)

    def u(self, z):
        return self.u_exact(z)[0]

    def u_exact(self, z):
        """``u = f - v`` as an unevaluated sum ``hi + lo`` that is exact, so
        ``hi + lo + v == f`` holds without rounding."""
        f = np.asarray(_value_fn(self.f)(z), dtype=float)
        return two_sum(f, -np.asarray(self.v(z), dtype=float))

    def summary(self) -> dict:
        d = {
            "L": self.L,
            "eps": self.eps,
            "eta": self.eta,
            "C_eps": self.C_eps,
            "u_sup": self.u_sup,
            "u_range": list(self.u_range),
            "v_lip": self.v_lip,
            "r_max": self.r_max,
            "seed": self.seed,
            "probe_budget": self.probe_budget,
            "source": self.source,
            "metric": STD.value,
        }
        if self.extension is not None:
            d["net"] = self.extension.net.to_dict()
            d["values"] = self.extension.values.tolist()
        else:
            d["net"] = None
            d["values"] = []
        return d

    def to_json(self, path=None) -> str:
        text = json.dumps(self.summary(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, text: str, f) -> "Decomposition":
        d = json.loads(text)
        ext = None
        if d["net"] is not None:
            ext = McShaneExtension(HyperbolicNet.from_dict(d["net"]), d["values"], d["L"], validate=False)
        return cls(
            f, ext, d["L"], d["eps"], d["eta"], d["C_eps"], d["u_sup"], tuple(d["u_range"]), d["v_lip"],
            d["r_max"], d["seed"], d["probe_budget"], d["source"],
        )


def _probe_stats(dec: Decomposition, budget: int, seed: int) -> None:
    pairs = sample_pairs(budget, seed, r_max=dec.r_max)
    pts = np.concatenate([pairs.z, pairs.zeta])
    u = dec.u(pts)
    dec.u_sup = float(np.max(np.abs(u)))
    dec.u_range = (float(u.min()), float(u.max()))
    if dec.extension is None:
        dec.v_lip = 0.0
    else:
        dv = np.abs(dec.v(pairs.z) - dec.v(pairs.zeta))
        b = np.asarray(hyperbolic_distance(pairs.z, pairs.zeta, STD))
        ok = b > 0
        dec.v_lip = float(np.max(dv[ok] / b[ok])) if ok.any() else 0.0
    dec.probe_budget = budget


def decompose(
    f: Weight,
    eps: float,
    eta: float,
    gamma_cert: GammaReport | None = None,
    r_max: float = 0.99,
    seed: int = 0,
    pair_budget: int = 10_000,
    min_separation: float = 1.0,
) -> Decomposition:
    """Split ``f = u + v`` with ``v`` Lipschitz of constant ``L = 4 eps + eta``.

    ``C_eps`` is the measured epsilon-condition constant of ``f`` at level
    ``4 eps`` (standard metric); net points are ``max(C_eps/eta, min_separation)``
    apart so that ``f`` restricted to the net is ``L``-Lipschitz.
    ``gamma_cert`` must certify ``eps > gamma(f)``; ``gamma = 0`` gives ``v = 0``.
    """
    if gamma_cert is not None:
        if not math.isfinite(gamma_cert.value):
            raise ValueError("e^{f/t} is not in B2 for any tested t")
        if gamma_cert.value == 0.0:
            dec = Decomposition(f, None, 0.0, eps, eta, 0.0, r_max=r_max, seed=seed)
            _probe_stats(dec, pair_budget, seed)
            return dec
        if eps <= gamma_cert.t_hi - gamma_cert.tol - 1e-15 and eps < gamma_cert.value:
            raise ValueError(f"eps = {eps} is not above the certified gamma {gamma_cert.value}")
    if not eta > 0:
        raise ValueError("eta must be positive")
    L = 4.0 * eps + eta
    C_eps = epsilon_condition(f, 4.0 * eps, pair_budget, seed, STD)
    sep = max(C_eps / eta, min_separation)
    net = build_net(sep, r_max, seed)
    values = np.asarray(_value_fn(f)(net.points), dtype=float)
    ext = mcshane_extend(net, values, L)
    dec = Decomposition(f, ext, L, eps, eta, C_eps, r_max=r_max, seed=seed)
    _probe_stats(dec, pair_budget, seed)
    return dec


@dataclass
class SandwichResult:
    gamma_value: float
    dist_upper: float
    dist_lower: float
    sandwich_ok: bool
    status: str = "ok"
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def theorem1_sandwich(f: Weight, tol: float = 0.01, max_level: int = 8, r_max: float = 0.99, seed: int = 0, pair_budget: int = 10_000) -> SandwichResult:
    """``gamma``, the lower bound ``2 t_lo (1 - tol)`` and the upper bound
    ``v_lip`` from :func:`decompose` at ``eps = gamma (1 + tol)``; ok when
    ``dist_lower <= dist_upper <= 4 gamma (1 + 3 tol)``."""
    g = gamma(f, tol=tol, max_level=max_level)
    if g.status != "ok":
        return SandwichResult(g.value, math.inf, math.nan, False, "inconclusive", {"gamma": g.to_dict()})
    if g.value == 0.0:
        dec = decompose(f, 0.0, tol, g, r_max, seed, pair_budget)
        return SandwichResult(0.0, dec.v_lip, 0.0, True, "ok", {"gamma": g.to_dict(), "decomposition": dec.summary()})
    eps = g.value * (1.0 + tol)
    dec = decompose(f, eps, tol * g.value, g, r_max, seed, pair_budget)
    lower = 2.0 * g.t_lo * (1.0 - tol)
    upper = dec.v_lip
    ok = lower <= upper <= 4.0 * g.value * (1.0 + 3.0 * tol)
    details = {"gamma": g.to_dict(), "decomposition": {k: v for k, v in dec.summary().items() if k not in ("net", "values")}}
    return SandwichResult(g.value, upper, lower, bool(ok), "ok", details)


def s_norm_upper(f: Weight, eps_grid=(0.01, 0.05, 0.1, 0.25, 0.5, 1.0), tol: float = 0.01, max_level: int = 8, r_max: float = 0.99, seed: int = 0, pair_budget: int = 10_000):
    """``min (||u||_inf + ||v||_HLip)`` over decompositions at ``eps = gamma (1 + rho)``.

    ``eps_grid`` holds the relative offsets ``rho``. The constant in ``v``
    is free, so ``u`` is centered: its sup becomes half its range.
    Returns ``(value, table)``.
    """
    g = gamma(f, tol=tol, max_level=max_level)
    table = []
    if g.value == 0.0:
        dec = decompose(f, 0.0, tol, g, r_max, seed, pair_budget)
        table.append({"eps": 0.0, "u_sup": dec.u_sup, "v_lip": 0.0, "total": dec.u_sup})
        return dec.u_sup, table
    for rho in eps_grid:
        eps = g.value * (1.0 + rho)
        dec = decompose(f, eps, tol * g.value, g, r_max, seed, pair_budget)
        centered = 0.5 * (dec.u_range[1] - dec.u_range[0])
        table.append({"eps": eps, "u_sup": centered, "v_lip": dec.v_lip, "total": centered + dec.v_lip})
    best = min(row["total"] for row in table)
    return best, table


def reflect_extension(f):
    """``F(z) = f(z)`` on the disc and ``f(1/conj(z))`` outside."""
    fn = _value_fn(f)

    def F(z):
        z = np.asarray(z, dtype=complex)
        inside = np.abs(z) < 1.0
        w = np.where(inside, z, 1.0 / np.conj(np.where(inside, 1.0, z)))
        return fn(w)

    return F


def t1_lower_consistency(f: Weight, dec: Decomposition, gamma_value: float, disc_budget: int = 200, seed: int = 0) -> dict:
    """Empirical constant ``c = bmo(f - u) / gamma(f)`` for the produced ``h = u``."""
    bmo = bmo_disc_norm(lambda z: dec.v(z), disc_budget, 400, seed)
    c = bmo / gamma_value if gamma_value > 0 else math.nan
    return {"bmo_f_minus_h": bmo, "gamma": gamma_value, "empirical_c": c}
