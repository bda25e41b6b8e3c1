"""Bloch seminorm on polar grids, level sets ``K(eps, g)`` and the Cauchy
oscillation ratio."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..carleson import Arc, BoxQuadrature, TopHalfTiling, integrate_signed, square_area
from ..geometry import one_minus_abs2
from .functions import AnalyticFunction


@dataclass(frozen=True)
class GridSpec:
    """Polar grid reaching ``1 - |z| = 2**-levels``.

    Radii are ``1 - 2**(-j/per_level)`` plus the origin; the circle of
    radius ``r`` carries ``angular_factor / (1 - r)`` equispaced angles,
    clipped to ``[min_angles, max_angles]``, always including angle 0.
    """

    levels: int = 24
    per_level: int = 4
    angular_factor: float = 8.0
    min_angles: int = 64
    max_angles: int = 2 ** 16

    def __post_init__(self):
        if not (1 <= self.levels <= 30):
            raise ValueError("levels must lie in [1, 30]")

    def gaps(self) -> np.ndarray:
        """Values of ``1 - r`` (the origin has gap 1)."""
        j = np.arange(0, self.levels * self.per_level + 1)
        return 2.0 ** (-j / self.per_level)

    def radii(self) -> np.ndarray:
        return 1.0 - self.gaps()

    def angles(self, r: float) -> np.ndarray:
        n = int(np.clip(round(self.angular_factor / (1.0 - r)), self.min_angles, self.max_angles))
        return 2.0 * math.pi * np.arange(n) / n

    def circles(self):
        """Yield ``(gap, points)`` circle by circle."""
        for s in self.gaps():
            r = 1.0 - s
            if r == 0.0:
                yield s, np.zeros(1, dtype=complex)
            else:
                yield s, r * np.exp(1j * self.angles(r))

    def to_dict(self):
        return {
            "levels": self.levels,
            "per_level": self.per_level,
            "angular_factor": self.angular_factor,
            "min_angles": self.min_angles,
            "max_angles": self.max_angles,
        }


def bloch_quantity(g: AnalyticFunction, z) -> np.ndarray:
    """``(1 - |z|^2) |g'(z)|``."""
    z = np.asarray(z, dtype=complex)
    return one_minus_abs2(z) * np.abs(g.deriv(z))


def bloch_seminorm(g: AnalyticFunction, grid: GridSpec = GridSpec()) -> float:
    """Grid maximum of ``(1 - |z|^2)|g'(z)|``; a lower bound increasing with ``grid.levels``."""
    best = 0.0
    for _, pts in grid.circles():
        best = max(best, float(np.max(bloch_quantity(g, pts))))
    return best


def little_bloch_profile(g: AnalyticFunction, radii, angular_factor: float = 8.0, min_angles: int = 256, max_angles: int = 2 ** 18):
    """``[(r, max_{|z|=r} (1-|z|^2)|g'(z)|)]``."""
    out = []
    for r in np.atleast_1d(radii):
        r = float(r)
        if not 0 <= r < 1:
            raise ValueError("radii must lie in [0, 1)")
        n = int(np.clip(round(angular_factor / (1.0 - r)), min_angles, max_angles))
        pts = r * np.exp(2j * math.pi * np.arange(n) / n)
        out.append((r, float(np.max(bloch_quantity(g, pts)))))
    return out


def level_set_member(g: AnalyticFunction, eps: float, z) -> np.ndarray | bool:
    """``z in K(eps, g)``, i.e. ``(1 - |z|^2)|g'(z)| > eps``."""
    out = bloch_quantity(g, z) > eps
    return bool(out) if np.ndim(out) == 0 else out


@dataclass
class CauchyOscResult:
    ratio: float
    per_point: list = field(default_factory=list)
    skipped: list = field(default_factory=list)


def cauchy_square(z: complex) -> Arc:
    """Arc whose Carleson square contains ``{|zeta - z| < 1 - |z|}`` (for ``|z| > 3/4``)."""
    return Arc(float(np.angle(z)), 2.0 * (1.0 - abs(z)))


def cauchyosc_ratio(
    f: AnalyticFunction, z_grid, quad: BoxQuadrature = BoxQuadrature(radial_levels=8, angular_nodes=8, radial_nodes=4)
) -> CauchyOscResult:
    """``max (1-|z|^2)^2 |f'(z)|^2 / ((1/A(Q_z)) int_{Q_z} |u - u_Q|^2 dA)`` with ``u = Re f``."""
    per, skipped = [], []
    for z in np.atleast_1d(np.asarray(z_grid, dtype=complex)):
        if not 0.75 < abs(z) < 1.0:
            raise ValueError(f"point {z} violates 3/4 < |z| < 1")
        arc = cauchy_square(z)
        tiling = TopHalfTiling(arc, quad.radial_levels, quad)
        area = float(square_area(arc.length))
        u = [np.real(f.eval(tiling.nodes(n))) for n in range(tiling.depth + 1)]
        mean = integrate_signed(tiling, u)[0] / area
        var = integrate_signed(tiling, [(x - mean) ** 2 for x in u])[0] / area
        lhs = float(one_minus_abs2(z) ** 2 * abs(complex(f.deriv(z))) ** 2)
        if var <= 1e-24 * max(mean * mean, 1.0):
            skipped.append(complex(z))
            continue
        per.append((complex(z), lhs / var))
    ratio = max((r for _, r in per), default=math.nan)
    return CauchyOscResult(ratio, per, skipped)
