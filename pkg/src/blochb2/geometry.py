"""Hyperbolic geometry of the unit disc.

Points are handled either as :class:`DiskPoint` values or as complex numpy
arrays; every function here accepts both and broadcasts over arrays.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

DEFAULT_STOLZ_APERTURE = 2.0


class MetricConvention(str, enum.Enum):
    """Which formula is used for the hyperbolic distance."""

    PAPER_SQUARED = "paper-squared"
    STANDARD = "standard"

    @classmethod
    def parse(cls, value: "MetricConvention | str") -> "MetricConvention":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown metric convention {value!r}; "
                f"expected one of {[c.value for c in cls]}"
            ) from None


@dataclass(frozen=True)
class DiskPoint:
    re: float
    im: float

    def __post_init__(self):
        if not (np.isfinite(self.re) and np.isfinite(self.im)):
            raise ValueError("DiskPoint coordinates must be finite")
        if self.re * self.re + self.im * self.im >= 1.0:
            raise ValueError(f"point ({self.re}, {self.im}) is not inside the unit disc")

    @classmethod
    def from_complex(cls, z: complex) -> "DiskPoint":
        z = complex(z)
        return cls(z.real, z.imag)

    @property
    def z(self) -> complex:
        return complex(self.re, self.im)

    def __complex__(self) -> complex:
        return self.z

    def __abs__(self) -> float:
        return abs(self.z)


@dataclass(frozen=True)
class MobiusMap:
    """The involutive automorphism ``phi_a(zeta) = (a - zeta) / (1 - conj(a) zeta)``."""

    base: DiskPoint

    def __call__(self, zeta):
        return mobius_apply(self, zeta)

    def derivative(self, zeta):
        a = self.base.z
        zeta = as_complex(zeta)
        return -(1.0 - abs(a) ** 2) / (1.0 - np.conj(a) * zeta) ** 2


@dataclass(frozen=True)
class StolzAngle:
    """Non-tangential region ``{z : |z - xi| < aperture * (1 - |z|)}``."""

    vertex: complex = 1.0
    aperture: float = DEFAULT_STOLZ_APERTURE

    def __post_init__(self):
        if not np.isclose(abs(self.vertex), 1.0, atol=1e-12):
            raise ValueError("Stolz angle vertex must lie on the unit circle")
        if not self.aperture > 1.0:
            raise ValueError("Stolz aperture must exceed 1")

    def contains(self, z) -> np.ndarray | bool:
        z = as_complex(z)
        inside = np.abs(z - self.vertex) < self.aperture * (1.0 - np.abs(z))
        return inside & (np.abs(z) < 1.0)


def as_complex(z):
    """Coerce a DiskPoint, a sequence of DiskPoints, or a complex array."""
    if isinstance(z, DiskPoint):
        return z.z
    if isinstance(z, (list, tuple)) and z and isinstance(z[0], DiskPoint):
        return np.array([p.z for p in z])
    return np.asarray(z, dtype=complex) if not np.isscalar(z) else complex(z)


def mobius_apply(phi: MobiusMap | DiskPoint | complex, zeta):
    a = phi.base.z if isinstance(phi, MobiusMap) else as_complex(phi)
    zeta = as_complex(zeta)
    return (a - zeta) / (1.0 - np.conj(a) * zeta)


def one_minus_abs2(z):
    """``1 - |z|^2`` computed as ``(1 - |z|)(1 + |z|)``."""
    r = np.abs(z)
    return (1.0 - r) * (1.0 + r)


def pseudo_hyperbolic(z, zeta):
    """``|phi_z(zeta)|``."""
    z = as_complex(z)
    zeta = as_complex(zeta)
    return np.abs(z - zeta) / np.abs(1.0 - np.conj(z) * zeta)


def _log_one_minus_rho2(z, zeta):
    # 1 - rho^2 = (1-|z|^2)(1-|zeta|^2) / |1 - conj(z) zeta|^2, no cancellation near the boundary
    return (
        np.log(one_minus_abs2(z))
        + np.log(one_minus_abs2(zeta))
        - 2.0 * np.log(np.abs(1.0 - np.conj(z) * zeta))
    )


def hyperbolic_distance(z, zeta, convention: MetricConvention | str = MetricConvention.PAPER_SQUARED):
    """Hyperbolic distance between points of the disc.

    ``PAPER_SQUARED`` is ``1/2 log((1 + rho^2) / (1 - rho^2))`` with
    ``rho = |phi_z(zeta)|``; ``STANDARD`` is ``1/2 log((1 + rho) / (1 - rho))``.
    Both are evaluated through ``log(1 - rho^2)`` built from the moduli of the
    points, so they stay finite for valid inputs arbitrarily close to the circle.
    """
    convention = MetricConvention.parse(convention)
    z = as_complex(z)
    zeta = as_complex(zeta)
    rho = pseudo_hyperbolic(z, zeta)
    rho = np.minimum(rho, 1.0)
    log_gap = _log_one_minus_rho2(z, zeta)
    log_gap = np.minimum(log_gap, 0.0)
    if convention is MetricConvention.PAPER_SQUARED:
        out = 0.5 * (np.log1p(rho * rho) - log_gap)
    else:
        out = np.log1p(rho) - 0.5 * log_gap
    # coincident points are exactly 0, not a rounding residue
    return np.where(z == zeta, 0.0, np.maximum(out, 0.0))


def geodesic_sample(z, zeta, n: int) -> np.ndarray:
    """``n`` points on the geodesic from ``z`` to ``zeta``, equally spaced in
    standard hyperbolic arclength, endpoints included."""
    if n < 2:
        raise ValueError("geodesic_sample needs n >= 2")
    z = complex(as_complex(z))
    zeta = complex(as_complex(zeta))
    w = (z - zeta) / (1.0 - np.conj(z) * zeta)
    if w == 0:
        return np.full(n, z, dtype=complex)
    total = np.arctanh(abs(w))
    t = np.linspace(0.0, total, n)
    pts = np.tanh(t) * (w / abs(w))
    out = (z - pts) / (1.0 - np.conj(z) * pts)
    out[0] = z
    out[-1] = zeta
    return out


def hyperbolic_length(path) -> float:
    """Midpoint rule for ``int |dz| / (1 - |z|^2)`` along a polygonal path."""
    path = np.atleast_1d(as_complex(path))
    if path.size < 2:
        raise ValueError("a path needs at least two points")
    if np.any(np.abs(path) >= 1.0):
        raise ValueError("path leaves the unit disc")
    seg = np.diff(path)
    mid = 0.5 * (path[1:] + path[:-1])
    return float(np.sum(np.abs(seg) / one_minus_abs2(mid)))
