"""Arcs, Carleson squares, dyadic trees and box quadrature.

Normalizations: the circle has length 1 and the disc has area 1, so an arc
of normalized length ``m`` spans ``2*pi*m`` radians and its Carleson square
has area ``m * (1 - (1 - m)**2)``.

Box integrals are computed on the dyadic tiling by top-halves: generation
``n`` below a root arc of length ``m0`` consists of ``2**n`` tiles with
``1 - |z|`` in ``[a/2, a]``, ``a = m0 * 2**-n``. Each tile carries a
tensor Gauss-Legendre rule. The strip below the finest generation is filled
in by geometric extrapolation of the row means, which is exact for
integrands behaving like a power of the distance to the boundary and also
yields the divergence test (row means growing by a factor >= 2 per
generation means the integral does not converge).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi
DEFAULT_SHIFTS = (0.0, 1.0 / 3.0, 2.0 / 3.0)
MAX_SCAN_LEVEL = 24


@dataclass(frozen=True)
class Arc:
    """Arc of the unit circle given by its center angle and normalized length."""

    center_angle: float
    length: float

    def __post_init__(self):
        if not (0.0 < self.length <= 1.0):
            raise ValueError(f"arc length must lie in (0, 1], got {self.length}")
        object.__setattr__(self, "center_angle", float(self.center_angle) % TWO_PI)

    @classmethod
    def full(cls) -> "Arc":
        return cls(0.0, 1.0)

    @classmethod
    def from_start(cls, start_angle: float, length: float) -> "Arc":
        return cls(start_angle + math.pi * length, length)

    @property
    def start(self) -> float:
        return self.center_angle - math.pi * self.length

    @property
    def width(self) -> float:
        """Angular width in radians."""
        return TWO_PI * self.length

    @property
    def center(self) -> complex:
        return complex(math.cos(self.center_angle), math.sin(self.center_angle))

    def contains(self, theta) -> np.ndarray:
        rel = np.mod(np.asarray(theta) - self.start, TWO_PI)
        if self.length >= 1.0:
            return np.ones_like(rel, dtype=bool)
        return rel < self.width

    def halves(self) -> tuple["Arc", "Arc"]:
        h = 0.5 * self.length
        return Arc.from_start(self.start, h), Arc.from_start(self.start + math.pi * self.length, h)

    def shifted(self, fraction: float) -> "Arc":
        """The same arc rotated by ``fraction`` of its own length."""
        return Arc(self.center_angle + fraction * self.width, self.length)


def square_area(m):
    """Normalized area ``m * (1 - (1 - m)^2)`` of the Carleson square over an arc of length ``m``."""
    m = np.asarray(m, dtype=float)
    return m * m * (2.0 - m)


def strip_area(m, depth_gap):
    """Area of ``{1 - |z| < s}`` over an arc of length ``m`` (normalized)."""
    s = np.asarray(depth_gap, dtype=float)
    return np.asarray(m, dtype=float) * s * (2.0 - s)


@dataclass(frozen=True)
class CarlesonSquare:
    arc: Arc

    @property
    def m(self) -> float:
        return self.arc.length

    @property
    def area(self) -> float:
        return float(square_area(self.m))

    @property
    def anchor(self) -> complex:
        """``z_Q = (1 - m(I)) xi(I)``."""
        return (1.0 - self.m) * self.arc.center

    @property
    def top_half_area(self) -> float:
        m = self.m
        return m * ((1.0 - 0.5 * m) ** 2 - (1.0 - m) ** 2)

    @property
    def square_id(self) -> str:
        return f"{self.arc.center_angle:.17g}/{self.m:.17g}"

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        r = np.abs(z)
        return (r > 0) & (r < 1) & self.arc.contains(np.angle(z)) & (1.0 - r < self.m)

    def in_top_half(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return self.contains(z) & (1.0 - np.abs(z) >= 0.5 * self.m)

    def to_dict(self) -> dict:
        return {"center_angle": self.arc.center_angle, "length": self.m, "area": self.area}


@dataclass(frozen=True)
class TopHalf:
    """Region ``{z : arg z in arc, s_inner <= 1 - |z| <= s_outer}``."""

    arc: Arc
    s_inner: float
    s_outer: float

    @property
    def area(self) -> float:
        m = self.arc.length
        return m * ((1.0 - self.s_inner) ** 2 - (1.0 - self.s_outer) ** 2)


@dataclass(frozen=True)
class DyadicTree:
    """Dyadic subarcs of ``root`` (rotated by ``shift`` of its length) down to ``levels``."""

    root: Arc
    levels: int
    shift: float = 0.0

    def __post_init__(self):
        if self.levels < 0:
            raise ValueError("levels must be nonnegative")
        if not (0.0 <= self.shift < 1.0):
            raise ValueError("shift must lie in [0, 1)")

    @property
    def shifted_root(self) -> Arc:
        return self.root.shifted(self.shift)

    def arcs(self, level: int) -> list[Arc]:
        base = self.shifted_root
        m = base.length * 2.0 ** -level
        step = TWO_PI * m
        return [Arc.from_start(base.start + i * step, m) for i in range(2 ** level)]

    def squares(self, level: int) -> list[CarlesonSquare]:
        return [CarlesonSquare(a) for a in self.arcs(level)]

    def children(self, arc: Arc) -> tuple[Arc, Arc]:
        return arc.halves()


def tile_top_halves(Q: CarlesonSquare, depth: int) -> tuple[list[tuple[CarlesonSquare, TopHalf]], TopHalf]:
    """Top-halves of all dyadic subsquares of ``Q`` of generations ``0..depth``
    together with the residual strip ``1 - |z| < m * 2**-(depth+1)``."""
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    tree = DyadicTree(Q.arc, depth)
    tiles = []
    for n in range(depth + 1):
        for arc in tree.arcs(n):
            a = arc.length
            tiles.append((CarlesonSquare(arc), TopHalf(arc, 0.5 * a, a)))
    residual = TopHalf(Q.arc, 0.0, Q.m * 2.0 ** -(depth + 1))
    return tiles, residual


@dataclass(frozen=True)
class BoxQuadrature:
    """Quadrature settings for integrals over Carleson squares.

    ``radial_levels`` is the number of dyadic generations integrated
    explicitly below each square before the tail extrapolation takes over.
    Each top-half gets ``radial_nodes`` Gauss nodes in the radius and
    ``angular_nodes`` in the angle (in panels of at most four nodes).
    """

    radial_levels: int = 6
    angular_nodes: int = 8
    radial_nodes: int = 4
    scheme: str = "top-half"

    def __post_init__(self):
        if self.radial_levels < 2:
            raise ValueError("radial_levels must be at least 2 for the tail extrapolation")
        if self.scheme not in ("top-half", "polar-tensor"):
            raise ValueError(f"unknown quadrature scheme {self.scheme!r}")
        if self.angular_nodes < 1 or self.radial_nodes < 1:
            raise ValueError("node counts must be positive")

    def refined(self, steps: int = 1) -> "BoxQuadrature":
        return BoxQuadrature(self.radial_levels + 2 * steps, self.angular_nodes, self.radial_nodes, self.scheme)

    def to_dict(self) -> dict:
        return {
            "radial_levels": self.radial_levels,
            "angular_nodes": self.angular_nodes,
            "radial_nodes": self.radial_nodes,
            "scheme": self.scheme,
        }


@lru_cache(maxsize=None)
def _gauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _panel_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss rule on [0, 1] with panels of at most four nodes."""
    panels = max(1, math.ceil(n / 4))
    per = math.ceil(n / panels)
    x, w = _gauss(per)
    xs = np.concatenate([(p + x) / panels for p in range(panels)])
    ws = np.concatenate([w / panels for _ in range(panels)])
    return xs, ws


class TopHalfTiling:
    """Nodes and weights of the top-half tiling below an arc.

    Parameters
    ----------
    root : Arc
        Arc whose Carleson square is tiled.
    depth : int
        Finest generation integrated explicitly.
    quad : BoxQuadrature
        Node counts.
    shift : float
        Rotation of the dyadic grid, as a fraction of the root length.
    """

    def __init__(self, root: Arc, depth: int, quad: BoxQuadrature, shift: float = 0.0):
        if depth < 0:
            raise ValueError("depth must be nonnegative")
        self.root = root
        self.depth = int(depth)
        self.quad = quad
        self.shift = float(shift)
        self.m0 = root.length
        self.start = root.start + self.shift * root.width
        self._rx, self._rw = _gauss(quad.radial_nodes)
        self._ax, self._aw = _panel_rule(quad.angular_nodes)
        self.per_tile = len(self._rx) * len(self._ax)

    @property
    def key(self) -> tuple:
        return (self.root.center_angle, self.m0, self.depth, self.shift, self.quad)

    def tiles_in_row(self, n: int) -> int:
        return 2 ** n if self.quad.scheme == "top-half" else 1

    def tile_length(self, n: int) -> float:
        return self.m0 * 2.0 ** -n

    def _row_geometry(self, n: int):
        a = self.tile_length(n)
        r0, r1 = 1.0 - a, 1.0 - 0.5 * a
        r = r0 + (r1 - r0) * self._rx
        tiles = self.tiles_in_row(n)
        width = self.root.width / tiles
        # normalized area element r dr dtheta / pi
        w = np.outer(r * self._rw * (r1 - r0), self._aw * width).ravel() / math.pi
        ang = np.outer(np.ones_like(r), self._ax * width).ravel()
        rad = np.outer(r, np.ones_like(self._ax)).ravel()
        starts = self.start + width * np.arange(tiles)
        return rad, ang, w, starts

    def nodes(self, n: int) -> np.ndarray:
        """Complex nodes of generation ``n``, shape ``(tiles, per_tile)``."""
        rad, ang, _, starts = self._row_geometry(n)
        theta = starts[:, None] + ang[None, :]
        return rad[None, :] * np.exp(1j * theta)

    def weights(self, n: int) -> np.ndarray:
        return self._row_geometry(n)[2]

    def polar_nodes(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Radius and angle of generation ``n`` nodes (same layout as :meth:`nodes`)."""
        rad, ang, _, starts = self._row_geometry(n)
        theta = starts[:, None] + ang[None, :]
        return np.broadcast_to(rad, theta.shape), theta

    def row_tile_area(self, n: int) -> float:
        a = self.tile_length(n)
        width_fraction = self.m0 / self.tiles_in_row(n)
        return width_fraction * ((1.0 - 0.5 * a) ** 2 - (1.0 - a) ** 2)

    def box_length(self, level: int) -> float:
        return self.m0 * 2.0 ** -level

    def box_arc(self, level: int, index: int) -> Arc:
        m = self.box_length(level)
        return Arc.from_start(self.start + index * TWO_PI * m, m)

    def box_row_areas(self, level: int) -> np.ndarray:
        """Area of each generation row below one box at ``level`` (shape ``depth-level+1``)."""
        m = self.box_length(level)
        out = []
        for n in range(level, self.depth + 1):
            a = self.tile_length(n)
            out.append(m * ((1.0 - 0.5 * a) ** 2 - (1.0 - a) ** 2))
        return np.array(out)

    def strip_below(self, level: int, d: int) -> float:
        return float(strip_area(self.box_length(level), 0.5 * self.tile_length(d)))


@lru_cache(maxsize=16)
def cached_tiling(root: Arc, depth: int, quad: BoxQuadrature, shift: float = 0.0) -> TopHalfTiling:
    return TopHalfTiling(root, depth, quad, shift)


@dataclass
class RowIntegrals:
    """Per-tile integrals of ``exp(f)`` for every generation of a tiling.

    ``scaled[n][i] * exp(offset[n])`` is the integral over tile ``i`` of
    generation ``n``; offsets keep huge exponents representable.
    """

    tiling: TopHalfTiling
    scaled: list[np.ndarray]
    offset: list[float]

    @classmethod
    def from_log_values(cls, tiling: TopHalfTiling, log_values: Sequence[np.ndarray]) -> "RowIntegrals":
        scaled, offset = [], []
        for n, lv in enumerate(log_values):
            lv = np.asarray(lv, dtype=float)
            if np.any(np.isnan(lv)):
                raise ValueError(f"log-weight is NaN at generation {n}")
            c = float(np.max(lv))
            if not np.isfinite(c):
                c = 0.0 if c == -np.inf else c
            if c == np.inf:
                scaled.append(np.where(np.isinf(lv).any(axis=1), np.inf, 0.0))
                offset.append(0.0)
                continue
            scaled.append(np.exp(lv - c) @ tiling.weights(n))
            offset.append(c)
        return cls(tiling, scaled, offset)

    def box_row_logs(self, level: int) -> np.ndarray:
        """Log of the integral of each generation row under each box, shape ``(2**level, depth-level+1)``."""
        t = self.tiling
        nbox = t.tiles_in_row(level)
        cols = []
        with np.errstate(divide="ignore"):
            for n in range(level, t.depth + 1):
                row = self.scaled[n].reshape(nbox, -1).sum(axis=1) if nbox > 1 else np.array([self.scaled[n].sum()])
                cols.append(np.log(row) + self.offset[n])
        return np.stack(cols, axis=1)


@dataclass
class BoxEstimate:
    """Integral estimates for all boxes at one level of a tiling."""

    log_integral: np.ndarray
    divergent: np.ndarray
    converged: np.ndarray
    area: float

    @property
    def log_average(self) -> np.ndarray:
        return self.log_integral - math.log(self.area)


def _tail_log(row_logs: np.ndarray, areas: np.ndarray, strip: float, upto: int):
    """Log of rows ``0..upto`` plus the extrapolated strip below row ``upto``."""
    with np.errstate(invalid="ignore", divide="ignore"):
        head = np.logaddexp.reduce(row_logs[:, : upto + 1], axis=1)
        mean_last = row_logs[:, upto] - math.log(areas[upto])
        mean_prev = row_logs[:, upto - 2] - math.log(areas[upto - 2])
        log_mu = 0.5 * (mean_last - mean_prev)
        log_mu = np.where(np.isfinite(log_mu), log_mu, -np.inf)
        mu = np.exp(log_mu)
        divergent = mu >= 2.0
        factor = np.where(divergent, np.inf, mu / np.where(divergent, 1.0, 2.0 - mu))
        tail = math.log(strip) + mean_last + np.log(factor)
        tail = np.where(np.isfinite(mean_last), tail, -np.inf)
        total = np.logaddexp(head, tail)
    total = np.where(divergent, np.inf, total)
    return total, divergent


def estimate_boxes(rows: RowIntegrals, level: int) -> BoxEstimate:
    """Integral of the tiled function over every box at ``level``."""
    t = rows.tiling
    gap = t.depth - level
    if gap < 2:
        raise ValueError(f"tiling depth {t.depth} too shallow for level {level}")
    row_logs = rows.box_row_logs(level)
    areas = t.box_row_areas(level)
    est, div = _tail_log(row_logs, areas, t.strip_below(level, t.depth), gap)
    converged = np.zeros_like(div)
    if gap >= 4:
        prev, _ = _tail_log(row_logs, areas, t.strip_below(level, t.depth - 2), gap - 2)
        with np.errstate(invalid="ignore"):
            converged = np.abs(np.expm1(prev - est)) < 1e-4
        if gap >= 6:
            prev2, _ = _tail_log(row_logs, areas, t.strip_below(level, t.depth - 4), gap - 4)
            with np.errstate(invalid="ignore"):
                growing = (est - prev > math.log(2.0)) & (prev - prev2 > math.log(2.0))
            div = div | growing
            est = np.where(div, np.inf, est)
    converged = converged & ~div
    return BoxEstimate(est, div, converged, float(square_area(t.box_length(level))))


def integrate_signed(tiling: TopHalfTiling, values: Sequence[np.ndarray], level: int = 0) -> np.ndarray:
    """Integrals of a real (possibly signed) function over all boxes at ``level``.

    The strip below the finest generation is filled with the mean of the
    finest row (no extrapolation).
    """
    nbox = tiling.tiles_in_row(level)
    total = np.zeros(nbox)
    last = None
    for n in range(level, tiling.depth + 1):
        tile = np.asarray(values[n], dtype=float) @ tiling.weights(n)
        last = tile.reshape(nbox, -1).sum(axis=1)
        total += last
    areas = tiling.box_row_areas(level)
    total += tiling.strip_below(level, tiling.depth) * last / areas[-1]
    return total


@dataclass
class BoxValue:
    value: float
    converged: bool
    divergent: bool


def _log_values_for(w, tiling: TopHalfTiling, sign: float = 1.0) -> list[np.ndarray]:
    return [sign * np.asarray(w.log_eval(tiling.nodes(n)), dtype=float) for n in range(tiling.depth + 1)]


def box_average(w, Q: CarlesonSquare, quad: BoxQuadrature = BoxQuadrature(), cache: "QuadratureCache | None" = None) -> BoxValue:
    """Average of the weight ``w`` over the square ``Q``.

    Weights exposing ``closed_form_log_average(m)`` are averaged exactly.
    """
    if cache is not None:
        hit = cache.get(w, Q, quad.radial_levels)
        if hit is not None:
            return hit
    closed = getattr(w, "closed_form_log_average", None)
    result = None
    if closed is not None:
        la = closed(Q.m)
        if la is not None:
            if np.isinf(la):
                result = BoxValue(math.inf, False, True)
            else:
                result = BoxValue(math.exp(la), True, False)
    if result is None:
        tiling = TopHalfTiling(Q.arc, quad.radial_levels, quad)
        rows = RowIntegrals.from_log_values(tiling, _log_values_for(w, tiling))
        est = estimate_boxes(rows, 0)
        div = bool(est.divergent[0])
        val = math.inf if div else float(np.exp(est.log_average[0]))
        result = BoxValue(val, bool(est.converged[0]), div)
    if cache is not None:
        cache.put(w, Q, quad.radial_levels, result)
    return result


@dataclass
class ScanResult:
    value: float
    argmax: CarlesonSquare | None
    divergent: bool
    max_level: int
    shifts: tuple[float, ...]
    per_level: list[float] = field(default_factory=list)


def iter_scan_squares(root: Arc, max_level: int, shifts: Sequence[float]) -> Iterator[tuple[int, float, CarlesonSquare]]:
    for shift in shifts:
        tree = DyadicTree(root, max_level, shift)
        for level in range(max_level + 1):
            for sq in tree.squares(level):
                yield level, shift, sq


def dyadic_sup_scan(
    F: Callable[[CarlesonSquare], float | tuple[float, bool] | BoxValue],
    root: Arc = Arc.full(),
    max_level: int = 8,
    shifts: Sequence[float] = DEFAULT_SHIFTS,
) -> ScanResult:
    """Maximum of ``F`` over the dyadic squares of each shifted grid.

    ``F`` may return a number, a ``(value, divergent)`` pair, or a
    :class:`BoxValue`. A divergent square makes the supremum divergent.
    Ties keep the first square in scan order (shift, level, index).
    """
    if not (0 <= max_level <= MAX_SCAN_LEVEL):
        raise ValueError(f"max_level must lie in [0, {MAX_SCAN_LEVEL}]")
    best, arg = -math.inf, None
    per_level = [-math.inf] * (max_level + 1)
    for level, _, sq in iter_scan_squares(root, max_level, shifts):
        out = F(sq)
        if isinstance(out, BoxValue):
            val, div = out.value, out.divergent
        elif isinstance(out, tuple):
            val, div = out
        else:
            val, div = float(out), False
        if div:
            return ScanResult(math.inf, sq, True, max_level, tuple(shifts), per_level)
        per_level[level] = max(per_level[level], val)
        if val > best:
            best, arg = val, sq
    return ScanResult(best, arg, False, max_level, tuple(shifts), per_level)


class QuadratureCache:
    """JSON file mapping ``(weight hash, square id, level)`` to box averages."""

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = path
        self.data: dict[str, list] = {}
        if path is not None and os.path.exists(path):
            with open(path) as fh:
                self.data = json.load(fh)

    @staticmethod
    def weight_hash(w) -> str:
        payload = json.dumps(w.params(), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:24]

    def key(self, w, Q: CarlesonSquare, level: int) -> str:
        return f"{self.weight_hash(w)}|{Q.square_id}|{level}"

    def get(self, w, Q: CarlesonSquare, level: int) -> BoxValue | None:
        hit = self.data.get(self.key(w, Q, level))
        if hit is None:
            return None
        return BoxValue(float(hit[0]), bool(hit[1]), bool(hit[2]))

    def put(self, w, Q: CarlesonSquare, level: int, value: BoxValue) -> None:
        self.data[self.key(w, Q, level)] = [value.value, value.converged, value.divergent]

    def save(self, path: str | os.PathLike | None = None) -> None:
        path = path or self.path
        if path is None:
            raise ValueError("no cache path given")
        with open(path, "w") as fh:
            json.dump(self.data, fh, sort_keys=True)
