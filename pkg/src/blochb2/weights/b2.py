"""B2 characteristics, the B2 predicate, and gamma(f)."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..carleson import (
    DEFAULT_SHIFTS,
    Arc,
    BoxQuadrature,
    CarlesonSquare,
    RowIntegrals,
    TopHalfTiling,
    cached_tiling,
    estimate_boxes,
    square_area,
)
from .families import Composed, Weight

B2_GROWTH_THRESHOLD = 1.05
MAX_B2_LEVEL = 20
DEFAULT_SCAN_QUAD = BoxQuadrature(radial_levels=6, angular_nodes=4, radial_nodes=4)


@dataclass
class B2Report:
    """Result of a dyadic B2 scan.

    ``per_level[k]`` is the largest product of averages over level-``k``
    squares (all shifts); ``characteristic_sq`` is their maximum.
    """

    characteristic_sq: float
    divergent: bool
    argmax: dict | None
    max_level: int
    shifts: tuple
    quadrature: dict
    per_level: list[float]
    converged: bool
    method: str
    weight: dict = field(default_factory=dict)

    @property
    def cumulative(self) -> list[float]:
        return list(np.maximum.accumulate(np.asarray(self.per_level, dtype=float)))

    def level_ratio(self) -> float:
        """``sup_{<=L} / sup_{<=L-1}`` of the product of averages."""
        cum = self.cumulative
        if len(cum) < 2:
            return 1.0
        if not np.isfinite(cum[-1]):
            return math.inf
        return cum[-1] / cum[-2]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["shifts"] = list(self.shifts)
        d["level_ratio"] = self.level_ratio()
        return d


def _closed_form_scan(w: Weight, root: Arc, max_level: int) -> tuple[list[float], bool] | None:
    inv = w.inverse
    vals = []
    for k in range(max_level + 1):
        m = root.length * 2.0 ** -k
        a, b = w.closed_form_log_average(m), inv.closed_form_log_average(m)
        if a is None or b is None:
            return None
        if math.isinf(a) or math.isinf(b):
            return [math.inf] * (max_level + 1), True
        vals.append(math.exp(a + b))
    return vals, False


def scan_log_rows(tiling: TopHalfTiling, log_rows: Sequence[np.ndarray], max_level: int):
    """Per-level sup of ``avg(w) avg(1/w)`` on one tiling from the log-values of ``w``.

    Returns ``(per_level, argmax_index, divergent, converged)`` where the
    values are logs of the product.
    """
    rows_w = RowIntegrals.from_log_values(tiling, log_rows)
    rows_i = RowIntegrals.from_log_values(tiling, [-x for x in log_rows])
    per_level, arg = [], []
    divergent, converged = False, True
    for k in range(max_level + 1):
        ew, ei = estimate_boxes(rows_w, k), estimate_boxes(rows_i, k)
        lp = ew.log_average + ei.log_average
        div = ew.divergent | ei.divergent
        if np.any(div):
            divergent = True
            idx = int(np.argmax(div))
            per_level.append(math.inf)
            arg.append(idx)
            continue
        converged = converged and bool(np.all(ew.converged & ei.converged))
        idx = int(np.argmax(lp))
        per_level.append(float(lp[idx]))
        arg.append(idx)
    return per_level, arg, divergent, converged


def b2_characteristic(
    w: Weight,
    root: Arc = Arc.full(),
    max_level: int = 8,
    quad: BoxQuadrature = DEFAULT_SCAN_QUAD,
    shifts: Sequence[float] = DEFAULT_SHIFTS,
) -> B2Report:
    """``sup_Q avg_Q(w) avg_Q(1/w)`` over dyadic squares of the shifted grids.

    The positive scale of ``w`` is removed before integration, so the
    result is exactly invariant under ``w -> c w``.
    """
    if not (0 <= max_level <= MAX_B2_LEVEL):
        raise ValueError(f"max_level must lie in [0, {MAX_B2_LEVEL}]")
    w = w.unscaled()
    shifts = tuple(shifts)
    closed = _closed_form_scan(w, root, max_level)
    if closed is not None:
        vals, div = closed
        arg = CarlesonSquare(Arc.from_start(root.start, root.length * 2.0 ** -int(np.argmax(vals))))
        return B2Report(
            characteristic_sq=max(vals),
            divergent=div,
            argmax=arg.to_dict(),
            max_level=max_level,
            shifts=shifts,
            quadrature={"scheme": "closed-form"},
            per_level=vals,
            converged=not div,
            method="closed-form",
            weight=w.params(),
        )
    depth = max_level + quad.radial_levels
    best = [-math.inf] * (max_level + 1)
    best_sq: list = [None] * (max_level + 1)
    divergent, converged = False, True
    for shift in shifts:
        tiling = cached_tiling(root, depth, quad, shift)
        log_rows = [w.log_eval(tiling.nodes(n)) for n in range(depth + 1)]
        per, arg, div, conv = scan_log_rows(tiling, log_rows, max_level)
        converged = converged and conv
        for k in range(max_level + 1):
            if per[k] > best[k]:
                best[k] = per[k]
                best_sq[k] = CarlesonSquare(tiling.box_arc(k, arg[k]))
        if div:
            divergent = True
            break
    vals = [math.exp(v) if np.isfinite(v) else math.inf for v in best]
    kmax = int(np.argmax(vals))
    return B2Report(
        characteristic_sq=math.inf if divergent else max(vals),
        divergent=divergent,
        argmax=best_sq[kmax].to_dict() if best_sq[kmax] is not None else None,
        max_level=max_level,
        shifts=shifts,
        quadrature=quad.to_dict(),
        per_level=vals,
        converged=converged and not divergent,
        method="tiling",
        weight=w.params(),
    )


def b2_predicate(report: B2Report, growth: float = B2_GROWTH_THRESHOLD) -> bool:
    """Computational B2 membership: finite, not divergent, and the supremum grew
    by less than ``growth`` when the finest level was added."""
    if report.divergent or not np.isfinite(report.characteristic_sq):
        return False
    return report.level_ratio() <= growth


def in_b2(w: Weight, max_level: int = 8, quad: BoxQuadrature = DEFAULT_SCAN_QUAD, **kw) -> bool:
    return b2_predicate(b2_characteristic(w, max_level=max_level, quad=quad, **kw))


@dataclass
class GammaReport:
    value: float
    t_lo: float
    t_hi: float
    tol: float
    max_level: int
    trace: list = field(default_factory=list)
    status: str = "ok"

    def to_dict(self) -> dict:
        return asdict(self)


def gamma(
    f: Weight,
    tol: float = 0.01,
    max_level: int = 8,
    quad: BoxQuadrature = DEFAULT_SCAN_QUAD,
    t_max: float = 2.0 ** 20,
    predicate=None,
) -> GammaReport:
    """``inf {t > 0 : e^{f/t} in B2}`` by bisection on the B2 predicate.

    ``f`` is given as a weight whose log is ``f``; ``e^{f/t}`` is
    ``f.power(1/t)``. ``t_lo`` is the largest tested ``t`` failing the
    predicate and ``t_hi`` the smallest passing one.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    trace = []

    def passes(t: float) -> bool:
        if predicate is not None:
            ok = bool(predicate(t))
        else:
            ok = b2_predicate(b2_characteristic(f.power(1.0 / t), max_level=max_level, quad=quad))
        trace.append((t, ok))
        return ok

    t = 1.0
    if passes(t):
        t_hi = t
        while True:
            t_lo = t_hi / 2.0
            if t_lo <= tol:
                if passes(tol):
                    return GammaReport(0.0, 0.0, tol, tol, max_level, trace)
                t_lo = tol
                break
            if not passes(t_lo):
                break
            t_hi = t_lo
    else:
        t_lo = t
        while True:
            t_hi = 2.0 * t_lo
            if t_hi > t_max:
                return GammaReport(math.inf, t_lo, math.inf, tol, max_level, trace, "unbounded")
            if passes(t_hi):
                break
            t_lo = t_hi
    while t_hi - t_lo > tol:
        mid = 0.5 * (t_lo + t_hi)
        if passes(mid):
            t_hi = mid
        else:
            t_lo = mid
    return GammaReport(0.5 * (t_lo + t_hi), t_lo, t_hi, tol, max_level, trace)


def conformal_sweep(
    w: Weight, z_grid, max_level: int = 6, quad: BoxQuadrature = DEFAULT_SCAN_QUAD
) -> list[B2Report]:
    """B2 characteristics of ``w o phi_z`` for each ``z`` in the grid."""
    return [b2_characteristic(Composed(w, complex(z)), max_level=max_level, quad=quad) for z in np.atleast_1d(z_grid)]


def vanishing_b2_profile(
    w: Weight, delta_grid, max_level: int = 10, quad: BoxQuadrature = DEFAULT_SCAN_QUAD
) -> list[tuple[float, float]]:
    """For each ``delta``, the sup of ``avg(w) avg(1/w)`` over scanned squares with ``A(Q) < delta``.

    ``nan`` marks a ``delta`` below the area of the finest scanned square.
    """
    delta_grid = np.asarray(delta_grid, dtype=float)
    if np.any(np.diff(delta_grid) >= 0):
        raise ValueError("delta grid must be strictly decreasing")
    rep = b2_characteristic(w, max_level=max_level, quad=quad)
    areas = square_area(Arc.full().length * 2.0 ** -np.arange(max_level + 1))
    vals = np.asarray(rep.per_level)
    out = []
    for d in delta_grid:
        mask = areas < d
        out.append((float(d), float(vals[mask].max()) if mask.any() else math.nan))
    return out


def b1star_ratio(w: Weight, z_grid, quad: BoxQuadrature = BoxQuadrature(radial_levels=6, angular_nodes=8, radial_nodes=4)):
    """``max_z  int (w o phi_z) dA / w(z)`` via ``int (1-|z|^2)^2 / |1 - conj(z) zeta|^4 w(zeta) dA``.

    Returns ``(ratio, per_point, divergent)``.
    """
    z_grid = np.atleast_1d(np.asarray(z_grid, dtype=complex))
    per = []
    divergent = False
    for z in z_grid:
        extra = max(0, math.ceil(math.log2(1.0 / (1.0 - abs(z)))))
        tiling = TopHalfTiling(Arc.full(), quad.radial_levels + extra, quad)
        lz = 2.0 * math.log1p(-abs(z) ** 2)
        kernel, logs = [], []
        for n in range(tiling.depth + 1):
            zeta = tiling.nodes(n)
            k = lz - 4.0 * np.log(np.abs(1.0 - np.conj(z) * zeta))
            kernel.append(k)
            logs.append(k + w.log_eval(zeta))
        est = estimate_boxes(RowIntegrals.from_log_values(tiling, logs), 0)
        if est.divergent[0]:
            divergent = True
            per.append(math.inf)
            continue
        # the kernel integrates to 1 exactly; dividing by its quadrature cancels most of the rule's error
        norm = estimate_boxes(RowIntegrals.from_log_values(tiling, kernel), 0).log_integral[0]
        per.append(float(np.exp(est.log_integral[0] - norm - w.log_eval(z))))
    return max(per), per, divergent
