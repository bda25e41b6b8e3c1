"""Finite-space check of the small-mean-oscillation lemma:
if ``(sum w mu)(sum w^-1 mu) = 1 + eps`` with ``eps < 1`` then the
``mu``-variance of ``log w`` is at most ``4 eps``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SarasonResult:
    epsilon: float
    variance: float
    bound_ok: bool


def _normalize(log_w, masses):
    log_w = np.asarray(log_w, dtype=float)
    masses = np.asarray(masses, dtype=float)
    if log_w.shape != masses.shape or log_w.ndim != 1 or log_w.size == 0:
        raise ValueError("weights and masses must be equal-length nonempty lists")
    if np.any(masses < 0) or not math.isclose(masses.sum(), 1.0, rel_tol=0, abs_tol=1e-12):
        raise ValueError("masses must be nonnegative and sum to 1")
    if not np.all(np.isfinite(log_w)):
        raise ValueError("weights must be positive and finite")
    return log_w, masses


def sarason_check_log(log_w, masses) -> SarasonResult:
    """As :func:`sarason_check` with the weights given by their logs."""
    log_w, masses = _normalize(log_w, masses)
    mean = float(masses @ log_w)
    c = log_w - mean
    # (sum w mu)(sum w^-1 mu) - 1 with the mean factored out; expm1 keeps small eps exact
    a = masses @ np.expm1(c)
    b = masses @ np.expm1(-c)
    eps = float(a + b + a * b)
    if eps >= 1.0:
        raise ValueError(f"epsilon = {eps:.6g} violates the hypothesis 0 < eps < 1")
    var = float(masses @ (c * c))
    return SarasonResult(eps, var, var <= 4.0 * eps)


def sarason_check(weights, masses) -> SarasonResult:
    weights = np.asarray(weights, dtype=float)
    if np.any(weights <= 0):
        raise ValueError("weights must be positive")
    return sarason_check_log(np.log(weights), masses)


def random_space(rng: np.random.Generator, max_points: int = 20):
    """A random admissible space: Dirichlet masses and log-normal weights
    shrunk until ``eps < 1``."""
    n = int(rng.integers(2, max_points + 1))
    masses = rng.dirichlet(np.full(n, rng.uniform(0.2, 3.0)))
    masses = masses / masses.sum()
    log_w = rng.normal(0.0, rng.uniform(0.01, 2.0), n)
    while True:
        mean = masses @ log_w
        c = log_w - mean
        a, b = masses @ np.expm1(c), masses @ np.expm1(-c)
        if a + b + a * b < 1.0:
            return log_w, masses
        log_w = 0.7 * log_w


def sarason_search(n_spaces: int = 1000, seed: int = 0) -> tuple[int, list[SarasonResult]]:
    """Check ``n_spaces`` random spaces; returns ``(violations, results)``."""
    rng = np.random.default_rng(seed)
    results = []
    for _ in range(n_spaces):
        log_w, masses = random_space(rng)
        results.append(sarason_check_log(log_w, masses))
    return sum(not r.bound_ok for r in results), results
