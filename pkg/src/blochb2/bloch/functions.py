"""Analytic functions on the disc: power series, lacunary series, closed forms.

Large exponents are evaluated as ``exp(n log|z|) * exp(i n arg z)`` so that
``z**n`` never overflows or loses the modulus to underflow prematurely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def _polar_power(r, theta, n):
    """``z**n`` for ``z = r e^{i theta}`` and integer ``n >= 0``, elementwise in ``r``."""
    if n == 0:
        return np.ones_like(r, dtype=complex)
    with np.errstate(divide="ignore"):
        logr = np.log(r)
    mod = np.exp(n * logr)
    return mod * np.exp(1j * np.mod(n * theta, 2.0 * math.pi))


class AnalyticFunction:
    """Base class. Subclasses implement ``_eval`` and ``_deriv`` for unscaled input."""

    scale: complex = 1.0

    def eval(self, z):
        return self.scale * self._eval(np.asarray(z, dtype=complex))

    def deriv(self, z):
        return self.scale * self._deriv(np.asarray(z, dtype=complex))

    __call__ = eval

    def scaled(self, c: complex) -> "AnalyticFunction":
        raise NotImplementedError

    def taylor(self, n: int) -> np.ndarray:
        """First ``n`` Taylor coefficients ``c_0 .. c_{n-1}``."""
        raise NotImplementedError

    def deriv_coefficients(self, n: int) -> np.ndarray:
        """Coefficients ``b_m = (m+1) c_{m+1}`` of ``g'`` for ``m < n``."""
        c = self.taylor(n + 1)
        return np.arange(1, n + 1) * c[1:]

    def params(self) -> dict:
        raise NotImplementedError

    @property
    def is_bounded(self) -> bool:
        """True when the function is known to lie in H^infinity."""
        return False


@dataclass
class PowerSeries(AnalyticFunction):
    """Finite power series ``sum_k coeffs[k] z^k``."""

    coeffs: np.ndarray
    scale: complex = 1.0

    def __post_init__(self):
        self.coeffs = np.atleast_1d(np.asarray(self.coeffs, dtype=complex))

    def _eval(self, z):
        return np.polynomial.polynomial.polyval(z, self.coeffs)

    def _deriv(self, z):
        if len(self.coeffs) < 2:
            return np.zeros_like(z)
        return np.polynomial.polynomial.polyval(z, np.polynomial.polynomial.polyder(self.coeffs))

    def scaled(self, c):
        return PowerSeries(self.coeffs.copy(), self.scale * c)

    def taylor(self, n):
        out = np.zeros(n, dtype=complex)
        k = min(n, len(self.coeffs))
        out[:k] = self.coeffs[:k]
        return self.scale * out

    def params(self):
        c = self.scale * self.coeffs
        return {"kind": "power-series", "coeffs_re": c.real.tolist(), "coeffs_im": c.imag.tolist()}

    @property
    def is_bounded(self):
        return True


@dataclass
class Lacunary(AnalyticFunction):
    """``sum_k a_k z^{n_k}`` with strictly increasing exponents."""

    a: np.ndarray
    n: np.ndarray
    scale: complex = 1.0
    label: str = "lacunary"

    def __post_init__(self):
        self.a = np.atleast_1d(np.asarray(self.a, dtype=complex))
        self.n = np.atleast_1d(np.asarray(self.n, dtype=np.int64))
        if self.a.shape != self.n.shape:
            raise ValueError("coefficient and exponent lists differ in length")
        if np.any(self.n < 0):
            raise ValueError("exponents must be nonnegative")
        if np.any(np.diff(self.n) <= 0):
            raise ValueError("lacunary exponents must be strictly increasing")

    @property
    def K(self) -> int:
        return len(self.n)

    def _eval(self, z):
        r, th = np.abs(z), np.angle(z)
        out = np.zeros(np.shape(z), dtype=complex)
        for ak, nk in zip(self.a, self.n):
            out = out + ak * _polar_power(r, th, int(nk))
        return out

    def _deriv(self, z):
        r, th = np.abs(z), np.angle(z)
        out = np.zeros(np.shape(z), dtype=complex)
        for ak, nk in zip(self.a, self.n):
            if nk == 0:
                continue
            out = out + ak * nk * _polar_power(r, th, int(nk) - 1)
        return out

    def z_deriv(self, z):
        """``z g'(z)`` evaluated without the division-free shortcut losing the origin."""
        z = np.asarray(z, dtype=complex)
        r, th = np.abs(z), np.angle(z)
        out = np.zeros(np.shape(z), dtype=complex)
        for ak, nk in zip(self.a, self.n):
            out = out + ak * nk * _polar_power(r, th, int(nk))
        return self.scale * out

    def scaled(self, c):
        return Lacunary(self.a.copy(), self.n.copy(), self.scale * c, self.label)

    def taylor(self, n):
        out = np.zeros(n, dtype=complex)
        keep = self.n < n
        out[self.n[keep]] = self.a[keep]
        return self.scale * out

    def params(self):
        a = self.scale * self.a
        return {
            "kind": "lacunary",
            "label": self.label,
            "a_re": a.real.tolist(),
            "a_im": a.imag.tolist(),
            "n": self.n.tolist(),
        }

    @property
    def is_bounded(self):
        return True


CLOSED_FORMS = ("identity", "neglog", "zero")


@dataclass
class ClosedForm(AnalyticFunction):
    """Named closed forms: ``identity`` (z), ``neglog`` (-log(1-z)), ``zero``."""

    kind: str
    scale: complex = 1.0

    def __post_init__(self):
        if self.kind not in CLOSED_FORMS:
            raise ValueError(f"unknown closed form {self.kind!r}; expected one of {CLOSED_FORMS}")

    def _eval(self, z):
        if self.kind == "identity":
            return z
        if self.kind == "neglog":
            return -np.log1p(-z)
        return np.zeros_like(z)

    def _deriv(self, z):
        if self.kind == "identity":
            return np.ones_like(z)
        if self.kind == "neglog":
            return 1.0 / (1.0 - z)
        return np.zeros_like(z)

    def scaled(self, c):
        return ClosedForm(self.kind, self.scale * c)

    def taylor(self, n):
        out = np.zeros(n, dtype=complex)
        if self.kind == "identity" and n > 1:
            out[1] = 1.0
        elif self.kind == "neglog" and n > 1:
            out[1:] = 1.0 / np.arange(1, n)
        return self.scale * out

    def params(self):
        return {"kind": self.kind, "scale_re": complex(self.scale).real, "scale_im": complex(self.scale).imag}

    @property
    def is_bounded(self):
        return self.kind != "neglog"


def factorial_exponents(K: int) -> np.ndarray:
    return np.array([math.factorial(k) for k in range(1, K + 1)], dtype=np.int64)


def superlacunary_exponents(K: int) -> np.ndarray:
    """``n_1 = 2``, ``n_{k+1} = n_k (k + 1)``."""
    n = [2]
    for k in range(1, K):
        n.append(n[-1] * (k + 1))
    return np.array(n, dtype=np.int64)


def check_superlacunary(n) -> None:
    """Reject exponent sequences whose consecutive ratios do not strictly increase."""
    n = np.asarray(n, dtype=float)
    if len(n) < 3:
        raise ValueError("need at least three exponents to test the ratio growth")
    ratios = n[1:] / n[:-1]
    if np.any(ratios <= 1.0) or np.any(np.diff(ratios) <= 0.0):
        raise ValueError(
            f"exponent ratios {ratios.tolist()} do not increase to infinity; "
            "a fixed-ratio lacunary sequence is not admissible"
        )


def little_bloch_lacunary(K: int) -> Lacunary:
    """``sum_{k=1}^K z^{2^k} / k``."""
    k = np.arange(1, K + 1)
    return Lacunary(1.0 / k, 2 ** k, label=f"little-bloch-{K}")


@dataclass
class FunctionSpec:
    """Parsed textual description of an analytic function (CLI helper)."""

    text: str
    func: AnalyticFunction = field(init=False)

    def __post_init__(self):
        self.func = parse_function(self.text)


def parse_function(text: str) -> AnalyticFunction:
    """Parse ``z``, ``log``, ``zero``, ``poly:c0,c1,..``, ``factorial:K``,
    ``superlacunary:K``, ``lacunary-little:K``, each optionally followed by
    ``*c`` for a real scale."""
    body, _, scale = text.partition("*")
    c = float(scale) if scale else 1.0
    head, _, arg = body.strip().partition(":")
    if head == "z":
        f = ClosedForm("identity")
    elif head == "log":
        f = ClosedForm("neglog")
    elif head == "zero":
        f = ClosedForm("zero")
    elif head == "poly":
        f = PowerSeries([complex(x) for x in arg.split(",")])
    elif head == "factorial":
        f = Lacunary(np.ones(int(arg)), factorial_exponents(int(arg)), label="factorial")
    elif head == "superlacunary":
        f = Lacunary(np.ones(int(arg)), superlacunary_exponents(int(arg)), label="superlacunary")
    elif head == "lacunary-little":
        f = little_bloch_lacunary(int(arg))
    else:
        raise ValueError(f"unknown function spec {text!r}")
    return f if c == 1.0 else f.scaled(c)
