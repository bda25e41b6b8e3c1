"""Weights on the disc, represented through their logarithm.

Every weight stores ``exponent`` and ``log_scale`` so that powers and
positive multiples never go through a division or an overflowing ``exp``:
``log w = exponent * base_log(z) + log_scale``.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import os
from typing import Callable

import numpy as np

from ..bloch.functions import AnalyticFunction
from ..geometry import as_complex, mobius_apply, one_minus_abs2


class Weight:
    kind = "weight"

    def __init__(self):
        self.exponent = 1.0
        self.log_scale = 0.0

    # subclasses
    def base_log(self, z) -> np.ndarray:
        raise NotImplementedError

    def base_params(self) -> dict:
        return {}

    # public API
    def log_eval(self, z) -> np.ndarray:
        z = as_complex(z)
        base = self.base_log(z)
        if self.exponent == 0.0:
            base = np.zeros_like(base, dtype=float)
        out = self.exponent * base
        if self.log_scale:
            out = out + self.log_scale
        return out

    def __call__(self, z):
        return np.exp(self.log_eval(z))

    def power(self, c: float) -> "Weight":
        """``w**c``; ``power(-1)`` is the inverse weight."""
        out = copy.copy(self)
        out.exponent = self.exponent * c
        out.log_scale = self.log_scale * c
        return out

    @property
    def inverse(self) -> "Weight":
        return self.power(-1.0)

    def scaled(self, c: float) -> "Weight":
        """``c * w`` for ``c > 0``."""
        if not c > 0:
            raise ValueError("weights can only be scaled by positive constants")
        out = copy.copy(self)
        out.log_scale = self.log_scale + math.log(c)
        return out

    def unscaled(self) -> "Weight":
        if self.log_scale == 0.0:
            return self
        out = copy.copy(self)
        out.log_scale = 0.0
        return out

    def params(self) -> dict:
        p = {"kind": self.kind, "exponent": self.exponent, "log_scale": self.log_scale}
        p.update(self.base_params())
        return p

    def fingerprint(self) -> str:
        payload = json.dumps(self.params(), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def closed_form_log_average(self, m: float) -> float | None:
        """Log of the exact box average over a Carleson square of length ``m``, if known."""
        return None

    @property
    def support_radius(self) -> float:
        return 1.0

    def __repr__(self):
        return f"{type(self).__name__}({self.params()})"


class RadialPower(Weight):
    """``(1 - |z|^2)^alpha``."""

    kind = "radial-power"

    def __init__(self, alpha: float):
        super().__init__()
        self.alpha = float(alpha)

    @property
    def effective_alpha(self) -> float:
        return self.alpha * self.exponent

    def base_log(self, z):
        if self.alpha == 0.0:
            return np.zeros(np.shape(z))
        return self.alpha * np.log(one_minus_abs2(z))

    def base_params(self):
        return {"alpha": self.alpha}

    def closed_form_log_average(self, m):
        # average of (1-r^2)^a over Q is t^a/(a+1), t = 1-(1-m)^2; infinite iff a <= -1
        a = self.effective_alpha
        if a <= -1.0:
            return math.inf
        t = m * (2.0 - m)
        return a * math.log(t) - math.log1p(a) + self.log_scale

    def log_eval_composed(self, base: complex, z):
        # 1 - |phi_a(z)|^2 = (1-|a|^2)(1-|z|^2)/|1 - conj(a) z|^2, free of cancellation
        a = complex(base)
        val = np.log1p(-abs(a) ** 2) + np.log(one_minus_abs2(z)) - 2.0 * np.log(np.abs(1.0 - np.conj(a) * z))
        return self.effective_alpha * val + self.log_scale


def constant_weight() -> RadialPower:
    return RadialPower(0.0)


class PointPower(Weight):
    """``|xi0 - z|^s`` with ``|xi0| = 1``."""

    kind = "point-power"

    def __init__(self, s: float, xi0: complex = 1.0):
        super().__init__()
        xi0 = complex(xi0)
        if not math.isclose(abs(xi0), 1.0, abs_tol=1e-12):
            raise ValueError("the singular point must lie on the unit circle")
        self.s = float(s)
        self.xi0 = xi0

    def base_log(self, z):
        with np.errstate(divide="ignore"):
            return self.s * np.log(np.abs(self.xi0 - z))

    def base_params(self):
        return {"s": self.s, "xi0": [self.xi0.real, self.xi0.imag]}


class ExpHarmonic(Weight):
    """``exp(Re(scale * g(z)))`` for an analytic ``g``."""

    kind = "exp-harmonic"

    def __init__(self, g: AnalyticFunction, scale: complex = 1.0):
        super().__init__()
        self.g = g
        self.scale = complex(scale)

    def base_log(self, z):
        return np.real(self.scale * self.g.eval(z))

    def base_params(self):
        return {"g": self.g.params(), "scale": [self.scale.real, self.scale.imag]}


class LogFunction(Weight):
    """Weight given by an arbitrary vectorized callable ``z -> log w(z)``."""

    kind = "log-function"

    def __init__(self, fn: Callable, name: str = "custom", bounded_by: float | None = None):
        super().__init__()
        self.fn = fn
        self.name = name
        self.bounded_by = bounded_by

    def base_log(self, z):
        return np.asarray(self.fn(z), dtype=float)

    def base_params(self):
        return {"name": self.name}


def arctan_re_weight() -> LogFunction:
    """``log w = arctan(Re z)``, a bounded log-weight."""
    return LogFunction(lambda z: np.arctan(np.real(z)), "arctan-re", bounded_by=math.pi / 2)


class Composed(Weight):
    """``w o phi_a`` with ``phi_a(z) = (a - z)/(1 - conj(a) z)``."""

    kind = "composed"

    def __init__(self, w: Weight, base: complex):
        super().__init__()
        self.w = w
        self.base = complex(base)
        if abs(self.base) >= 1.0:
            raise ValueError("composition base must lie in the disc")

    def base_log(self, z):
        special = getattr(self.w, "log_eval_composed", None)
        if special is not None:
            return special(self.base, z)
        return self.w.log_eval(mobius_apply(self.base, z))

    def base_params(self):
        return {"inner": self.w.params(), "base": [self.base.real, self.base.imag]}

    def closed_form_log_average(self, m):
        if self.base == 0 and isinstance(self.w, RadialPower) and self.exponent == 1.0:
            # phi_0 is z -> -z, radial weights are unchanged
            la = self.w.closed_form_log_average(m)
            return None if la is None else la + self.log_scale
        return None


class GridSampled(Weight):
    """Log-weight sampled on a polar grid, bilinear in ``(r, theta)``.

    Evaluation beyond the largest stored radius is refused.
    """

    kind = "grid"

    def __init__(self, radii, log_values, normalization: str = "log", source: str | None = None):
        super().__init__()
        self.radii = np.asarray(radii, dtype=float)
        self.values = np.asarray(log_values, dtype=float)
        if self.radii.ndim != 1 or len(self.radii) < 2 or np.any(np.diff(self.radii) <= 0):
            raise ValueError("grid radii must be a strictly increasing list of length >= 2")
        if self.radii[0] < 0 or self.radii[-1] >= 1:
            raise ValueError("grid radii must lie in [0, 1)")
        if self.values.shape[0] != len(self.radii) or self.values.ndim != 2:
            raise ValueError("log_values must have shape (len(radii), angle_count)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid log-values must be finite")
        self.normalization = normalization
        self.source = source

    @property
    def angle_count(self) -> int:
        return self.values.shape[1]

    @property
    def support_radius(self) -> float:
        return float(self.radii[-1])

    def base_log(self, z):
        z = np.asarray(z, dtype=complex)
        r = np.abs(z)
        if np.any(r > self.radii[-1]) or np.any(r < self.radii[0]):
            raise ValueError(
                f"grid weight evaluated outside its stored radii [{self.radii[0]}, {self.radii[-1]}]"
            )
        na = self.angle_count
        pos = np.mod(np.angle(z), 2 * math.pi) / (2 * math.pi) * na
        j0 = np.floor(pos).astype(int) % na
        j1 = (j0 + 1) % na
        ft = pos - np.floor(pos)
        i0 = np.clip(np.searchsorted(self.radii, r, side="right") - 1, 0, len(self.radii) - 2)
        fr = (r - self.radii[i0]) / (self.radii[i0 + 1] - self.radii[i0])
        v = self.values
        lo = (1 - ft) * v[i0, j0] + ft * v[i0, j1]
        hi = (1 - ft) * v[i0 + 1, j0] + ft * v[i0 + 1, j1]
        return (1 - fr) * lo + fr * hi

    def base_params(self):
        digest = hashlib.sha256(self.values.tobytes() + self.radii.tobytes()).hexdigest()[:16]
        return {"radii": len(self.radii), "angles": self.angle_count, "data_sha256": digest}

    def save(self, path: str | os.PathLike) -> None:
        header = {
            "radii": self.radii.tolist(),
            "angle_count": self.angle_count,
            "normalization": self.normalization,
        }
        with open(path, "wb") as fh:
            fh.write(json.dumps(header).encode() + b"\n")
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path: str | os.PathLike) -> "GridSampled":
        with open(path, "rb") as fh:
            header = json.loads(fh.readline())
            raw = fh.read()
        radii = header["radii"]
        na = int(header["angle_count"])
        data = np.frombuffer(raw, dtype="<f8")
        if data.size != len(radii) * na:
            raise ValueError(f"grid file {path} holds {data.size} values, expected {len(radii) * na}")
        return cls(radii, data.reshape(len(radii), na), header.get("normalization", "log"), str(path))

    @classmethod
    def from_weight(cls, w: Weight, radii, angle_count: int) -> "GridSampled":
        radii = np.asarray(radii, dtype=float)
        th = 2 * math.pi * np.arange(angle_count) / angle_count
        z = radii[:, None] * np.exp(1j * th)[None, :]
        return cls(radii, w.log_eval(z))


def parse_weight(text: str) -> Weight:
    """Parse weight specs used by the CLI.

    ``const``, ``radial:a``, ``radial-log:c`` (log w = c log(1-|z|^2)),
    ``point:s[,theta]``, ``exp-harmonic:<function>[,scale]``, ``grid:path``,
    ``arctan-re``.
    """
    from ..bloch.functions import parse_function

    head, _, arg = text.strip().partition(":")
    if head == "const":
        return constant_weight()
    if head in ("radial", "radial-log"):
        return RadialPower(float(arg))
    if head == "point":
        parts = arg.split(",")
        theta = float(parts[1]) if len(parts) > 1 else 0.0
        return PointPower(float(parts[0]), complex(math.cos(theta), math.sin(theta)))
    if head == "exp-harmonic":
        fn, _, scale = arg.partition(",")
        return ExpHarmonic(parse_function(fn), complex(scale) if scale else 1.0)
    if head == "grid":
        return GridSampled.load(arg)
    if head == "arctan-re":
        return arctan_re_weight()
    raise ValueError(f"unknown weight spec {text!r}")
