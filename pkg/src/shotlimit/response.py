"""Regularly varying response functions h of index beta >= 0.

Two families are available::

    const(c):      h(t) = c t^beta
    log_power(p):  h(t) = t^beta (log(e + t))^p

optionally perturbed on [0, t0] by a piecewise-linear prefix that vanishes at
t0. Construction checks the hypotheses of the limit theorem (eventual
monotonicity, h -> inf when beta = 0) so a verification run cannot silently
use an inadmissible h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AssumptionError, DomainError

FAMILIES = ("const", "log_power")
RV_PROBE_T = 1e6


@dataclass(frozen=True)
class ResponseFn:
    beta: float
    family: str = "const"
    param: float = 1.0
    prefix: tuple = ()

    def __post_init__(self):
        if not math.isfinite(self.beta) or self.beta < 0:
            raise DomainError(f"beta must be >= 0, got {self.beta}")
        if self.family not in FAMILIES:
            raise DomainError(f"unknown response family {self.family!r}")
        if self.family == "const" and self.param <= 0:
            raise DomainError(f"const family needs c > 0, got {self.param}")
        knots = tuple((float(t), float(v)) for t, v in self.prefix)
        object.__setattr__(self, "prefix", knots)
        if knots:
            ts = [t for t, _ in knots]
            if len(knots) < 2 or ts[0] != 0 or any(b <= a for a, b in zip(ts, ts[1:])):
                raise DomainError("prefix knots need increasing times starting at 0")
            if knots[-1][1] != 0:
                raise DomainError("prefix perturbation must vanish at its last knot")
        if self.beta == 0:
            if self.family == "const" and knots:
                # h constant beyond t0 with a prefix: neither h -> inf nor globally monotone
                raise AssumptionError("beta = 0 needs h -> inf, or a globally nondecreasing h")
            if self.family == "log_power" and self.param <= 0:
                raise AssumptionError("beta = 0 needs h -> inf, i.e. log_power with p > 0")
        self._check_monotone_tail()

    @property
    def t0(self):
        return self.prefix[-1][0] if self.prefix else 0.0

    def _check_monotone_tail(self):
        t0 = self.t0
        grid = np.linspace(t0, 10 * t0 + 1e3, 10_000)
        vals = self(grid)
        if np.any(np.diff(vals) < -1e-12 * np.abs(vals[1:])):
            raise AssumptionError("h is not nondecreasing beyond the prefix")
        if np.any(vals[1:] <= 0):
            raise AssumptionError("h must be positive beyond the prefix")

    def base(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == "const":
            return self.param * t**self.beta
        return t**self.beta * np.log(math.e + t) ** self.param

    def __call__(self, t):
        return self.eval(t)

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("response functions are evaluated at t >= 0 only")
        out = self.base(t)
        if self.prefix:
            kt, kv = zip(*self.prefix)
            out = out + np.where(t <= kt[-1], np.interp(t, kt, kv), 0.0)
        return out if out.ndim else float(out)

    def derivative(self, t):
        """h'(t) for t >= 0 (right derivative at prefix knots; inf at 0 when beta < 1)."""
        t = np.asarray(t, dtype=float)
        b, p = self.beta, self.param
        pos = t > 0
        tp = np.where(pos, t, 1.0)
        if b == 0:
            power = np.zeros_like(t)
        else:
            power = np.where(pos, b * tp ** (b - 1), np.inf if b < 1 else float(b == 1))
        if self.family == "const":
            out = p * power
        else:
            lg = np.log(math.e + t)
            out = power * lg**p + t**b * p * lg ** (p - 1) / (math.e + t)
        if self.prefix:
            kt, kv = map(np.asarray, zip(*self.prefix))
            slopes = np.diff(kv) / np.diff(kt)
            idx = np.clip(np.searchsorted(kt, t, side="right") - 1, 0, slopes.size - 1)
            out = out + np.where(t < kt[-1], slopes[idx], 0.0)
        return out if out.ndim else float(out)

    def is_nondecreasing_on(self, upper, n=20_001):
        grid = np.linspace(0.0, upper, n)
        return bool(np.all(np.diff(self(grid)) >= -1e-12))

    def describe(self):
        out = {"beta": self.beta, "family": self.family, "param": self.param}
        if self.prefix:
            out["prefix"] = [list(k) for k in self.prefix]
        return out


def check_regular_variation(h, t=RV_PROBE_T):
    """Index estimate log2(h(2t)/h(t)); raises AssumptionError on mismatch with beta.

    The tolerance is 0.01 for pure powers. For log_power it is 0.1 per unit of
    |p| (at least 0.1): the slowly varying factor still contributes about
    0.07 |p| at t = 1e6.
    """
    est = float(np.log2(h(2 * t) / h(t)))
    if h.family == "const":
        tol = 0.01
    else:
        tol = 0.1 * max(1.0, abs(h.param))
    if abs(est - h.beta) > tol:
        raise AssumptionError(
            f"regular-variation index estimate {est:.4f} does not match beta={h.beta} (tol {tol})"
        )
    return est
