"""Closed catalog of step/delay/perturbation laws with exact moments.

Each law knows its mean, variance, cdf and integrated cdf in closed form, so
normalizations and centerings built from it are exact rather than estimated.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError

_ARITY = {
    "deterministic": 1,  # value
    "exponential": 1,    # rate
    "gamma": 2,          # shape, scale
    "uniform": 2,        # low, high
    "lognormal": 2,      # mu, sigma of log
    "pareto2": 0,        # density 2 x^-3 on [1, inf): tail index exactly 2
}
_LAW_RE = re.compile(r"^\s*(\w+)\s*(?:\(([^)]*)\))?\s*$")


@dataclass(frozen=True)
class Law:
    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in _ARITY:
            raise DomainError(f"unknown law {self.kind!r}; known: {sorted(_ARITY)}")
        params = tuple(float(p) for p in self.params)
        if len(params) != _ARITY[self.kind]:
            raise DomainError(f"law {self.kind} takes {_ARITY[self.kind]} parameter(s), got {len(params)}")
        object.__setattr__(self, "params", params)
        k, p = self.kind, params
        if k == "deterministic" and p[0] < 0:
            raise DomainError("deterministic law must be nonnegative")
        if k == "exponential" and p[0] <= 0:
            raise DomainError("exponential rate must be positive")
        if k == "gamma" and (p[0] <= 0 or p[1] <= 0):
            raise DomainError("gamma shape and scale must be positive")
        if k == "uniform" and not 0 <= p[0] < p[1]:
            raise DomainError("uniform law needs 0 <= low < high")
        if k == "lognormal" and p[1] <= 0:
            raise DomainError("lognormal sigma must be positive")

    @classmethod
    def parse(cls, text):
        m = _LAW_RE.match(text)
        if not m:
            raise DomainError(f"cannot parse law {text!r}")
        args = [a for a in (m.group(2) or "").split(",") if a.strip()]
        try:
            params = tuple(float(a) for a in args)
        except ValueError:
            raise DomainError(f"cannot parse law {text!r}") from None
        return cls(m.group(1), params)

    def __str__(self):
        return f"{self.kind}({', '.join(f'{p:g}' for p in self.params)})"

    @property
    def mean(self):
        k, p = self.kind, self.params
        if k == "deterministic":
            return p[0]
        if k == "exponential":
            return 1.0 / p[0]
        if k == "gamma":
            return p[0] * p[1]
        if k == "uniform":
            return 0.5 * (p[0] + p[1])
        if k == "lognormal":
            return math.exp(p[0] + 0.5 * p[1] ** 2)
        return 2.0

    @property
    def var(self):
        k, p = self.kind, self.params
        if k == "deterministic":
            return 0.0
        if k == "exponential":
            return 1.0 / p[0] ** 2
        if k == "gamma":
            return p[0] * p[1] ** 2
        if k == "uniform":
            return (p[1] - p[0]) ** 2 / 12.0
        if k == "lognormal":
            return math.expm1(p[1] ** 2) * math.exp(2 * p[0] + p[1] ** 2)
        return math.inf

    @property
    def strictly_positive(self):
        """True when P(X > 0) = 1."""
        if self.kind == "deterministic":
            return self.params[0] > 0
        return True

    def sample(self, rng, size):
        k, p = self.kind, self.params
        if k == "deterministic":
            return np.full(size, p[0])
        if k == "exponential":
            return rng.exponential(1.0 / p[0], size)
        if k == "gamma":
            return rng.gamma(p[0], p[1], size)
        if k == "uniform":
            return rng.uniform(p[0], p[1], size)
        if k == "lognormal":
            return rng.lognormal(p[0], p[1], size)
        return (1.0 - rng.random(size)) ** -0.5

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        k, p = self.kind, self.params
        if k == "deterministic":
            return (x >= p[0]).astype(float)
        if k == "exponential":
            return -np.expm1(-p[0] * np.clip(x, 0, None))
        if k == "gamma":
            return special.gammainc(p[0], np.clip(x, 0, None) / p[1])
        if k == "uniform":
            return np.clip((x - p[0]) / (p[1] - p[0]), 0.0, 1.0)
        if k == "lognormal":
            with np.errstate(divide="ignore"):
                z = (np.log(np.clip(x, 0, None)) - p[0]) / p[1]
            return special.ndtr(z)
        return np.where(x >= 1, 1.0 - np.clip(x, 1, None) ** -2.0, 0.0)

    def integrated_cdf(self, t):
        """int_0^t F(y) dy = t - E min(X, t)."""
        t = np.asarray(t, dtype=float)
        k, p = self.kind, self.params
        tc = np.clip(t, 0, None)
        if k == "deterministic":
            return np.clip(tc - p[0], 0, None)
        if k == "exponential":
            lam = p[0]
            return tc + np.expm1(-lam * tc) / lam
        if k == "gamma":
            a, s = p
            # E min(X, t) = a s P(a+1, t/s) + t (1 - P(a, t/s))
            emin = a * s * special.gammainc(a + 1, tc / s) + tc * special.gammaincc(a, tc / s)
            return tc - emin
        if k == "uniform":
            lo, hi = p
            inside = (np.clip(tc, lo, hi) - lo) ** 2 / (2 * (hi - lo))
            return inside + np.clip(tc - hi, 0, None)
        if k == "lognormal":
            mu, sg = p
            with np.errstate(divide="ignore"):
                lt = np.log(tc)
            emin = (math.exp(mu + 0.5 * sg**2) * special.ndtr((lt - mu - sg**2) / sg)
                    + tc * special.ndtr(-(lt - mu) / sg))
            return tc - emin
        return np.where(tc >= 1, tc - 2.0 + 1.0 / np.clip(tc, 1, None), 0.0)


DETERMINISTIC_ZERO = Law("deterministic", (0.0,))
