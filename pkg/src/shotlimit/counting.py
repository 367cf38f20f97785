"""Shot-time generators and their normalization/centering triples.

Five models are covered:

* ``random_walk``       delayed standard random walk S_k = S_0 + xi_1 + ... + xi_k
* ``perturbed_walk``    S_n = xi_1 + ... + xi_{n-1} + eta_n
* ``long_memory_walk``  S_n - S_{n-1} = xi_n exp(theta_n), theta fractional Gaussian noise
* ``branching``         generation-k positions of a branching random walk
* ``inhom_poisson``     Poisson process with mean function c t^w

For each model :func:`normalization_for` returns the exact (a, b, driver)
triple under which (N(t.) - b(t.)) / a(t) converges to the driver.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from ._rng import as_rng
from .errors import BudgetError, DomainError, UnsupportedModelError
from .gauss_paths import Driver, sample_fgn_sequence
from .laws import DETERMINISTIC_ZERO, Law

MODELS = ("random_walk", "perturbed_walk", "long_memory_walk", "branching", "inhom_poisson")
BRANCHING_BUDGET = 1e7
# E e^theta and E theta e^theta for a unit-variance centered Gaussian theta
_LOGNORMAL_FACTOR = math.exp(0.5)


@dataclass(frozen=True)
class ShotTimes:
    horizon: float
    times: np.ndarray
    model_tag: str = ""

    def __post_init__(self):
        t = np.sort(np.asarray(self.times, dtype=float).ravel())
        if t.size and (t[0] < 0 or t[-1] > self.horizon):
            raise DomainError("shot times must lie in [0, horizon]")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    def __len__(self):
        return self.times.size

    def count(self, t):
        return count(self, t)


def count(shots, t):
    """N(t): number of shots at or before ``t``."""
    if np.any(np.asarray(t) > shots.horizon):
        raise DomainError(f"t={t} lies beyond the realization horizon {shots.horizon}")
    res = np.searchsorted(shots.times, t, side="right")
    return int(res) if np.ndim(res) == 0 else res


def _renewal_points(law, span, rng):
    """Strict renewal points xi_1, xi_1 + xi_2, ... not exceeding ``span``."""
    if span < 0:
        return np.empty(0)
    mu, var = law.mean, law.var
    spread = math.sqrt(span * var / mu**3) if math.isfinite(var) else span / mu
    chunk = int(span / mu + 4 * spread) + 16
    pieces, last = [], 0.0
    while True:
        s = last + np.cumsum(law.sample(rng, chunk))
        keep = s[s <= span]
        pieces.append(keep)
        if keep.size < s.size:
            break
        last = s[-1]
    return np.concatenate(pieces)


def _check_increment(law, strict=False):
    if law.mean <= 0:
        raise DomainError(f"increment law {law} must have positive mean")
    if strict and not law.strictly_positive:
        raise DomainError(f"increment law {law} must be strictly positive")


def gen_random_walk(increment, horizon, seed, delay=DETERMINISTIC_ZERO):
    """Delayed standard random walk; zero-delayed when ``delay`` is the point mass at 0."""
    _check_increment(increment)
    if horizon < 0:
        raise DomainError("horizon must be nonnegative")
    rng = as_rng(seed)
    s0 = float(delay.sample(rng, 1)[0])
    if s0 > horizon:
        return ShotTimes(horizon, np.empty(0), "random_walk")
    pts = s0 + _renewal_points(increment, horizon - s0, rng)
    pts = pts[pts <= horizon]
    return ShotTimes(horizon, np.concatenate([[s0], pts]), "random_walk")


def gen_perturbed_walk(increment, perturbation, horizon, seed):
    """Perturbed random walk with independent xi ~ ``increment``, eta ~ ``perturbation``.

    Generation stops once xi_1 + ... + xi_{n-1} exceeds the horizon; since
    eta >= 0 no later S_n can come back below it.
    """
    _check_increment(increment)
    if horizon < 0:
        raise DomainError("horizon must be nonnegative")
    rng = as_rng(seed)
    partial = np.concatenate([[0.0], _renewal_points(increment, horizon, rng)])
    s = partial + perturbation.sample(rng, partial.size)
    return ShotTimes(horizon, s[s <= horizon], "perturbed_walk")


def gen_long_memory_walk(increment, d, horizon, seed, theta=None):
    """Random walk with steps xi_n exp(theta_n), theta unit-variance fGn with H = d + 1/2.

    ``theta`` may be passed explicitly (e.g. zeros) to inject a fixed noise
    sequence; it must then be long enough to cross the horizon.
    """
    if not 0 < d < 0.5:
        raise DomainError(f"memory parameter d must lie in (0, 1/2), got {d}")
    _check_increment(increment)
    rng = as_rng(seed)
    m1 = increment.mean * _LOGNORMAL_FACTOR
    n = int(3 * horizon / m1) + 100
    while True:
        if theta is None:
            th = sample_fgn_sequence(d, n, rng)
        else:
            th = np.asarray(theta, dtype=float)[:n]
            n = th.size
        s = np.cumsum(increment.sample(rng, n) * np.exp(th))
        if s[-1] > horizon:
            break
        if theta is not None:
            raise DomainError("injected theta sequence is too short to reach the horizon")
        # a shortfall has negligible probability at this length; redraw longer
        n *= 2
    return ShotTimes(horizon, np.concatenate([[0.0], s[s <= horizon]]), "long_memory_walk")


def branching_expected_size(increment, k, horizon):
    return horizon**k / (math.factorial(k) * increment.mean**k)


def gen_branching_gen_k(increment, k, horizon, seed):
    """Positions of generation-k individuals not exceeding ``horizon``.

    Generation 1 sits at the renewal points S_1, S_2, ...; every individual at
    p has children at p + S'_1, p + S'_2, ... for an independent copy S'. Lineages
    are cut at the horizon, which is exact because steps are strictly positive.
    """
    if int(k) != k or k < 2:
        raise DomainError(f"generation k must be an integer >= 2, got {k}")
    _check_increment(increment, strict=True)
    if horizon < 0:
        raise DomainError("horizon must be nonnegative")
    k = int(k)
    expected = branching_expected_size(increment, k, horizon)
    if expected > BRANCHING_BUDGET:
        raise BudgetError(
            f"expected generation-{k} population {expected:.3g} exceeds budget {BRANCHING_BUDGET:.0e}"
        )
    rng = as_rng(seed)
    pos = _renewal_points(increment, horizon, rng)
    for _ in range(k - 1):
        children, cur = [], pos
        while cur.size:
            cur = cur + increment.sample(rng, cur.size)
            cur = cur[cur <= horizon]
            children.append(cur)
        pos = np.concatenate(children) if children else np.empty(0)
    return ShotTimes(horizon, pos, "branching")


def gen_inhom_poisson(c, w, horizon, seed):
    """Poisson process with E N(t) = c t^w, realized as N*(c t^w) for unit-rate N*."""
    if c <= 0 or w <= 0:
        raise DomainError(f"c and w must be positive, got c={c}, w={w}")
    if horizon < 0:
        raise DomainError("horizon must be nonnegative")
    rng = as_rng(seed)
    total = c * horizon**w
    n = rng.poisson(total)
    s = rng.random(n) * total
    times = np.minimum((s / c) ** (1.0 / w), horizon)
    return ShotTimes(horizon, times, "inhom_poisson")


@dataclass(frozen=True)
class ModelSpec:
    """Model name plus parameters; derived constants are exposed as properties."""

    model: str
    increment: Optional[Law] = None
    delay: Law = DETERMINISTIC_ZERO
    perturbation: Optional[Law] = None
    d: Optional[float] = None
    k: Optional[int] = None
    c: Optional[float] = None
    w: Optional[float] = None

    def __post_init__(self):
        m = self.model
        if m not in MODELS:
            raise DomainError(f"unknown model {m!r}; known: {MODELS}")
        if m == "inhom_poisson":
            if self.c is None or self.w is None or self.c <= 0 or self.w <= 0:
                raise DomainError("inhom_poisson needs c > 0 and w > 0")
            return
        if self.increment is None:
            raise DomainError(f"{m} needs an increment law")
        _check_increment(self.increment, strict=(m == "branching"))
        var = self.increment.var
        if m == "random_walk":
            if not (var > 0):
                raise DomainError("random_walk needs a nondegenerate increment law")
        elif m == "perturbed_walk":
            if not (0 < var < math.inf):
                raise DomainError("perturbed_walk needs Var xi in (0, inf)")
            if self.perturbation is None:
                raise DomainError("perturbed_walk needs a perturbation law")
        elif m == "long_memory_walk":
            if self.d is None or not 0 < self.d < 0.5:
                raise DomainError("long_memory_walk needs d in (0, 1/2)")
        elif m == "branching":
            if self.k is None or int(self.k) != self.k or self.k < 2:
                raise DomainError("branching needs an integer generation k >= 2")
            if not (0 < var < math.inf):
                raise DomainError("branching needs Var xi in (0, inf)")

    @property
    def mu(self):
        return self.increment.mean

    @property
    def sigma2(self):
        return self.increment.var

    @property
    def m1(self):
        return self.increment.mean * _LOGNORMAL_FACTOR

    @property
    def m2(self):
        return self.increment.mean * _LOGNORMAL_FACTOR

    @property
    def driver(self):
        m = self.model
        if m == "long_memory_walk":
            return Driver("fbm", self.d + 0.5)
        if m == "branching":
            return Driver("rl", self.k - 1)
        if m == "inhom_poisson":
            return Driver("tcbm", self.w)
        return Driver("bm")

    def describe(self):
        out = {"model": self.model}
        for name in ("increment", "delay", "perturbation"):
            v = getattr(self, name)
            if v is not None and (name != "delay" or self.model == "random_walk"):
                out[name] = str(v)
        for name in ("d", "k", "c", "w"):
            v = getattr(self, name)
            if v is not None:
                out[name] = v
        return out


def simulate_shots(spec, horizon, seed):
    """Dispatch to the generator for ``spec.model``."""
    m = spec.model
    if m == "random_walk":
        return gen_random_walk(spec.increment, horizon, seed, delay=spec.delay)
    if m == "perturbed_walk":
        return gen_perturbed_walk(spec.increment, spec.perturbation, horizon, seed)
    if m == "long_memory_walk":
        return gen_long_memory_walk(spec.increment, spec.d, horizon, seed)
    if m == "branching":
        return gen_branching_gen_k(spec.increment, spec.k, horizon, seed)
    return gen_inhom_poisson(spec.c, spec.w, horizon, seed)


# -- centering descriptors ----------------------------------------------------


@dataclass(frozen=True)
class Centering:
    """Nondecreasing centering b.

    ``value`` evaluates b; ``density`` is b' when b is absolutely continuous on
    (0, inf) (None otherwise); ``atom0`` is b(0), a point mass at the origin.
    """

    value: Callable
    density: Optional[Callable] = None
    atom0: float = 0.0

    def __call__(self, t):
        return self.value(t)


def _linear(t, slope):
    return slope * np.asarray(t, dtype=float)


def _constant(t, level):
    return np.full_like(np.asarray(t, dtype=float), level)


def _power(t, coef, expo):
    return coef * np.asarray(t, dtype=float) ** expo


def _scaled_integrated_cdf(t, law, scale):
    return scale * law.integrated_cdf(t)


def _scaled_cdf(t, law, scale):
    return scale * law.cdf(t)


def _zero(t):
    return np.zeros_like(np.asarray(t, dtype=float))


ZERO_CENTERING = Centering(_zero, _zero, 0.0)


@dataclass(frozen=True)
class NormalizationTriple:
    a: Callable
    b: Centering
    driver: Driver
    gamma: float = field(default=0.5)  # regular-variation index of a


def _sqrt_linear(t, coef):
    return np.sqrt(coef * np.asarray(t, dtype=float))


def _branching_a(t, k, mu, sigma2):
    t = np.asarray(t, dtype=float)
    return np.sqrt(sigma2 * mu ** (-2 * k - 1) * t ** (2 * k - 1)) / math.factorial(k - 1)


def _pareto2_c_scalar(t):
    # c solves c^2 / (2 log c) = t; the left side increases for c > sqrt(e)
    if t <= math.e:
        raise DomainError(f"c(t) is defined for t > e only, got {t}")
    lo, hi = math.sqrt(math.e), math.sqrt(2 * t * max(math.log(t), 1.0)) + 2.0
    return optimize.bisect(lambda c: c * c / (2 * math.log(c)) - t, lo, hi, xtol=1e-12, rtol=1e-14)


def pareto2_c(t):
    """c(t) with c(t)^{-2} t L(c(t)) = 1 for L(x) = 2 log x (tail-index-2 law)."""
    if np.ndim(t) == 0:
        return _pareto2_c_scalar(float(t))
    return np.array([_pareto2_c_scalar(float(x)) for x in np.ravel(t)]).reshape(np.shape(t))


def _pareto2_a(t, mu):
    return mu**-1.5 * pareto2_c(t)


def normalization_for(spec):
    """Exact (a, b, driver) for the model in ``spec``."""
    m = spec.model
    if m in ("random_walk", "perturbed_walk"):
        mu, s2 = spec.mu, spec.sigma2
        if math.isinf(s2):
            if m == "random_walk" and spec.increment.kind == "pareto2":
                a = functools.partial(_pareto2_a, mu=mu)
            else:
                raise UnsupportedModelError(
                    "infinite-variance steps are supported only for the pareto2 law in random_walk"
                )
        else:
            a = functools.partial(_sqrt_linear, coef=s2 / mu**3)
        if m == "random_walk":
            b = Centering(functools.partial(_linear, slope=1 / mu), functools.partial(_constant, level=1 / mu))
        else:
            law = spec.perturbation
            b = Centering(
                functools.partial(_scaled_integrated_cdf, law=law, scale=1 / mu),
                functools.partial(_scaled_cdf, law=law, scale=1 / mu),
            )
        return NormalizationTriple(a, b, Driver("bm"), 0.5)
    if m == "long_memory_walk":
        d, m1, m2 = spec.d, spec.m1, spec.m2
        H = d + 0.5
        ell = H * (2 * H - 1)
        coef = (d * (2 * d + 1)) ** -0.5 * m1 ** (-1.5 - d) * m2 * math.sqrt(ell)
        a = functools.partial(_power, coef=coef, expo=H)
        b = Centering(functools.partial(_linear, slope=1 / m1), functools.partial(_constant, level=1 / m1))
        return NormalizationTriple(a, b, Driver("fbm", H), H)
    if m == "branching":
        k, mu, s2 = int(spec.k), spec.mu, spec.sigma2
        a = functools.partial(_branching_a, k=k, mu=mu, sigma2=s2)
        b = Centering(
            functools.partial(_power, coef=1 / (math.factorial(k) * mu**k), expo=k),
            functools.partial(_power, coef=1 / (math.factorial(k - 1) * mu**k), expo=k - 1),
        )
        return NormalizationTriple(a, b, Driver("rl", k - 1), k - 0.5)
    c, w = spec.c, spec.w
    a = functools.partial(_power, coef=math.sqrt(c), expo=w / 2)
    b = Centering(functools.partial(_power, coef=c, expo=w), functools.partial(_power, coef=c * w, expo=w - 1))
    return NormalizationTriple(a, b, Driver("tcbm", w), w / 2)
