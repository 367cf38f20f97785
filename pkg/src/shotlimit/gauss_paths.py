"""Gaussian driver processes and exact path synthesis.

Four drivers are supported, each identified by a :class:`Driver`:

* ``bm``            standard Brownian motion, cov min(u, v)
* ``fbm(H)``        fractional Brownian motion with Hurst index H
* ``rl(rho)``       Riemann-Liouville process, cov int_0^{u^v} (u-y)^rho (v-y)^rho dy
* ``tcbm(w)``       time-changed Brownian motion B(t^w), cov min(u, v)^w

plus ``custom`` drivers built from a user covariance function.

The reference sampler factorizes the covariance matrix on the nonzero grid
points (Cholesky, with at most 1e-10 diagonal jitter). Fast paths exist for
bm/tcbm (independent increments) and fbm (circulant embedding of fractional
Gaussian noise); both are exact in law and are checked against the reference
sampler in the test-suite.
"""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, linalg

from ._rng import as_rng, path_rng
from .errors import DomainError, NumericalError

MAX_JITTER = 1e-10
CHOLESKY_MAX_POINTS = 2048
FGN_CHOLESKY_MAX = 4096
RL_QUAD_TOL = 1e-10


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < ... < t_{n-1} = t_max."""

    t_max: float
    n_points: int

    def __post_init__(self):
        if not np.isfinite(self.t_max) or self.t_max <= 0:
            raise DomainError(f"t_max must be positive, got {self.t_max}")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise DomainError(f"n_points must be an integer >= 2, got {self.n_points}")
        object.__setattr__(self, "n_points", int(self.n_points))
        object.__setattr__(self, "t_max", float(self.t_max))

    @classmethod
    def dyadic(cls, m, t_max=1.0):
        return cls(t_max, 2**m + 1)

    @property
    def step(self):
        return self.t_max / (self.n_points - 1)

    @property
    def values(self):
        return np.linspace(0.0, self.t_max, self.n_points)


def _check_time(*ts):
    for t in ts:
        if t < 0:
            raise DomainError(f"time arguments must be nonnegative, got {t}")


def bm_cov(u, v):
    _check_time(u, v)
    return float(min(u, v))


def fbm_cov(H, u, v):
    if not 0 < H < 1:
        raise DomainError(f"Hurst index must lie in (0, 1), got {H}")
    _check_time(u, v)
    return 0.5 * (u ** (2 * H) + v ** (2 * H) - abs(u - v) ** (2 * H))


def rl_cov(rho, u, v):
    """E R_rho(u) R_rho(v) = int_0^{min(u,v)} (u-y)^rho (v-y)^rho dy.

    Closed form on the diagonal, adaptive quadrature otherwise. For rho < 0 the
    endpoint singularity is removed by the substitution x = s^{1/(rho+1)}, which
    turns x^rho dx into ds/(rho+1).
    """
    if rho <= -0.5:
        raise DomainError(f"rl exponent must exceed -1/2, got {rho}")
    _check_time(u, v)
    lo, hi = (u, v) if u <= v else (v, u)
    if lo == 0:
        return 0.0
    if lo == hi:
        return lo ** (2 * rho + 1) / (2 * rho + 1)
    if rho == 0:
        return float(lo)
    gap = hi - lo
    if rho < 0:
        q = 1.0 / (rho + 1.0)
        val, _ = integrate.quad(
            lambda s: (gap + s**q) ** rho, 0.0, lo ** (rho + 1.0),
            epsabs=RL_QUAD_TOL, epsrel=RL_QUAD_TOL, limit=200,
        )
        return val * q
    val, _ = integrate.quad(
        lambda x: x**rho * (gap + x) ** rho, 0.0, lo,
        epsabs=RL_QUAD_TOL, epsrel=RL_QUAD_TOL, limit=200,
    )
    return val


def timechanged_cov(w, u, v):
    if w <= 0:
        raise DomainError(f"time-change exponent must be positive, got {w}")
    _check_time(u, v)
    return float(min(u, v) ** w)


_KINDS = ("bm", "fbm", "rl", "tcbm", "custom")
_LABEL_RE = re.compile(r"^\s*(\w+)\s*(?:\(\s*([^)]*)\s*\))?\s*$")


@dataclass(frozen=True)
class Driver:
    """A centered Gaussian driver W with W(0) = 0.

    ``param`` is H for fbm, rho for rl and w for tcbm. A custom driver carries
    its own covariance function and nominal Holder index.
    """

    kind: str
    param: Optional[float] = None
    cov_fn: Optional[Callable] = field(default=None, compare=False, repr=False)
    holder: Optional[float] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown driver kind {self.kind!r}")
        if self.kind == "bm":
            return
        if self.kind == "custom":
            if self.cov_fn is None or self.holder is None:
                raise DomainError("custom driver needs cov_fn and holder")
            return
        if self.param is None:
            raise DomainError(f"driver {self.kind} needs a parameter")
        p = float(self.param)
        object.__setattr__(self, "param", p)
        if self.kind == "fbm" and not 0 < p < 1:
            raise DomainError(f"Hurst index must lie in (0, 1), got {p}")
        if self.kind == "rl" and p <= -0.5:
            raise DomainError(f"rl exponent must exceed -1/2, got {p}")
        if self.kind == "tcbm" and p <= 0:
            raise DomainError(f"time-change exponent must be positive, got {p}")

    @classmethod
    def parse(cls, text):
        """Parse labels such as ``bm``, ``fbm(0.7)``, ``rl(1)``, ``tcbm(2)``."""
        m = _LABEL_RE.match(text)
        if not m or m.group(1) not in _KINDS[:-1]:
            raise DomainError(f"cannot parse driver {text!r}")
        kind, arg = m.group(1), m.group(2)
        if kind == "bm":
            if arg:
                raise DomainError("bm takes no parameter")
            return cls("bm")
        if not arg:
            raise DomainError(f"driver {kind} needs a parameter")
        return cls(kind, float(arg))

    @property
    def label(self):
        if self.kind == "bm":
            return "bm"
        if self.kind == "custom":
            return "custom"
        return f"{self.kind}({self.param:g})"

    @property
    def holder_index(self):
        """Supremum of the local Holder exponents of the paths."""
        if self.kind == "bm":
            return 0.5
        if self.kind == "fbm":
            return self.param
        if self.kind == "rl":
            return min(1.0, 0.5 + self.param)
        if self.kind == "tcbm":
            # near 0, B(t^w) behaves like t^{w/2}
            return min(0.5, 0.5 * self.param)
        return float(self.holder)

    def cov(self, u, v):
        if self.kind == "bm":
            return bm_cov(u, v)
        if self.kind == "fbm":
            return fbm_cov(self.param, u, v)
        if self.kind == "rl":
            return rl_cov(self.param, u, v)
        if self.kind == "tcbm":
            return timechanged_cov(self.param, u, v)
        return float(self.cov_fn(u, v))

    def cov_matrix(self, times):
        """Covariance matrix over ``times`` (vectorized where a closed form exists)."""
        t = np.asarray(times, dtype=float)
        if np.any(t < 0):
            raise DomainError("covariance times must be nonnegative")
        u, v = t[:, None], t[None, :]
        if self.kind == "bm":
            return np.minimum(u, v)
        if self.kind == "fbm":
            H2 = 2 * self.param
            return 0.5 * (u**H2 + v**H2 - np.abs(u - v) ** H2)
        if self.kind == "tcbm":
            return np.minimum(u, v) ** self.param
        n = t.size
        out = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                out[i, j] = out[j, i] = self.cov(t[i], t[j])
        return out


BM = Driver("bm")


@dataclass(frozen=True)
class GaussianPath:
    """One sampled path on a grid.

    ``rho`` is the total fractional order applied on top of ``driver`` (0 for a
    raw driver path); it is what fixes the Holder index of the path.
    """

    grid: TimeGrid
    values: np.ndarray
    driver: Driver
    rho: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_points,):
            raise DomainError("path values do not match the grid")
        object.__setattr__(self, "values", vals)

    @property
    def holder_index(self):
        return min(1.0, self.driver.holder_index + self.rho)

    @property
    def label(self):
        if self.rho == 0:
            return self.driver.label
        return f"I^{self.rho:g}[{self.driver.label}]"


def _cholesky_with_jitter(cov, what):
    eye = np.eye(cov.shape[0])
    for jitter in (0.0, 1e-12, 1e-11, MAX_JITTER):
        try:
            return linalg.cholesky(cov + jitter * eye, lower=True, check_finite=True)
        except linalg.LinAlgError:
            continue
    raise NumericalError(f"covariance of {what} is not PSD after {MAX_JITTER:g} jitter")


@functools.lru_cache(maxsize=32)
def _cached_root(driver, grid):
    times = grid.values[1:]
    return _cholesky_with_jitter(
        driver.cov_matrix(times), f"{driver.label} on {grid.n_points} points in [0, {grid.t_max:g}]"
    )


def covariance_root(driver, grid):
    """Lower-triangular L with L L^T = covariance on the nonzero grid points."""
    if driver.kind == "custom":
        times = grid.values[1:]
        return _cholesky_with_jitter(driver.cov_matrix(times), f"custom driver on {grid.n_points} points")
    return _cached_root(driver, grid)


def fgn_autocov(H, k):
    """Autocovariance of unit-variance fractional Gaussian noise at lag ``k``."""
    k = np.abs(np.asarray(k, dtype=float))
    H2 = 2 * H
    return 0.5 * (np.abs(k + 1) ** H2 - 2 * k**H2 + np.abs(k - 1) ** H2)


@functools.lru_cache(maxsize=16)
def _fgn_root(H, n):
    cov = linalg.toeplitz(fgn_autocov(H, np.arange(n)))
    return _cholesky_with_jitter(cov, f"fgn(H={H:g}) of length {n}")


@functools.lru_cache(maxsize=16)
def _fgn_circulant_sqrt_eigs(H, n):
    lags = np.arange(n + 1)
    g = fgn_autocov(H, lags)
    row = np.concatenate([g, g[-2:0:-1]])  # length 2n
    eig = np.fft.fft(row).real
    if eig.min() < -1e-10 * eig.max():
        raise NumericalError(f"circulant embedding of fgn(H={H:g}, n={n}) is not PSD")
    return np.sqrt(np.clip(eig, 0.0, None) / row.size)


def _fgn_circulant(H, n, rng, size):
    sq = _fgn_circulant_sqrt_eigs(H, n)
    m = sq.size
    z = rng.standard_normal((size, m)) + 1j * rng.standard_normal((size, m))
    return np.fft.fft(sq * z, axis=-1).real[:, :n]


def sample_fgn_sequence(d, n, seed, method="auto"):
    """Stationary centered Gaussian sequence with fGn autocovariance, H = d + 1/2.

    ``method`` is ``"cholesky"`` (reference), ``"circulant"`` (Davies-Harte) or
    ``"auto"`` (Cholesky up to 4096 terms).
    """
    if not 0 < d < 0.5:
        raise DomainError(f"memory parameter d must lie in (0, 1/2), got {d}")
    if int(n) != n or n < 1:
        raise DomainError(f"sequence length must be a positive integer, got {n}")
    n = int(n)
    H = d + 0.5
    rng = as_rng(seed)
    if method == "auto":
        method = "cholesky" if n <= FGN_CHOLESKY_MAX else "circulant"
    if method == "cholesky":
        return _fgn_root(H, n) @ rng.standard_normal(n)
    if method == "circulant":
        return _fgn_circulant(H, n, rng, 1)[0]
    raise DomainError(f"unknown fgn method {method!r}")


def _fast_path_available(driver):
    return driver.kind in ("bm", "tcbm", "fbm")


def _fast_sample(driver, grid, rng):
    n = grid.n_points - 1
    if driver.kind == "bm":
        incr = np.sqrt(grid.step) * rng.standard_normal(n)
    elif driver.kind == "tcbm":
        incr = np.sqrt(np.diff(grid.values**driver.param)) * rng.standard_normal(n)
    else:
        H = driver.param
        incr = grid.step**H * _fgn_circulant(H, n, rng, 1)[0]
    return np.cumsum(incr)


def _resolve_method(driver, grid, method):
    if method == "auto":
        if grid.n_points - 1 <= CHOLESKY_MAX_POINTS or not _fast_path_available(driver):
            return "cholesky"
        return "fast"
    if method == "fast" and not _fast_path_available(driver):
        raise DomainError(f"no fast sampler for {driver.label}")
    if method not in ("cholesky", "fast"):
        raise DomainError(f"unknown sampling method {method!r}")
    return method


def sample_paths(driver, grid, seed, n_paths, start=0, method="auto"):
    """Array of shape (n_paths, n_points); row i uses the stream (seed, start + i)."""
    method = _resolve_method(driver, grid, method)
    out = np.zeros((n_paths, grid.n_points))
    if method == "cholesky":
        root = covariance_root(driver, grid)
        # one mat-vec per path keeps each row independent of the batch size
        for i in range(n_paths):
            out[i, 1:] = root @ path_rng(seed, start + i).standard_normal(grid.n_points - 1)
    else:
        for i in range(n_paths):
            out[i, 1:] = _fast_sample(driver, grid, path_rng(seed, start + i))
    return out


def sample_path(driver, grid, seed, index=0, method="auto"):
    """One exact sample of ``driver`` on ``grid``; value 0 at t = 0."""
    if isinstance(driver, str):
        driver = Driver.parse(driver)
    values = sample_paths(driver, grid, seed, 1, start=index, method=method)[0]
    return GaussianPath(grid, values, driver)
