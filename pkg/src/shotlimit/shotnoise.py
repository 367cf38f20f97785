"""Shot noise X(t) = sum_k h(t - S_k) 1{S_k <= t}, its centering and normalization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .counting import Centering, normalization_for
from .errors import DomainError, NumericalError
from .gauss_paths import TimeGrid

CENTERING_TOL = 1e-8


def eval_X(shots, h, times):
    """Exact X(t) at each t in ``times`` by direct summation over the sorted shots."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times > shots.horizon):
        raise DomainError(f"evaluation time beyond horizon {shots.horizon}")
    s = shots.times
    idx = np.searchsorted(s, times, side="right")
    out = np.empty(times.size)
    for i, (t, n) in enumerate(zip(times, idx)):
        out[i] = np.sum(h(t - s[:n])) if n else 0.0
    return out


def centering(h, b, t):
    """int_[0,t] h(t - y) db(y).

    A point mass b(0) at the origin contributes h(t) b(0). The absolutely
    continuous part is integrated adaptively to an absolute tolerance of
    1e-8 (1 + |result|); a b without density falls back to a fine
    Riemann-Stieltjes sum.
    """
    if t < 0:
        raise DomainError("centering time must be nonnegative")
    atom = h(t) * b.atom0 if b.atom0 else 0.0
    if t == 0:
        return float(atom)
    if b.density is None:
        return stieltjes_sum(h, b, t)
    f = lambda y: h(t - y) * b.density(y)
    pts = [t - k for k, _ in h.prefix if 0 < t - k < t] if h.prefix else None
    val, err = integrate.quad(f, 0.0, t, epsabs=CENTERING_TOL, epsrel=CENTERING_TOL, limit=500, points=pts)
    if err > CENTERING_TOL * (1 + abs(val)) * 10:
        raise NumericalError(f"centering quadrature did not converge at t={t} (err {err:.2e})")
    return float(val + atom)


def stieltjes_sum(h, b, t, n=20_000):
    """Midpoint Riemann-Stieltjes sum for a centering given only by its values."""
    y = np.linspace(0.0, t, n + 1)
    db = np.diff(b(y))
    mid = 0.5 * (y[1:] + y[:-1])
    return float(np.sum(h(t - mid) * db) + h(t) * b.atom0)


@dataclass(frozen=True)
class NormalizedPath:
    u_grid: TimeGrid
    scale_t: float
    values: np.ndarray


def normalize(shots, h, spec, scale_t, u_grid):
    """(X(tu) - int_[0,tu] h(tu - y) db(y)) / (a(t) h(t)) on ``u_grid``."""
    if scale_t * u_grid.t_max > shots.horizon * (1 + 1e-12):
        raise DomainError("scale_t * u_grid.t_max exceeds the shot horizon")
    norm = normalization_for(spec)
    scale = float(norm.a(scale_t) * h(scale_t))
    if scale == 0:
        raise DomainError("degenerate normalization a(t) h(t) = 0")
    times = np.minimum(scale_t * u_grid.values, shots.horizon)
    x = eval_X(shots, h, times)
    cent = np.array([centering(h, norm.b, tt) for tt in times])
    return NormalizedPath(u_grid, float(scale_t), (x - cent) / scale)


__all__ = ["eval_X", "centering", "stieltjes_sum", "normalize", "NormalizedPath", "Centering"]
