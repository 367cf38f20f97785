"""Fractional integration of Gaussian paths and the limit covariance.

``frac_integrate`` integrates the piecewise-linear interpolant of a grid path
exactly against the kernel, so the singularity of (u - y)^{rho-1} at y = u
costs no quadrature error. On a uniform grid with step D, write k = n - j and
s = n - x (grid units). Every subinterval [k-1, k] contributes through the
two kernel moments

    A_k = int_{k-1}^k s^{rho-1} ds,     B_k = int_{k-1}^k (k - s) s^{rho-1} ds,

and the weights only depend on n - j, so each form is a discrete convolution
(done by FFT).

Forms::

    positive        Y(u) = rho int_0^u (u-y)^{rho-1} W(y) dy,                      rho > 0
    negative        Y(u) = u^rho W(u) + |rho| int_0^u (W(u) - W(u-y)) y^{rho-1} dy, -alpha < rho < 0
    negative_equiv  Y(u) = |rho| int_0^inf (W(u) - W(u-y)) y^{rho-1} dy,           W = 0 on (-inf, 0)
    identity        Y = W

For negative_equiv the part y > u equals |rho| W(u) int_u^inf y^{rho-1} dy
= u^rho W(u), which is how it reduces to the negative form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, signal, special

from .errors import DomainError, NumericalError
from .gauss_paths import GaussianPath

FORMS = ("positive", "negative", "negative_equiv", "identity")
LIMIT_COV_TOL = 1e-6


@dataclass(frozen=True)
class FracIntSpec:
    rho: float
    form: Optional[str] = None

    def __post_init__(self):
        form = self.form
        if form is None:
            form = "identity" if self.rho == 0 else ("positive" if self.rho > 0 else "negative")
            object.__setattr__(self, "form", form)
        if form not in FORMS:
            raise DomainError(f"unknown form {form!r}; known: {FORMS}")
        if form == "positive" and not self.rho > 0:
            raise DomainError("positive form needs rho > 0")
        if form in ("negative", "negative_equiv") and not self.rho < 0:
            raise DomainError(f"{form} form needs rho < 0")
        if form == "identity" and self.rho != 0:
            raise DomainError("identity form needs rho = 0")


def _moments(rho, kmax):
    """A_k, B_k for k = 1..kmax (index 0 unused); A_1, B_1 are inf for rho < 0."""
    k = np.arange(1, kmax + 1, dtype=float)
    A = np.full(kmax + 1, np.nan)
    B = np.full(kmax + 1, np.nan)
    with np.errstate(all="ignore"):
        # k^a - (k-1)^a via expm1/log1p avoids cancellation at large k
        l1 = np.log1p(-1.0 / k)
        diff_r = np.where(k > 1, -k**rho * np.expm1(rho * l1), 1.0)
        diff_r1 = np.where(k > 1, -k ** (rho + 1) * np.expm1((rho + 1) * l1), 1.0)
    A[1:] = diff_r / rho
    B[1:] = k * A[1:] - diff_r1 / (rho + 1)
    if rho < 0:
        A[1] = B[1] = np.inf
    return A, B


def _conv(values, kernel):
    """sum_{m=0}^{n} kernel[m] values[..., n-m] for n = 0..N-1."""
    n = values.shape[-1]
    k = kernel[:n]
    if n <= 64:
        out = np.apply_along_axis(lambda v: np.convolve(v, k)[:n], -1, values)
    else:
        shape = (1,) * (values.ndim - 1) + (n,)
        out = signal.fftconvolve(values, k.reshape(shape), axes=-1)[..., :n]
    return out


def _positive(W, step, rho):
    n = W.shape[-1]
    A, B = _moments(rho, n)
    p = np.empty(n)
    p[0] = B[1]
    p[1:n] = A[1:n] - B[1:n] + B[2 : n + 1]
    I = _conv(W, p)
    # the W_0 weight is A_N - B_N rather than p_N
    idx = np.arange(1, n)
    I[..., 1:] += (A[idx] - B[idx] - p[idx]) * W[..., :1]
    Y = rho * step**rho * I
    Y[..., 0] = 0.0
    return Y


def _negative_core(W, rho):
    """J_n = int_0^n (W_n - W~(x)) (n - x)^{rho-1} dx in grid units."""
    n = W.shape[-1]
    A, B = _moments(rho, n + 1)
    q = np.zeros(n)
    if n > 1:
        q[1] = B[2]
    if n > 2:
        q[2:n] = A[2:n] - B[2:n] + B[3 : n + 1]
    S = _conv(W, q)
    if n > 1:
        # the W_0 weight is A_N - B_N for N >= 2 and 0 for N = 1, not q_N
        idx = np.arange(1, n)
        target = np.zeros(idx.size)
        target[1:] = A[2:n] - B[2:n]
        S[..., 1:] += (target - q[idx]) * W[..., :1]
    nn = np.arange(n, dtype=float)
    tail = np.where(nn > 0, (np.where(nn > 0, nn, 1.0) ** rho - 1.0) / rho, 0.0)
    J = np.zeros_like(W)
    J[..., 1:] = (W[..., 1:] * tail[1:] + (W[..., 1:] - W[..., :-1]) / (rho + 1) - S[..., 1:])
    return J, nn


def _negative(W, step, rho):
    J, nn = _negative_core(W, rho)
    with np.errstate(divide="ignore"):
        upow = np.where(nn > 0, nn**rho, 0.0)
    Y = step**rho * (upow * W + abs(rho) * J)
    Y[..., 0] = 0.0
    return Y


def _negative_equiv(W, step, rho):
    J, nn = _negative_core(W, rho)
    with np.errstate(divide="ignore"):
        # int_n^inf s^{rho-1} ds = n^rho / |rho|
        tail_int = np.where(nn > 0, nn**rho / abs(rho), 0.0)
    Y = abs(rho) * step**rho * (J + W * tail_int)
    Y[..., 0] = 0.0
    return Y


def integrate_values(values, step, spec):
    """frac_integrate on a raw array (last axis = grid), batched over leading axes."""
    W = np.asarray(values, dtype=float)
    if spec.form == "identity":
        return W.copy()
    if spec.form == "positive":
        return _positive(W, step, spec.rho)
    if spec.form == "negative":
        return _negative(W, step, spec.rho)
    return _negative_equiv(W, step, spec.rho)


def frac_integrate(path, spec):
    """Fractional integral of order ``spec.rho`` of ``path`` on the same grid."""
    if isinstance(spec, (int, float)):
        spec = FracIntSpec(float(spec))
    if path.values[0] != 0:
        raise DomainError("path must start at 0")
    alpha = path.holder_index
    if spec.rho < 0 and not spec.rho > -alpha:
        raise DomainError(f"rho={spec.rho} must exceed -alpha={-alpha:g} for {path.label}")
    vals = integrate_values(path.values, path.grid.step, spec)
    return GaussianPath(path.grid, vals, path.driver, path.rho + spec.rho)


def limit_cov(driver_cov, beta, u, v, tol=LIMIT_COV_TOL):
    """E Z(u) Z(v) with Z(x) = int_[0,x] W(x - y) dy^beta (Z = W when beta = 0).

    The double integral int_0^u int_0^v r(u-y, v-z) d(y^beta) d(z^beta) is done
    by nested adaptive quadrature. For beta < 1 the substitution y = u s^{1/beta}
    turns d(y^beta) into u^beta ds; for beta >= 1 the density is bounded and
    y = u s is used.
    """
    if u <= 0 or v <= 0:
        raise DomainError("limit_cov needs u, v > 0")
    if beta < 0:
        raise DomainError("beta must be >= 0")
    r = driver_cov.cov if hasattr(driver_cov, "cov") else driver_cov
    if beta == 0:
        return float(r(u, v))
    q = 1.0 / beta if beta < 1 else 1.0

    def weight(s):
        # d(y^beta)/ds divided by u^beta, for y = u s^q
        return 1.0 if q != 1.0 else beta * s ** (beta - 1)

    def inner(sz):
        zr = v * (1.0 - sz**q)  # v - z
        wz = weight(sz)
        # kink on the diagonal u - y = v - z
        pts = None
        if 0 < zr < u:
            pts = [(1.0 - zr / u) ** (1.0 / q)]
        f = lambda sy: r(u * (1.0 - sy**q), zr) * weight(sy)
        val, err = integrate.quad(f, 0.0, 1.0, points=pts, epsabs=tol * 0.1, epsrel=tol * 0.1, limit=200)
        return val * wz

    outer_pts = None
    if v > u:
        outer_pts = [(1.0 - u / v) ** (1.0 / q)]
    val, err = integrate.quad(inner, 0.0, 1.0, points=outer_pts, epsabs=tol, epsrel=tol, limit=200)
    if err > 10 * tol * max(1.0, abs(val)):
        raise NumericalError(f"limit_cov quadrature did not converge (err {err:.2e})")
    return float((u * v) ** beta * val)


def rl_convolution_identity_check(bm_path, k, beta, u_grid=None):
    """sup |LHS - RHS| / (1 + |RHS|) for the identity

        beta int_0^u (u-y)^{beta-1} R_{k-1}(y) dy = (k-1) B(k-1, beta+1) R_{beta+k-1}(u)

    with both sides built from the same Brownian path. ``u_grid`` restricts the
    supremum to a subset of grid times (default: every grid point).
    """
    if int(k) != k or k < 2:
        raise DomainError("k must be an integer >= 2")
    if beta <= 0:
        raise DomainError("beta must be positive")
    W, step = bm_path.values, bm_path.grid.step
    r_inner = integrate_values(W, step, FracIntSpec(float(k - 1)))
    lhs = integrate_values(r_inner, step, FracIntSpec(float(beta)))
    rhs = (k - 1) * special.beta(k - 1, beta + 1) * integrate_values(W, step, FracIntSpec(float(beta + k - 1)))
    dev = np.abs(lhs - rhs) / (1.0 + np.abs(rhs))
    if u_grid is not None:
        idx = np.rint(np.asarray(u_grid, dtype=float) / step).astype(int)
        dev = dev[idx]
    return float(dev.max())


def holder_estimate(path):
    """Slope of log max|increment at lag 2^j D| against log(2^j D), j = 1..m/2, capped at 1."""
    vals = path.values if isinstance(path, GaussianPath) else np.asarray(path, dtype=float)
    step = path.grid.step if isinstance(path, GaussianPath) else 1.0 / (vals.size - 1)
    n = vals.size
    m = int(round(math.log2(n - 1))) if n > 1 else 0
    if n < 2 or 2**m + 1 != n or m < 8:
        raise DomainError(f"holder_estimate needs 2^m + 1 points with m >= 8, got {n}")
    lags = 2 ** np.arange(1, m // 2 + 1)
    D = np.array([np.max(np.abs(vals[L:] - vals[:-L])) for L in lags])
    if np.any(D <= 0):
        raise NumericalError("holder estimate undefined for a constant path")
    slope = np.polyfit(np.log(lags * step), np.log(D), 1)[0]
    return float(min(slope, 1.0))
