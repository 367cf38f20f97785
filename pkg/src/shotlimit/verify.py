"""Monte Carlo checks of the functional limit theorem for shot noise.

For each experiment a batch of independent normalized paths is simulated at
a few probe points u; the empirical covariance is compared with the limit
covariance E Y(u) Y(v) from :func:`shotlimit.fracint.limit_cov`, and each
marginal is checked for zero mean and, by a one-sample Kolmogorov-Smirnov
test, for normality.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from ._rng import path_rng
from .counting import ModelSpec, normalization_for, simulate_shots
from .errors import DomainError, NumericalError
from .fracint import limit_cov
from .response import ResponseFn
from .shotnoise import centering, eval_X

DEFAULT_PROBES = (0.25, 0.5, 0.75, 1.0)
CHUNK = 250
MEAN_SE_FACTOR = 4.0
COV_SE_FACTOR = 4.0
COV_REL_TOL = 0.1
KS_LEVEL = 0.01
KS_PASS_FRACTION = 0.75
SWEEP_NOISE_FACTOR = 1.5


@dataclass(frozen=True)
class ExperimentSpec:
    model: ModelSpec
    h: ResponseFn
    scale_t: float
    u_points: tuple = DEFAULT_PROBES
    n_paths: int = 5000
    seed: int = 0

    def __post_init__(self):
        u = tuple(float(x) for x in self.u_points)
        object.__setattr__(self, "u_points", u)
        if not u or min(u) <= 0:
            raise DomainError("probe points must be positive (u = 0 is excluded)")
        if self.n_paths < 100:
            raise DomainError("n_paths must be at least 100")
        if self.scale_t <= 0:
            raise DomainError("scale_t must be positive")

    @property
    def horizon(self):
        return self.scale_t * max(self.u_points)

    def describe(self):
        return {
            "model": self.model.describe(),
            "response": self.h.describe(),
            "scale_t": self.scale_t,
            "u_points": list(self.u_points),
            "n_paths": self.n_paths,
            "seed": self.seed,
        }


@dataclass
class VerificationReport:
    spec: dict
    u_points: list
    empirical_cov: np.ndarray
    theoretical_cov: np.ndarray
    cov_se: np.ndarray
    max_abs_deviation: float
    means: np.ndarray
    mean_se: np.ndarray
    variances: np.ndarray
    ks_stats: np.ndarray
    ks_critical: float
    verdicts: dict
    diagnostics: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.verdicts.values())

    def cov_tolerance(self):
        return np.maximum(COV_SE_FACTOR * self.cov_se, COV_REL_TOL * np.abs(self.theoretical_cov))

    def to_dict(self):
        return {
            "spec": self.spec,
            "u_points": list(self.u_points),
            "empirical_cov": self.empirical_cov.tolist(),
            "theoretical_cov": self.theoretical_cov.tolist(),
            "cov_se": self.cov_se.tolist(),
            "cov_tolerance": self.cov_tolerance().tolist(),
            "max_abs_deviation": self.max_abs_deviation,
            "marginals": {
                "mean": self.means.tolist(),
                "mean_se": self.mean_se.tolist(),
                "variance": self.variances.tolist(),
                "ks_stat": self.ks_stats.tolist(),
                "ks_critical": self.ks_critical,
            },
            "verdicts": dict(self.verdicts),
            "passed": self.passed,
            "diagnostics": dict(self.diagnostics),
        }

    def rows(self):
        """(u_i, u_j, empirical, theoretical, se) for the upper triangle."""
        p = len(self.u_points)
        for i in range(p):
            for j in range(i, p):
                yield (self.u_points[i], self.u_points[j], self.empirical_cov[i, j],
                       self.theoretical_cov[i, j], self.cov_se[i, j])


def _simulate_chunk(args):
    model, h, probes, seed, start, stop = args
    out = np.empty((stop - start, probes.size))
    horizon = probes.max()
    for i in range(start, stop):
        shots = simulate_shots(model, horizon, path_rng(seed, i))
        out[i - start] = eval_X(shots, h, probes)
    return out


def simulate_probes(spec, workers=1):
    """Raw X(t u) for every path (rows ordered by path index)."""
    probes = spec.scale_t * np.asarray(spec.u_points)
    jobs = [(spec.model, spec.h, probes, spec.seed, s, min(s + CHUNK, spec.n_paths))
            for s in range(0, spec.n_paths, CHUNK)]
    if workers <= 1 or len(jobs) == 1:
        parts = [_simulate_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_simulate_chunk, jobs))
    return np.vstack(parts)


def simulate_normalized(spec, workers=1):
    """Normalized values (X(tu) - centering) / (a(t) h(t)), shape (n_paths, n_probes)."""
    norm = normalization_for(spec.model)
    t = spec.scale_t
    scale = float(norm.a(t) * spec.h(t))
    if not scale > 0:
        raise DomainError("degenerate normalization a(t) h(t) = 0")
    cent = np.array([centering(spec.h, norm.b, t * u) for u in spec.u_points])
    return (simulate_probes(spec, workers) - cent) / scale


def jackknife_cov_se(X):
    """Leave-one-out jackknife standard errors of the sample covariance matrix of X (n, p)."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    s1 = X.sum(axis=0)
    s2 = X.T @ X
    m = (s1 - X) / (n - 1)
    C = (s2[None] - X[:, :, None] * X[:, None, :] - (n - 1) * m[:, :, None] * m[:, None, :]) / (n - 2)
    cbar = C.mean(axis=0)
    return np.sqrt((n - 1) / n * ((C - cbar) ** 2).sum(axis=0))


def theoretical_cov(driver, beta, u_points):
    p = len(u_points)
    out = np.empty((p, p))
    for i in range(p):
        for j in range(i, p):
            out[i, j] = out[j, i] = limit_cov(driver, beta, u_points[i], u_points[j])
    return out


def assess(X, theo, u_points, spec_echo=None):
    """Build a report from samples X (n, p) and the limit covariance ``theo``."""
    n, p = X.shape
    emp = np.cov(X, rowvar=False).reshape(p, p)
    emp = 0.5 * (emp + emp.T)
    se = jackknife_cov_se(X)
    dev = np.abs(emp - theo)
    tol = np.maximum(COV_SE_FACTOR * se, COV_REL_TOL * np.abs(theo))
    means = X.mean(axis=0)
    mean_se = X.std(axis=0, ddof=1) / math.sqrt(n)
    ks = np.array([
        stats.kstest(X[:, i], "norm", args=(0.0, math.sqrt(theo[i, i]))).statistic
        if theo[i, i] > 0 else 1.0
        for i in range(p)
    ])
    ks_crit = float(stats.kstwobign.ppf(1 - KS_LEVEL) / math.sqrt(n))
    verdicts = {
        "covariance": bool(np.all(dev <= tol)),
        "mean": bool(np.all(np.abs(means) <= MEAN_SE_FACTOR * mean_se)),
        "ks": bool(np.sum(ks <= ks_crit) >= math.ceil(KS_PASS_FRACTION * p)),
    }
    return VerificationReport(
        spec=spec_echo or {},
        u_points=list(u_points),
        empirical_cov=emp,
        theoretical_cov=theo,
        cov_se=se,
        max_abs_deviation=float(dev.max()),
        means=means,
        mean_se=mean_se,
        variances=np.diag(emp).copy(),
        ks_stats=ks,
        ks_critical=ks_crit,
        verdicts=verdicts,
        diagnostics={"mean_max_abs": float(np.abs(X).max(axis=1).mean())},
    )


def run_experiment(spec, workers=1):
    X = simulate_normalized(spec, workers)
    theo = theoretical_cov(spec.model.driver, spec.h.beta, spec.u_points)
    return assess(X, theo, spec.u_points, spec.describe())


@dataclass
class SweepResult:
    scales: list
    deviations: list
    noise: list
    reports: list

    @property
    def nonincreasing(self):
        """Each deviation may exceed its predecessor by at most 1.5x its own noise level."""
        d, s = self.deviations, self.noise
        return all(d[i + 1] <= d[i] + SWEEP_NOISE_FACTOR * s[i + 1] for i in range(len(d) - 1))


def convergence_sweep(spec, scales, workers=1):
    """Run ``spec`` at each scale in ``scales`` with the same seed."""
    scales = [float(t) for t in scales]
    if len(scales) < 3:
        raise DomainError("a sweep needs at least three scales")
    reports, devs, noise = [], [], []
    for t in scales:
        sub = ExperimentSpec(spec.model, spec.h, t, spec.u_points, spec.n_paths, spec.seed)
        rep = run_experiment(sub, workers)
        reports.append(rep)
        devs.append(rep.max_abs_deviation)
        noise.append(float(rep.cov_se.max()))
    return SweepResult(scales, devs, noise, reports)


def _prelimit_cov(h, r, t, u, v, tol):
    """E Z(t,u) Z(t,v) for f(t, y) = h(ty)/h(t) (Stieltjes in y and z)."""
    ht = float(h(t))
    atom = float(h(0.0)) / ht
    beta = h.beta
    q = 1.0 / beta if 0 < beta < 1 else 1.0

    def dens(x, s):
        # density of d_y f(t, y) on y = x s^q, times dy/ds
        y = x * s**q
        return t * h.derivative(t * y) / ht * x * q * s ** (q - 1)

    def cont(x, g):
        # int_0^x g(x - y) d_y f(t, y), continuous part
        val, _ = integrate.quad(lambda s: g(x - x * s**q) * dens(x, s), 0.0, 1.0,
                                epsabs=tol, epsrel=tol, limit=400)
        return val

    total = atom * atom * r(u, v)
    if atom:
        total += atom * cont(v, lambda z: r(u, z)) + atom * cont(u, lambda y: r(y, v))

    def inner(sz):
        zr = v - v * sz**q
        return cont(u, lambda y: r(y, zr)) * dens(v, sz)

    val, _ = integrate.quad(inner, 0.0, 1.0, epsabs=tol, epsrel=tol, limit=400)
    return float(total + val)


def lemma2_numeric_check(h, driver_cov, u, v, t_list, tol=1e-8):
    """Pre-limit covariances E Z(t,u) Z(t,v) along ``t_list`` and their limit.

    Returns a dict with ``values``, ``limit`` and relative ``errors``.
    """
    if u <= 0 or v <= 0:
        raise DomainError("u and v must be positive")
    r = driver_cov.cov if hasattr(driver_cov, "cov") else driver_cov
    values = []
    for t in t_list:
        if not h.is_nondecreasing_on(t * max(u, v)):
            raise DomainError(f"f(t, .) = h(t .)/h(t) is not nondecreasing on [0, {max(u, v)}] at t={t}")
        values.append(_prelimit_cov(h, r, float(t), u, v, tol))
    lim = limit_cov(r, h.beta, u, v)
    if lim == 0:
        raise NumericalError("limit covariance is zero; relative errors undefined")
    errors = [abs(x - lim) / abs(lim) for x in values]
    return {"t": [float(t) for t in t_list], "values": values, "limit": lim, "errors": errors}
