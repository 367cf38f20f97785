import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from shotlimit.errors import DomainError, NumericalError
from shotlimit.fracint import (
    FracIntSpec, frac_integrate, holder_estimate, integrate_values, limit_cov, rl_convolution_identity_check,
)
from shotlimit.gauss_paths import BM, Driver, GaussianPath, TimeGrid, rl_cov, sample_path


def linear_path(n=1025, t_max=1.0):
    grid = TimeGrid(t_max, n)
    return GaussianPath(grid, grid.values.copy(), BM)


def quad_oracle(values, grid, rho, u_index):
    """Adaptive quadrature of the defining integral on the linear interpolant."""
    x = grid.values
    f = lambda y: np.interp(y, x, values)
    u = x[u_index]
    if u == 0:
        return 0.0
    knots = list(x[1:u_index])
    if rho > 0:
        val, _ = integrate.quad(lambda y: (u - y) ** (rho - 1) * f(y), 0, u, points=knots[:50], limit=2000,
                                weight=None)
        return rho * val
    g = lambda y: (f(u) - f(u - y)) * y ** (rho - 1)
    val, _ = integrate.quad(g, 0, u, points=knots[:50], limit=2000)
    return u**rho * f(u) + abs(rho) * val


def test_zero_path_all_forms():
    grid = TimeGrid(1.0, 65)
    zero = GaussianPath(grid, np.zeros(65), BM)
    for spec in (FracIntSpec(0.7), FracIntSpec(-0.25), FracIntSpec(-0.25, "negative_equiv"), FracIntSpec(0)):
        assert np.all(frac_integrate(zero, spec).values == 0)


def test_linear_path_rho_one():
    p = linear_path(1025, 2.0)
    y = frac_integrate(p, FracIntSpec(1.0)).values
    assert y[-1] == pytest.approx(2.0, abs=1e-12)
    assert np.allclose(y, p.grid.values**2 / 2, atol=1e-12)


def test_linear_path_closed_forms():
    # W = id: positive form gives Gamma(rho+1) u^(rho+1) / Gamma(rho+2) times rho... i.e. u^(rho+1)/(rho+1)
    p = linear_path(513)
    u = p.grid.values
    for rho in (0.3, 2.5):
        assert np.allclose(frac_integrate(p, rho).values, u ** (rho + 1) / (rho + 1), atol=1e-12)
    # negative form: u^rho u + |rho| int_0^u y^rho dy = u^(rho+1) (1 + |rho|/(rho+1))
    rho = -0.25
    expect = u ** (rho + 1) * (1 + abs(rho) / (rho + 1))
    assert np.allclose(frac_integrate(p, rho).values, expect, atol=1e-12)


def test_negative_forms_identical_on_linear_path():
    p = linear_path(1024)
    a = frac_integrate(p, FracIntSpec(-0.25, "negative")).values
    b = frac_integrate(p, FracIntSpec(-0.25, "negative_equiv")).values
    assert np.max(np.abs(a - b)) <= 1e-10


@pytest.mark.parametrize("rho", [0.3, 1.0, 2.5, -0.25, -0.4])
def test_matches_quadrature_on_interpolant(rho):
    grid = TimeGrid(1.0, 33)
    w = sample_path(BM, grid, seed=4).values
    y = integrate_values(w, grid.step, FracIntSpec(rho))
    for j in (1, 2, 7, 20, 32):
        assert y[j] == pytest.approx(quad_oracle(w, grid, rho, j), abs=1e-8)


def test_batch_equals_rowwise():
    grid = TimeGrid(1.0, 200)
    W = np.vstack([sample_path(BM, grid, 1, index=i).values for i in range(3)])
    for spec in (FracIntSpec(0.5), FracIntSpec(-0.3)):
        B = integrate_values(W, grid.step, spec)
        for i in range(3):
            assert np.allclose(B[i], integrate_values(W[i], grid.step, spec), atol=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(rho, a, b):
    grid = TimeGrid(1.0, 40)
    x = sample_path(BM, grid, 1).values
    y = sample_path(BM, grid, 2).values
    spec = FracIntSpec(rho)
    lhs = integrate_values(a * x + b * y, grid.step, spec)
    rhs = a * integrate_values(x, grid.step, spec) + b * integrate_values(y, grid.step, spec)
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_spec_validation():
    with pytest.raises(DomainError):
        FracIntSpec(-0.2, "positive")
    with pytest.raises(DomainError):
        FracIntSpec(0.2, "negative")
    with pytest.raises(DomainError):
        frac_integrate(sample_path(Driver("fbm", 0.3), TimeGrid(1.0, 9), 0), FracIntSpec(-0.4))


def test_limit_cov_examples():
    assert limit_cov(BM, 0.0, 0.3, 0.8) == pytest.approx(0.3)
    assert limit_cov(BM, 1.0, 1.0, 1.0) == pytest.approx(1 / 3, abs=1e-7)
    assert limit_cov(BM, 1.0, 1.0, 2.0) == pytest.approx(5 / 6, abs=1e-7)
    n = 2000
    y = (np.arange(n) + 0.5) / n
    assert np.minimum.outer(1 - y, 1 - y).mean() == pytest.approx(1 / 3, abs=1e-3)


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
def test_limit_cov_matches_rl_cov(beta):
    for u, v in [(0.25, 1.0), (0.5, 0.75), (1.0, 1.0)]:
        assert limit_cov(BM, beta, u, v) == pytest.approx(rl_cov(beta, u, v), abs=1e-6)


def test_limit_cov_tcbm_beta_zero_and_custom_callable():
    d = Driver("tcbm", 2.0)
    assert limit_cov(d, 0.0, 0.5, 1.0) == pytest.approx(0.25)
    assert limit_cov(lambda a, b: min(a, b), 1.0, 1.0, 1.0) == pytest.approx(1 / 3, abs=1e-7)
    with pytest.raises(DomainError):
        limit_cov(BM, 1.0, 0.0, 1.0)


def test_identity_check():
    grid = TimeGrid(1.0, 257)
    zero = GaussianPath(grid, np.zeros(257), BM)
    assert rl_convolution_identity_check(zero, 2, 0.5) == 0
    # W = id, k = 2, beta = 1: both sides are u^3/6
    assert rl_convolution_identity_check(linear_path(1025), 2, 1.0) < 1e-6
    p = sample_path(BM, TimeGrid.dyadic(12), seed=2)
    assert rl_convolution_identity_check(p, 2, 0.5) < 1e-2
    assert rl_convolution_identity_check(p, 3, 1.5) < 1e-2
    with pytest.raises(DomainError):
        rl_convolution_identity_check(p, 1, 0.5)


def test_identity_second_order_convergence():
    fine = sample_path(BM, TimeGrid.dyadic(13), seed=8).values
    u = TimeGrid.dyadic(10).values
    devs = [rl_convolution_identity_check(GaussianPath(TimeGrid.dyadic(m), fine[:: 2 ** (13 - m)], BM), 2, 0.5, u)
            for m in (10, 11, 12, 13)]
    ratios = [a / b for a, b in zip(devs, devs[1:])]
    assert all(2.5 < r < 5.0 for r in ratios)


def test_holder_estimate():
    assert holder_estimate(linear_path(2**10 + 1)) == pytest.approx(1.0, abs=1e-6)
    grid = TimeGrid.dyadic(12)
    with pytest.raises(NumericalError):
        holder_estimate(GaussianPath(grid, np.zeros(grid.n_points), BM))
    with pytest.raises(DomainError):
        holder_estimate(linear_path(1000))
    est = np.mean([holder_estimate(sample_path(BM, grid, 3, index=i)) for i in range(30)])
    assert 0.4 <= est <= 0.6
