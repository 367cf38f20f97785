import math
from itertools import product

import numpy as np
import pytest

from shotlimit.counting import (
    ModelSpec, ShotTimes, count, gen_branching_gen_k, gen_inhom_poisson, gen_long_memory_walk,
    gen_perturbed_walk, gen_random_walk, normalization_for, pareto2_c, simulate_shots,
)
from shotlimit.errors import BudgetError, DomainError
from shotlimit.laws import Law

ONE = Law.parse("deterministic(1)")
EXP1 = Law.parse("exponential(1)")


def mc_count(gen, t, n=4000):
    c = np.array([count(gen(np.random.default_rng(i)), t) for i in range(n)])
    return c.mean(), c.std(ddof=1) / math.sqrt(n)


def test_count_examples():
    assert count(ShotTimes(5.0, np.empty(0)), 3.0) == 0
    assert count(ShotTimes(3.0, np.array([0.0, 1.0, 2.0])), 1.5) == 2
    assert count(ShotTimes(3.0, np.array([0.5, 0.5, 2.0])), 0.5) == 2
    with pytest.raises(DomainError):
        count(ShotTimes(3.0, np.array([1.0])), 3.5)


def test_random_walk_deterministic():
    s = gen_random_walk(ONE, 5.5, 0)
    assert s.times.tolist() == [0, 1, 2, 3, 4, 5]
    assert count(s, 5.5) == 6
    assert len(gen_random_walk(ONE, 5.0, 0, delay=Law.parse("deterministic(10)"))) == 0


def test_random_walk_exponential_mean_count():
    m, se = mc_count(lambda r: gen_random_walk(EXP1, 20.0, r), 20.0)
    assert abs(m - 21.0) <= 4 * se


def test_random_walk_rejects_bad_increment():
    with pytest.raises(DomainError):
        gen_random_walk(Law.parse("deterministic(0)"), 5.0, 0)


def test_perturbed_walk_examples():
    s = gen_perturbed_walk(ONE, Law.parse("deterministic(0.5)"), 3.0, 0)
    assert s.times.tolist() == [0.5, 1.5, 2.5]
    # eta = 0 is the zero-delayed walk
    a = gen_perturbed_walk(ONE, Law.parse("deterministic(0)"), 4.0, 0)
    assert a.times.tolist() == gen_random_walk(ONE, 4.0, 0).times.tolist()


def test_perturbed_walk_mean_trend():
    eta = Law.parse("uniform(0, 1)")
    m, _ = mc_count(lambda r: gen_perturbed_walk(EXP1, eta, 50.0, r), 50.0, n=2000)
    # mu^-1 int_0^t F(y) dy
    assert m == pytest.approx(eta.integrated_cdf(50.0), rel=0.05)


def test_long_memory_walk_zero_noise_and_constants():
    s = gen_long_memory_walk(ONE, 0.2, 5.5, 0, theta=np.zeros(200))
    assert s.times.tolist() == [0, 1, 2, 3, 4, 5]
    spec = ModelSpec("long_memory_walk", increment=EXP1, d=0.2)
    assert spec.m1 == pytest.approx(math.exp(0.5))
    assert spec.m2 == pytest.approx(1.64872, abs=1e-5)
    with pytest.raises(DomainError):
        gen_long_memory_walk(EXP1, 0.5, 5.0, 0)


def test_long_memory_mean_count():
    # E N(t) ~ t / m1
    m, se = mc_count(lambda r: gen_long_memory_walk(EXP1, 0.2, 200.0, r), 200.0, n=300)
    assert m == pytest.approx(200 / math.exp(0.5) + 1, rel=0.05)


def lattice_count(k, t):
    # #{(i_1..i_k) >= 1 : sum <= t}
    n = int(t)
    return sum(1 for c in product(range(1, n + 1), repeat=k) if sum(c) <= t)


def test_branching_lattice():
    assert count(gen_branching_gen_k(ONE, 2, 3.5, 0), 3.5) == 3 == lattice_count(2, 3.5)
    assert count(gen_branching_gen_k(ONE, 2, 5.0, 0), 5.0) == 10 == lattice_count(2, 5)
    assert count(gen_branching_gen_k(ONE, 3, 7.0, 0), 7.0) == lattice_count(3, 7)


def test_branching_mean_trend_and_errors():
    m, _ = mc_count(lambda r: gen_branching_gen_k(EXP1, 2, 30.0, r), 30.0, n=1000)
    assert m == pytest.approx(30.0**2 / 2, rel=0.1)
    with pytest.raises(DomainError):
        gen_branching_gen_k(EXP1, 1, 5.0, 0)
    with pytest.raises(DomainError):
        gen_branching_gen_k(Law.parse("deterministic(0)"), 2, 5.0, 0)
    with pytest.raises(BudgetError):
        gen_branching_gen_k(EXP1, 3, 1e3, 0)


def test_inhom_poisson():
    m, se = mc_count(lambda r: gen_inhom_poisson(1.0, 1.0, 100.0, r), 100.0)
    assert abs(m - 100) <= 4 * se
    m, se = mc_count(lambda r: gen_inhom_poisson(1.0, 2.0, 3.0, r), 3.0)
    assert abs(m - 9) <= 4 * se
    assert len(gen_inhom_poisson(1.0, 2.0, 0.0, 0)) == 0
    with pytest.raises(DomainError):
        gen_inhom_poisson(0.0, 1.0, 1.0, 0)


def test_normalization_examples():
    n = normalization_for(ModelSpec("random_walk", increment=EXP1))
    assert n.a(4.0) == pytest.approx(2.0) and n.b(3.0) == pytest.approx(3.0) and n.driver.kind == "bm"
    n = normalization_for(ModelSpec("branching", increment=EXP1, k=2))
    assert n.a(4.0) == pytest.approx(8.0) and n.b(4.0) == pytest.approx(8.0)
    assert n.driver.label == "rl(1)"
    n = normalization_for(ModelSpec("inhom_poisson", c=1.0, w=2.0))
    assert n.a(3.0) == pytest.approx(3.0) and n.b(3.0) == pytest.approx(9.0)
    assert n.driver.cov(0.5, 1.0) == pytest.approx(0.25)


def test_centering_density_integrates_to_value():
    from scipy import integrate

    specs = [ModelSpec("random_walk", increment=EXP1),
             ModelSpec("perturbed_walk", increment=EXP1, perturbation=Law.parse("uniform(0, 2)")),
             ModelSpec("long_memory_walk", increment=EXP1, d=0.3),
             ModelSpec("branching", increment=EXP1, k=3),
             ModelSpec("inhom_poisson", c=2.0, w=1.5)]
    for spec in specs:
        b = normalization_for(spec).b
        val, _ = integrate.quad(b.density, 0, 5.0, points=[2.0])
        assert b(5.0) == pytest.approx(val + b.atom0, rel=1e-8)


def test_infinite_variance():
    spec = ModelSpec("random_walk", increment=Law.parse("pareto2"))
    n = normalization_for(spec)
    c = float(pareto2_c(100.0))
    assert c**2 / (2 * math.log(c)) == pytest.approx(100.0, rel=1e-9)
    assert n.a(100.0) == pytest.approx(2**-1.5 * c)
    # the perturbed walk keeps its finite-variance precondition
    with pytest.raises(DomainError):
        ModelSpec("perturbed_walk", increment=Law.parse("pareto2"), perturbation=ONE)
    with pytest.raises(DomainError):
        pareto2_c(1.0)


def test_modelspec_validation():
    with pytest.raises(DomainError):
        ModelSpec("random_walk", increment=ONE)
    with pytest.raises(DomainError):
        ModelSpec("branching", increment=EXP1, k=1)
    with pytest.raises(DomainError):
        ModelSpec("spline")


def test_simulate_shots_is_deterministic():
    spec = ModelSpec("branching", increment=EXP1, k=2)
    a = simulate_shots(spec, 10.0, np.random.default_rng(5))
    b = simulate_shots(spec, 10.0, np.random.default_rng(5))
    assert np.array_equal(a.times, b.times)
