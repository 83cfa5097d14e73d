import math

import numpy as np
import pytest

from corpus import corpus, random_population, skewed_integer_scores
from samplesum.errors import BudgetExceeded, TooLarge
from samplesum.oracle import (
    dkw_epsilon,
    ecdf_sup_distance,
    enumerate_subsets,
    exact_distribution,
    exact_moments,
    sample_srswor,
)
from samplesum.population import Design, Population, moment_summary


def test_pop_a_pmf(popA, designA):
    ex = exact_distribution(popA, designA)
    v, w = ex.atoms()
    assert list(v) == [3, 4, 5, 7, 8, 9]
    np.testing.assert_allclose(w, 1 / 6, atol=1e-15)
    assert ex.cdf(6.0) == pytest.approx(0.5)


def test_pop_b_pmf(popB, designB):
    ex = exact_distribution(popB, designB)
    assert list(ex.values) == [-1, 0, 1]
    np.testing.assert_allclose(ex.probs, [0.25, 0.5, 0.25], atol=1e-15)


def test_left_continuity(popB, designB):
    ex = exact_distribution(popB, designB)
    assert ex.cdf(0.0) == 0.25 and ex.cdf_right(0.0) == 0.75
    assert ex.cdf(-5.0) == 0 and ex.cdf(5.0) == 1
    assert ex.sf(0.0) == 0.75


def test_full_sample_is_independent_sum(popB):
    ex = exact_distribution(popB, Design(2, 2))
    np.testing.assert_allclose(ex.probs, [0.5, 0, 0.5])
    assert ex.mean() == 0
    pop = Population.from_scores(["1", "2.5", "4"])
    assert exact_distribution(pop, Design(3, 3)).mean() == pytest.approx(7.5)


def test_dp_matches_enumeration():
    for pop in corpus() + [random_population(9, 12, 0.5)]:
        for n in range(1, pop.N + 1):
            d = Design(n, pop.N)
            a, b = exact_distribution(pop, d), enumerate_subsets(pop, d)
            assert a.offset == b.offset and len(a.probs) == len(b.probs)
            np.testing.assert_allclose(a.probs, b.probs, atol=1e-12, rtol=0)
            assert abs(a.probs.sum() - 1) <= 1e-12


def test_mean_identity():
    for pop in corpus():
        gamma = math.fsum(e.law.mean() for e in pop.elements) / pop.N
        for n in range(1, pop.N + 1):
            ex = exact_distribution(pop, Design(n, pop.N))
            assert ex.mean() == pytest.approx(n * gamma, abs=1e-10)


def test_enumeration_limits():
    with pytest.raises(TooLarge):
        enumerate_subsets(skewed_integer_scores(21), Design(3, 21))
    pop = random_population(77, 6, 0.5)
    ex = enumerate_subsets(pop, Design(3, 6))
    assert abs(ex.probs.sum() - 1) <= 1e-12
    single = enumerate_subsets(pop, Design(6, 6))
    assert single.mean() == pytest.approx(exact_distribution(pop, Design(6, 6)).mean())


def test_budget():
    pop = skewed_integer_scores(200, scale=2000)
    with pytest.raises(BudgetExceeded) as err:
        exact_distribution(pop, Design(100, 200))
    assert err.value.size > err.value.budget


def test_moments_pop_a(popA, designA):
    ex = exact_distribution(popA, designA)
    assert exact_moments(ex, 1) == pytest.approx(0, abs=1e-15)
    # Var S = n b^2 (N - n) / (N - 1) = 2 * 3.5 * 2 / 3
    assert exact_moments(ex, 2) == pytest.approx(14 / 3, abs=1e-12)
    assert exact_moments(ex, 3) == pytest.approx(0, abs=1e-12)
    # n sigma^2 = 3.5 is the Bernoulli-model variance, not Var S
    assert 2 * moment_summary(popA, designA).sigma2 == pytest.approx(3.5)
    with pytest.raises(ValueError):
        exact_moments(ex, 9)


def test_csv_export(popB, designB):
    text = exact_distribution(popB, designB).to_csv()
    assert text.splitlines() == ["value,probability", "-1,0.25", "0,0.5", "1,0.25"]
    pop = Population.from_scores(["0.1", "0.35"])
    assert "0.35," in exact_distribution(pop, Design(1, 2)).to_csv()


def test_sampler_is_deterministic(popA, designA):
    a = sample_srswor(popA, designA, 1000, seed=5)
    b = sample_srswor(popA, designA, 1000, seed=5)
    c = sample_srswor(popA, designA, 1000, seed=6)
    assert np.array_equal(a.indices, b.indices)
    assert not np.array_equal(a.indices, c.indices)
    # replicate streams are distinct
    assert not np.array_equal(a.indices, sample_srswor(popA, designA, 1000, seed=5, replicate=1).indices)


def test_sampler_full_sample():
    pop = Population.from_scores(["1", "2", "4"])
    s = sample_srswor(pop, Design(3, 3), 100, seed=0)
    assert np.all(s.values == 7)


def test_sampler_chunks_agree_in_law(popB, designB):
    s = sample_srswor(popB, designB, 20000, seed=1, chunk=64)
    ex = exact_distribution(popB, designB)
    assert ecdf_sup_distance(s, ex) <= dkw_epsilon(20000)
    assert s.ecdf(0.0) == pytest.approx(0.25, abs=0.02)


def test_sampler_random_elements():
    pop = random_population(4, 7, 1.0)
    d = Design(3, 7)
    s = sample_srswor(pop, d, 50000, seed=2)
    assert ecdf_sup_distance(s, exact_distribution(pop, d)) <= dkw_epsilon(50000)


def test_dkw_epsilon():
    assert dkw_epsilon(10**5) == pytest.approx(0.00515, abs=1e-5)
