import math

import numpy as np
import pytest
from scipy.stats import binom

from corpus import corpus, score_shape
from samplesum.charfn import ChfEvaluator, hypergeometric_factor, partition_count
from samplesum.errors import CombinatorialOverflow, DegenerateDesign
from samplesum.oracle import exact_distribution
from samplesum.population import Design, Population, PopulationElement, moment_summary


def test_hypergeometric_factor():
    assert hypergeometric_factor(2, 4, 0) == 1
    assert hypergeometric_factor(2, 4, 3) == 0
    assert hypergeometric_factor(2, 4, 2) == pytest.approx(2 / 3)
    # p = 1: C(N - r, N - r) / C(N, N) = 1
    assert hypergeometric_factor(5, 5, 3) == 1


def test_partition_count_is_cumulative():
    # multi-indices with sum_j j i_j <= R: partial sums of 1, 1, 2, 3, 5, 7, 11
    assert [partition_count(r) for r in range(7)] == [1, 2, 4, 7, 12, 19, 30]


def test_psi_basics(popB, designB):
    ev = ChfEvaluator(popB, designB)
    assert ev.psi(0, 0.0, 0.0) == pytest.approx(1)
    rng = np.random.default_rng(1)
    t, tau = rng.uniform(-10, 10, 100), rng.uniform(-10, 10, 100)
    for m in range(2):
        assert np.all(np.abs(ev.psi(m, t, tau)) <= 1 + 1e-14)


def test_psi_alternative_form_pop_b(popB, designB):
    # POP-B already has gamma = 0 and alpha_20 = 1/2; compare on 20 random points
    ev = ChfEvaluator(popB, designB)
    rng = np.random.default_rng(2)
    t, tau = rng.uniform(-5, 5, 20), rng.uniform(-5, 5, 20)
    for m in range(2):
        np.testing.assert_allclose(ev.psi(m, t, tau), ev.psi_alternative(m, t, tau), atol=1e-14)


def test_psi_alternative_form_corpus():
    rng = np.random.default_rng(3)
    for pop in corpus()[:8]:
        d = Design(1, pop.N)
        try:
            ev = ChfEvaluator(pop, d)
            ev.summary
        except Exception:
            continue
        t, tau = rng.uniform(-5, 5, 20), rng.uniform(-5, 5, 20)
        for m in range(pop.N):
            np.testing.assert_allclose(ev.psi(m, t, tau), ev.psi_alternative(m, t, tau), atol=1e-13)


def test_degenerate_design_rejected(popA):
    with pytest.raises(DegenerateDesign):
        ChfEvaluator(popA, Design(4, 4)).theta(0.0)


def test_theta0_pop_a(popA, designA):
    ev = ChfEvaluator(popA, designA)
    ref = math.sqrt(2 * math.pi) * 0.375
    assert ev.theta0 == pytest.approx(ref, rel=1e-8)
    assert abs(complex(ev.theta(0.0)).imag) <= 1e-12


@pytest.mark.parametrize("N", [2, 5, 9, 17])
def test_theta0_is_binomial(N):
    pop = score_shape(N)
    for n in range(1, N):
        ev = ChfEvaluator(pop, Design(n, N))
        ref = math.sqrt(2 * math.pi * n * (N - n) / N) * binom.pmf(n, N, n / N)
        assert ev.theta0 == pytest.approx(ref, rel=1e-8)


def test_phi_pop_a_against_atoms(popA, designA):
    ev = ChfEvaluator(popA, designA)
    atoms = np.array([-3, -2, -1, 1, 2, 3]) / math.sqrt(3.5)
    assert ev.phi_n(0.0) == pytest.approx(1, abs=1e-14)
    assert ev.phi_n(1.0) == pytest.approx(np.exp(1j * atoms).mean(), abs=1e-8)


def test_phi_symmetry_and_modulus(popB, designB):
    ev = ChfEvaluator(popB, designB)
    t = np.random.default_rng(4).uniform(-20, 20, 50)
    phi = ev.phi_n(t)
    np.testing.assert_allclose(ev.phi_n(-t), np.conj(phi), atol=1e-12)
    assert np.all(np.abs(phi) <= 1 + 1e-10)


def test_integrand_modulus(popA, designA):
    ev = ChfEvaluator(popA, designA)
    rng = np.random.default_rng(5)
    vals = ev.integrand(rng.uniform(-10, 10, 200), rng.uniform(-5, 5, 200))
    assert np.all(np.abs(vals) <= 1 + 1e-12)


def test_vonbahr_b_and_B(popB, designB):
    ev = ChfEvaluator(popB, designB)
    assert ev.vonbahr_b(0, 0.0) == 0 and ev.vonbahr_b(1, 0.0) == 0
    for j in (1, 2, 3):
        assert ev.vonbahr_B(j, 0.0) == 0
    t = 0.7
    assert ev.vonbahr_B(1, t) == pytest.approx(ev.vonbahr_b(0, t) + ev.vonbahr_b(1, t), abs=1e-14)


def test_vonbahr_pop_b(popB, designB):
    ev = ChfEvaluator(popB, designB)
    s = ev.summary
    exact = exact_distribution(popB, designB).chf(0.5, s.gamma, s.sigma)
    assert ev.phi_vonbahr(0.5, truncation_r=designB.n) == pytest.approx(exact, abs=1e-10)


def test_vonbahr_pop_a(popA, designA):
    ev = ChfEvaluator(popA, designA)
    assert ev.vonbahr_chf(0.0, 0) == 1
    assert ev.vonbahr_chf(0.0) == pytest.approx(1)
    assert ev.phi_vonbahr(0.3) == pytest.approx(ev.phi_n(0.3), abs=1e-8)


def test_vonbahr_full_sample():
    # n = N: the series still applies (C(n, N, r) = 1) and gives the independent sum
    pop = Population((PopulationElement.random(["0", "1"], [0.3, 0.7]), PopulationElement.score("2"),
                      PopulationElement.random(["-1", "1"], [0.5, 0.5])))
    ev = ChfEvaluator(pop, Design(3, 3))
    sigma = math.sqrt((0.21 + 1.0) / 3)  # n = N: sigma^2 = alpha_20 - alpha_02
    t = 1.7
    u = t / (sigma * math.sqrt(3))
    ref = (0.3 + 0.7 * np.exp(1j * u)) * np.exp(2j * u) * np.cos(u) * np.exp(-1j * u * 3 * (0.7 + 2) / 3)
    assert ev.phi_vonbahr(t) == pytest.approx(ref, abs=1e-12)


def test_vonbahr_truncation_and_cap():
    pop = score_shape(30)
    ev = ChfEvaluator(pop, Design(15, 30))
    partial = ev.vonbahr_chf(0.8, truncation_r=2)
    assert np.isfinite(partial)
    with pytest.raises(CombinatorialOverflow):
        ev.vonbahr_chf(0.8, truncation_r=15, cap=10)


def test_inversion_pop_a(popA, designA):
    ev = ChfEvaluator(popA, designA)
    s = ev.summary
    scale = s.sigma * math.sqrt(2)
    mids = (np.arange(2.5, 10, 1.0) - 6) / scale
    res = ev.cdf_by_inversion(mids)
    exact = exact_distribution(popA, designA).standardized_cdf(s)(mids)
    np.testing.assert_allclose(res.cdf, exact, atol=1e-4)
    assert np.all(np.abs(res.cdf - exact) <= res.error)


def test_inversion_far_tails(popA, designA):
    ev = ChfEvaluator(popA, designA)
    res = ev.cdf_by_inversion(np.array([-30.3, 30.3]))
    assert abs(res.cdf[0]) <= res.error[0] and abs(res.cdf[1] - 1) <= res.error[1]
