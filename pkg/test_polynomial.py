"""
Test the polynomial objective
Product expansion, linearisation weights and the dense interaction tables
"""

import itertools

import numpy as np
import pytest

from conftest import build_scenario, random_scenarios
from core.errors import SizeGuardError
from core.hetnet import NullingAssignment
from core.optimizer import (InterferenceProduct, PolynomialObjective, WeightRule,
                            expand_objective, expand_product, linearize, p2_log_objective,
                            p2_objective)


# === EXPANSION ===

def test_single_factor():
    poly = expand_product([(3.0, {1: -2.0})], max_order=3)
    assert poly.monomials == {(): 3.0, (1,): -2.0}


def test_two_factors_foil():
    poly = expand_product([(2.0, {1: -3.0}), (5.0, {2: -7.0})], max_order=3)
    assert poly.monomials == {(): 10.0, (1,): -15.0, (2,): -14.0, (1, 2): 21.0}


def test_repeated_variable_collapses():
    poly = expand_product([(2.0, {1: -3.0}), (5.0, {1: -7.0})], max_order=3)
    assert poly.monomials == {(): 10.0, (1,): -8.0}


def test_truncation_drops_high_orders():
    poly = expand_product([(1.0, {0: -1.0}), (1.0, {1: -1.0}), (1.0, {2: -1.0})], max_order=2)
    assert poly.order == 2
    assert (0, 1, 2) not in poly.monomials
    assert poly.monomials[(0, 1)] == 1.0


def test_term_guard():
    factors = [(1.0, {v: -0.1}) for v in range(10)]
    with pytest.raises(SizeGuardError):
        expand_product(factors, max_order=3, term_limit=50)


def test_evaluate_at_binary_point():
    poly = PolynomialObjective({(): 1.0, (0,): 2.0, (0, 2): -4.0, (1,): 8.0}, 2)
    assert poly.evaluate([1, 0, 1]) == -1.0
    assert poly.evaluate([1, 1, 0]) == 11.0
    assert poly.negated().evaluate([1, 1, 0]) == -11.0


# === LINEARISATION ===

@pytest.mark.parametrize("rule", list(WeightRule))
def test_order_one_passes_through(rule):
    poly = PolynomialObjective({(): 5.0, (3,): -2.0}, 1)
    assert linearize(poly, rule, 0.3).tolist() == [0.0, 0.0, 0.0, -2.0]


def test_lemma1_pair_weights():
    c = linearize(PolynomialObjective({(1, 2): 6.0}, 2), WeightRule.LEMMA1, 0.5)
    assert c.tolist() == [0.0, 1.5, 1.5]


def test_upper_bound_triple_weights():
    c = linearize(PolynomialObjective({(1, 2, 3): 9.0}, 3), WeightRule.UPPER_BOUND)
    assert c == pytest.approx([0.0, 3.0, 3.0, 3.0])


def test_upper_bound_ignores_negative_monomials():
    c = linearize(PolynomialObjective({(0, 1): -4.0}, 2), WeightRule.UPPER_BOUND, n_vars=3)
    assert c.tolist() == [0.0, 0.0, 0.0]


def test_per_variable_probability():
    poly = PolynomialObjective({(0, 1, 2): 6.0}, 3)
    c = linearize(poly, WeightRule.LEMMA1, np.array([0.5, 0.2, 0.1]))
    assert c == pytest.approx([6 * 0.02 / 3, 6 * 0.05 / 3, 6 * 0.1 / 3])


@pytest.mark.parametrize("M", [2, 3, 4])
def test_mean_bound_per_monomial(M):
    for bits in itertools.product([0, 1], repeat=M):
        assert np.prod(bits) <= np.mean(bits)


@pytest.mark.parametrize("M", [2, 3, 4])
@pytest.mark.parametrize("P", [0.1, 0.18, 0.5])
def test_linearisation_keeps_expectation(M, P):
    rng = np.random.default_rng(1000 * M + int(100 * P))
    draws = (rng.random((100_000, M)) < P).astype(float)
    product = draws.prod(axis=1)
    linear = P ** (M - 1) / M * draws.sum(axis=1)
    se = np.sqrt(product.var(ddof=1) / len(product) + linear.var(ddof=1) / len(linear))
    assert abs(product.mean() - linear.mean()) <= 3 * se


# === INTERFERENCE PRODUCT ===

def _hand_scenario(noise_floor=1.0):
    # user 0 on the MBS, user 1 on SBS 1
    G = np.array([[0.02, 0.3],
                  [0.05, 0.6]])
    return build_scenario([0, 1], G, user_power=[2.0, 1.0], bs_power=[10.0, 4.0],
                          ratios=[100.0, 10.0], dof=[3, 3], noise_floor=noise_floor)


def test_product_floor_when_everything_is_nulled():
    s = _hand_scenario(noise_floor=2.0)
    n = NullingAssignment([[0, 1], [1, 0]])
    assert n.is_feasible(s)
    assert p2_objective(s, n) == pytest.approx(2.0 ** 4)


def test_product_by_hand():
    s = _hand_scenario()
    n = NullingAssignment.zeros(s)
    mue_up = 1 + 1.0 * 0.05
    mue_down = 1 + 4.0 * 0.3
    sue_up = 1 + 2.0 * 0.3
    sue_down = 1.0
    assert p2_objective(s, n) == pytest.approx(mue_up * mue_down * sue_up * sue_down)
    assert p2_log_objective(s, n) == pytest.approx(np.log(mue_up * mue_down * sue_up * sue_down))


def test_nulling_never_raises_the_product():
    for s in random_scenarios(20, seed=4):
        product = InterferenceProduct.from_scenario(s)
        zero = np.zeros((s.K, s.J + 1))
        base = product.log_value(zero)
        for k, j in zip(*np.nonzero(s.association == 0)):
            n = zero.copy()
            n[k, j] = 1
            assert product.log_value(n) <= base + 1e-12


def test_vector_and_matrix_inputs_agree():
    s = random_scenarios(1, seed=8)[0]
    product = InterferenceProduct.from_scenario(s)
    n = NullingAssignment((np.arange(s.K * (s.J + 1)).reshape(s.K, s.J + 1) % 2)
                          * (1 - s.association))
    assert product.log_value(n.n) == pytest.approx(product.log_value(n.vector()))
    assert product.log_value(n) == pytest.approx(product.log_value(n.vector()))


def test_expansion_is_exact_without_truncation():
    s = random_scenarios(1, seed=2)[0]
    product = InterferenceProduct.from_scenario(s)
    poly = expand_objective(s, max_order=s.K * (s.J + 1))
    rng = np.random.default_rng(0)
    for _ in range(10):
        n = rng.integers(0, 2, size=product.n_vars) * (1 - s.association.reshape(-1, order='F'))
        assert poly.evaluate(n) == pytest.approx(product.value(n), rel=1e-9)


@pytest.mark.parametrize("max_order", [1, 2, 3])
@pytest.mark.parametrize("rule", list(WeightRule))
def test_dense_tables_match_expansion(max_order, rule):
    for s in random_scenarios(6, seed=13):
        product = InterferenceProduct.from_scenario(s)
        poly = expand_objective(s, max_order).negated()
        for probability in (0.3, np.linspace(0.1, 0.9, product.n_vars)):
            fast = product.linear_coefficients(max_order, rule, probability)
            slow = linearize(poly, rule, probability, product.n_vars)
            assert fast == pytest.approx(slow, rel=1e-7, abs=1e-10)


@pytest.mark.parametrize("max_order", [1, 2, 3])
def test_surrogate_matches_truncated_polynomial(max_order):
    rng = np.random.default_rng(max_order)
    for s in random_scenarios(6, seed=17):
        product = InterferenceProduct.from_scenario(s)
        poly = expand_objective(s, max_order).negated()
        free = 1 - s.association.reshape(-1, order='F')
        for _ in range(5):
            n = rng.integers(0, 2, size=product.n_vars) * free
            expected = poly.evaluate(n) - poly.constant
            assert product.surrogate_value(n, max_order) == pytest.approx(expected, rel=1e-7,
                                                                          abs=1e-10)


def test_fast_path_order_limit():
    product = InterferenceProduct.from_scenario(_hand_scenario())
    with pytest.raises(ValueError):
        product.linear_coefficients(4)
