"""
High-SINR product objective
Interference factors W_{k,j}, the uniform nulling probability and the truncated
linearisation of the product used by the integer programs
"""

import logging
from typing import List, Optional, Union

import numpy as np

from ..hetnet import NullingAssignment, Scenario
from .polynomial import LinearFactor, PolynomialObjective, WeightRule, expand_product

logger = logging.getLogger(__name__)

DEFAULT_PROBABILITY_FLOOR = 1e-3
# orders handled by the dense interaction tables
FAST_MAX_ORDER = 3


def lemma1_formula(d_mean: float, q_mean: float, K: int, J: int) -> float:
    """(D - 1)/(qK) - 1/J - 1/(qJK), unclamped"""
    return (d_mean - 1.0) / (q_mean * K) - 1.0 / J - 1.0 / (q_mean * J * K)


def lemma1_probability(scenario: Scenario, floor: float = DEFAULT_PROBABILITY_FLOOR) -> float:
    """
    Probability that an arbitrary n_{k,j} is 1 when every budget is used up

    Clamped to [floor, 1]. A network without SBSs or users gives 1.
    """
    if scenario.J == 0 or scenario.K == 0:
        return 1.0
    p = lemma1_formula(float(scenario.dof.mean()), float(scenario.paths.mean()),
                       scenario.K, scenario.J)
    return float(np.clip(p, floor, 1.0))


def per_bs_probability(scenario: Scenario, floor: float = DEFAULT_PROBABILITY_FLOOR) -> np.ndarray:
    """
    Per-variable probabilities from each BS's own budget

    P_j = E_j / sum of q over the users BS j could null, clamped to [floor, 1];
    returned column-stacked, one entry per n_{k,j}.
    """
    candidates = ((1 - scenario.association) * scenario.paths).sum(axis=0)
    with np.errstate(divide='ignore', invalid='ignore'):
        p = np.where(candidates > 0, scenario.spare_dof / np.maximum(candidates, 1), 1.0)
    p = np.clip(p, floor, 1.0)
    return np.repeat(p, scenario.K)


class InterferenceProduct:
    """
    The product of W_{k,j} over served users, one uplink and one downlink
    factor per user

    Factor f is a_f - sum_v C_fv n_v with a_f its No-Nulling value, and is
    kept normalised as 1 - sum_v B_fv n_v with B = C / a. Only variables that
    can be nonzero (x_{k,j} = 0) get a column. log_scale = sum_f log a_f.
    """

    def __init__(self, raw: np.ndarray, constants: np.ndarray, free: np.ndarray, K: int, J1: int):
        self.raw = raw
        self.constants = constants
        self.free = free
        self.shape = (K, J1)
        self.n_vars = K * J1
        self.B = raw[:, free] / constants[:, None]
        self.log_scale = float(np.sum(np.log(constants)))
        self._supports = [np.flatnonzero(row > 0) for row in self.B]

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "InterferenceProduct":
        K, J1 = scenario.K, scenario.J + 1
        pu, pb, G = scenario.user_power, scenario.bs_power, scenario.gains
        s = scenario.serving
        eps = scenario.noise_floor

        raw = np.zeros((2 * K, K * J1))
        fixed = np.zeros(2 * K)
        for k in range(K):
            if s[k] == 0:
                # uplink at the MBS: only small-cell users interfere
                sue = np.flatnonzero(s != 0)
                raw[k, sue] = pu[sue] * G[sue, 0]
            else:
                j = s[k]
                others = np.flatnonzero(np.arange(K) != k)
                contrib = pu[others] * G[others, j]
                same_cell = s[others] == j
                raw[k, j * K + others[~same_cell]] = contrib[~same_cell]
                fixed[k] = contrib[same_cell].sum()
            # downlink: every SBS except the serving one
            for jp in range(1, J1):
                if jp != s[k]:
                    raw[K + k, jp * K + k] = pb[jp] * G[k, jp]

        constants = eps + fixed + raw.sum(axis=1)
        free = np.flatnonzero(scenario.association.reshape(-1, order='F') == 0)
        return cls(raw, constants, free, K, J1)

    @property
    def n_free(self) -> int:
        return len(self.free)

    # === EXACT PRODUCT ===

    def _free_part(self, n: np.ndarray) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        if n.ndim >= 2 and n.shape[-2:] == self.shape:
            # K x (J+1) matrices become column-stacked vectors
            n = np.swapaxes(n, -1, -2).reshape(n.shape[:-2] + (self.n_vars,))
        return n[..., self.free]

    def log_value(self, n) -> Union[float, np.ndarray]:
        """
        log of the normalised product at n

        Args:
            n: K x (J+1) matrix, column-stacked vector, or a batch of either
        """
        if isinstance(n, NullingAssignment):
            n = n.vector()
        load = self._free_part(n) @ self.B.T
        out = np.log1p(-load).sum(axis=-1)
        return float(out) if np.ndim(out) == 0 else out

    def value(self, n) -> float:
        return float(np.exp(self.log_value(n)))

    def raw_log_value(self, n) -> float:
        return self.log_value(n) + self.log_scale

    def factors(self, normalised: bool = True) -> List[LinearFactor]:
        """Factors as LinearFactor, skipping constant ones"""
        out = []
        for f in range(self.raw.shape[0]):
            cols = np.flatnonzero(self.raw[f] > 0)
            if len(cols) == 0:
                continue
            scale = self.constants[f] if normalised else 1.0
            out.append(LinearFactor(
                1.0 if normalised else float(self.constants[f]),
                {int(v): -float(self.raw[f, v] / scale) for v in cols},
            ))
        return out

    # === INTERACTION TABLES ===
    # g(S) = F(S) - 1 with F(S) the normalised product at the indicator of S;
    # the monomial coefficients are the Mobius inverse of F over subsets.

    def _singles(self, idx: np.ndarray) -> np.ndarray:
        return np.log1p(-self.B[:, idx]).sum(axis=0)

    def _pair_excess(self, idx: np.ndarray) -> np.ndarray:
        """log F(vw) - log F(v) - log F(w) on the local index set"""
        t = len(idx)
        delta = np.zeros((t, t))
        pos = {int(v): a for a, v in enumerate(idx)}
        for f, support in enumerate(self._supports):
            local = np.array([pos[v] for v in support if v in pos], dtype=int)
            if len(local) < 2:
                continue
            b = self.B[f, idx[local]]
            lb = np.log1p(-b)
            # the diagonal (v == w) is not a subset and may leave the log domain
            with np.errstate(invalid='ignore', divide='ignore'):
                sub = np.log1p(-(b[:, None] + b[None, :])) - lb[:, None] - lb[None, :]
            sub[np.diag_indices_from(sub)] = 0.0
            delta[np.ix_(local, local)] += sub
        np.fill_diagonal(delta, 0.0)
        return delta

    def _triple_excess(self, i_local: int, idx: np.ndarray, local_of: dict) -> np.ndarray:
        """log-interaction of {i, v, w} beyond its pairs, as a t x t table"""
        t = len(idx)
        delta = np.zeros((t, t))
        i = idx[i_local]
        for f in np.flatnonzero(self.B[:, i] > 0):
            local = np.array([local_of[v] for v in self._supports[f] if v in local_of], dtype=int)
            local = local[local != i_local]
            if len(local) < 2:
                continue
            bi = self.B[f, i]
            b = self.B[f, idx[local]]
            lb = np.log1p(-b)
            li = np.log1p(-bi)
            lib = np.log1p(-(bi + b))
            with np.errstate(invalid='ignore', divide='ignore'):
                sub = (np.log1p(-(bi + b[:, None] + b[None, :]))
                       - lib[:, None] - lib[None, :]
                       - np.log1p(-(b[:, None] + b[None, :]))
                       + li + lb[:, None] + lb[None, :])
            sub[np.diag_indices_from(sub)] = 0.0
            delta[np.ix_(local, local)] += sub
        return delta

    def _tables(self, idx: np.ndarray):
        l1 = self._singles(idx)
        d2 = self._pair_excess(idx)
        g1 = np.expm1(l1)
        log2 = l1[:, None] + l1[None, :] + d2
        g2 = np.expm1(log2)
        gamma2 = g2 - g1[:, None] - g1[None, :]
        np.fill_diagonal(gamma2, 0.0)
        return l1, d2, g1, g2, gamma2

    def _gamma3(self, a: int, idx, l1, d2, g1, g2, local_of) -> np.ndarray:
        """gamma_{a v w} over local v, w; zero where indices repeat"""
        d3 = self._triple_excess(a, idx, local_of)
        log3 = (l1[a] + l1[:, None] + l1[None, :]
                + d2[a, :, None] + d2[a, None, :] + d2 + d3)
        gamma3 = (np.expm1(log3) - g2[a, :, None] - g2[a, None, :] - g2
                  + g1[a] + g1[:, None] + g1[None, :])
        np.fill_diagonal(gamma3, 0.0)
        gamma3[a, :] = 0.0
        gamma3[:, a] = 0.0
        return gamma3

    # === LINEARISATION ===

    def linear_coefficients(self, max_order: int = FAST_MAX_ORDER,
                            rule: Union[WeightRule, str] = WeightRule.LEMMA1,
                            probability: Union[float, np.ndarray] = 1.0) -> np.ndarray:
        """
        Linearised objective c over all K(J+1) variables, maximise orientation

        Equals linearize(expand_objective(...).negated(), rule, P) without
        materialising the monomials.

        Args:
            max_order: truncation order, at most 3
            rule: lemma1 or upper_bound
            probability: P, or one P per variable (column-stacked)
        """
        if not 1 <= max_order <= FAST_MAX_ORDER:
            raise ValueError(f"fast linearisation supports orders 1..{FAST_MAX_ORDER}")
        rule = WeightRule(rule)
        c = np.zeros(self.n_vars)
        idx = np.arange(self.n_free)
        if self.n_free == 0:
            return c

        per_var = np.ndim(probability) > 0
        p_free = np.asarray(probability, dtype=float)[self.free] if per_var else float(probability)

        l1, d2, g1, g2, gamma2 = self._tables(idx)
        alpha1 = -g1
        coef = alpha1.copy()

        if max_order >= 2:
            alpha2 = -gamma2
            if rule is WeightRule.UPPER_BOUND:
                w2 = np.where(alpha2 > 0, 0.5, 0.0)
            elif per_var:
                w2 = np.broadcast_to(p_free[None, :] / 2.0, alpha2.shape)
            else:
                w2 = np.full(alpha2.shape, p_free / 2.0)
            coef += (w2 * alpha2).sum(axis=1)

        if max_order >= 3:
            local_of = {int(v): a for a, v in enumerate(idx)}
            for a in range(self.n_free):
                alpha3 = -self._gamma3(a, idx, l1, d2, g1, g2, local_of)
                if rule is WeightRule.UPPER_BOUND:
                    w3 = np.where(alpha3 > 0, 1.0 / 3.0, 0.0)
                elif per_var:
                    w3 = p_free[:, None] * p_free[None, :] / 3.0
                else:
                    w3 = p_free ** 2 / 3.0
                # ordered pairs count every triple twice
                coef[a] += 0.5 * np.sum(w3 * alpha3)

        c[self.free] = coef
        return c

    def surrogate_value(self, n, max_order: int = FAST_MAX_ORDER) -> float:
        """
        Truncated polynomial (maximise orientation, constant dropped) at n

        Sums the monomial coefficients over the subsets of the support of n
        with at most max_order elements.
        """
        if isinstance(n, NullingAssignment):
            n = n.vector()
        support = np.flatnonzero(self._free_part(n) > 0.5)
        if len(support) == 0:
            return 0.0
        if max_order > FAST_MAX_ORDER:
            poly = expand_objective_from(self, max_order).negated()
            full = np.zeros(self.n_vars)
            full[self.free[support]] = 1.0
            return poly.evaluate(full) - poly.constant

        l1, d2, g1, g2, gamma2 = self._tables(support)
        total = -g1.sum()
        if max_order >= 2:
            total -= np.triu(gamma2, 1).sum()
        if max_order >= 3 and len(support) >= 3:
            local_of = {int(v): a for a, v in enumerate(support)}
            for a in range(len(support)):
                gamma3 = self._gamma3(a, support, l1, d2, g1, g2, local_of)
                # keep a < v < w only
                upper = np.triu(gamma3, 1)
                upper[:a + 1, :] = 0.0
                total -= upper.sum()
        return float(total)


def expand_objective_from(product: InterferenceProduct, max_order: int,
                          term_limit: Optional[int] = None) -> PolynomialObjective:
    poly = expand_product(product.factors(normalised=True), max_order, term_limit)
    poly.log_scale = product.log_scale
    return poly


def expand_objective(scenario: Scenario, max_order: int,
                     term_limit: Optional[int] = 2_000_000) -> PolynomialObjective:
    """
    Symbolic expansion of the product of W_{k,j}, truncated at max_order

    Factors are divided by their No-Nulling values first; log_scale holds
    the log of the dropped constant.

    Raises:
        SizeGuardError: more than term_limit terms
    """
    return expand_objective_from(InterferenceProduct.from_scenario(scenario), max_order, term_limit)


def p2_log_objective(scenario: Scenario, n: NullingAssignment) -> float:
    """log of the product of W_{k,j}"""
    return InterferenceProduct.from_scenario(scenario).raw_log_value(n)


def p2_objective(scenario: Scenario, n: NullingAssignment) -> float:
    """
    Product of W_{k,j} over served users

    Smaller is better: the factors are interference denominators, so the
    optimizer minimises this product. May overflow to inf on large networks;
    p2_log_objective does not.
    """
    return float(np.exp(p2_log_objective(scenario, n)))
