"""
Multilinear polynomials over 0-1 variables
Expansion of linear-factor products and their linearisation
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import SizeGuardError

logger = logging.getLogger(__name__)

Monomial = Tuple[int, ...]


class WeightRule(str, Enum):
    """How an order-M monomial is spread over its variables"""
    LEMMA1 = "lemma1"
    UPPER_BOUND = "upper_bound"


@dataclass(frozen=True)
class LinearFactor:
    """constant + sum_v coefficients[v] * n_v"""
    constant: float
    coefficients: Mapping[int, float] = field(default_factory=dict)


@dataclass
class PolynomialObjective:
    """
    Sparse multilinear polynomial

    Keys are sorted variable-index tuples; () holds the constant. Since every
    variable is 0-1, n_v^2 = n_v and a key never repeats an index.
    log_scale is the log of a positive factor the polynomial was divided by
    (0 when the polynomial is raw).
    """
    monomials: Dict[Monomial, float]
    max_order: int
    log_scale: float = 0.0

    @property
    def constant(self) -> float:
        return self.monomials.get((), 0.0)

    @property
    def order(self) -> int:
        return max((len(m) for m, v in self.monomials.items() if v != 0), default=0)

    @property
    def n_vars(self) -> int:
        return 1 + max((i for m in self.monomials for i in m), default=-1)

    def terms_of_order(self, order: int) -> Dict[Monomial, float]:
        return {m: v for m, v in self.monomials.items() if len(m) == order}

    def negated(self) -> "PolynomialObjective":
        return PolynomialObjective({m: -v for m, v in self.monomials.items()},
                                   self.max_order, self.log_scale)

    def evaluate(self, n: Sequence[float]) -> float:
        """Value at a binary point"""
        ones = set(int(i) for i in np.flatnonzero(np.asarray(n) > 0.5))
        return float(sum(v for m, v in self.monomials.items() if ones.issuperset(m)))


def _as_terms(factor: Union[LinearFactor, Tuple[float, Mapping[int, float]]]) -> Dict[Monomial, float]:
    if not isinstance(factor, LinearFactor):
        factor = LinearFactor(*factor)
    terms = {(): float(factor.constant)}
    for v, coef in factor.coefficients.items():
        if coef != 0:
            terms[(int(v),)] = terms.get((int(v),), 0.0) + float(coef)
    return terms


def expand_product(factors: Iterable[Union[LinearFactor, Tuple[float, Mapping[int, float]]]],
                   max_order: int, term_limit: Optional[int] = None) -> PolynomialObjective:
    """
    Expand a product of linear factors into monomials

    Products collapse repeated variables (n^2 = n) and monomials above
    max_order are dropped as they appear. A monomial can only grow under
    multiplication, so the kept coefficients are exact.

    Args:
        factors: LinearFactor or (constant, {var: coefficient}) pairs
        max_order: highest monomial order kept
        term_limit: raise once the running expansion holds more terms

    Returns:
        PolynomialObjective

    Raises:
        SizeGuardError: the expansion outgrew term_limit
    """
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    poly: Dict[Monomial, float] = {(): 1.0}

    for factor in factors:
        terms = _as_terms(factor)
        product: Dict[Monomial, float] = {}
        for left, a in poly.items():
            for right, b in terms.items():
                key = tuple(sorted(set(left) | set(right)))
                if len(key) > max_order:
                    continue
                product[key] = product.get(key, 0.0) + a * b
        poly = product
        if term_limit is not None and len(poly) > term_limit:
            raise SizeGuardError(
                f"expansion reached {len(poly)} terms (limit {term_limit}); "
                f"use a smaller instance or a lower max_order")

    logger.debug("expanded product to %d terms (max order %d)", len(poly), max_order)
    return PolynomialObjective(poly, max_order)


def monomial_weights(monomial: Monomial, coefficient: float, rule: WeightRule,
                     probability: Union[float, np.ndarray] = 1.0) -> np.ndarray:
    """
    Per-variable weights spreading one monomial over its M variables

    lemma1 gives P^(M-1)/M each, or prod_{u != i} P_u / M when P is a
    per-variable vector. upper_bound gives 1/M to positive coefficients
    and 0 to the rest, so the linear form never falls below the monomial
    on binary points.
    """
    M = len(monomial)
    rule = WeightRule(rule)
    if M == 1:
        return np.ones(1)
    if rule is WeightRule.UPPER_BOUND:
        return np.full(M, 1.0 / M if coefficient > 0 else 0.0)
    if np.ndim(probability) == 0:
        return np.full(M, float(probability) ** (M - 1) / M)
    p = np.asarray(probability, dtype=float)[list(monomial)]
    return np.array([np.prod(np.delete(p, i)) / M for i in range(M)])


def linearize(poly: PolynomialObjective, rule: Union[WeightRule, str] = WeightRule.LEMMA1,
              probability: Union[float, np.ndarray] = 1.0,
              n_vars: Optional[int] = None) -> np.ndarray:
    """
    Linear objective c from a polynomial

    Each order-M monomial with coefficient gamma adds gamma * weight to c at
    each of its indices; the constant is dropped.

    Args:
        poly: expanded polynomial
        rule: lemma1 or upper_bound
        probability: P (scalar) or one P per variable
        n_vars: length of c (defaults to the largest index + 1)

    Returns:
        c as a float vector
    """
    size = poly.n_vars if n_vars is None else n_vars
    c = np.zeros(size)
    for monomial, gamma in poly.monomials.items():
        if not monomial or gamma == 0:
            continue
        weights = monomial_weights(monomial, gamma, rule, probability)
        c[list(monomial)] += gamma * weights
    return c
