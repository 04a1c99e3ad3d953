"""
Integer programs over the column-stacked nulling vector
max c.n  s.t.  A n <= b,  n >= 0 integer
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import SolverLimits
from ..errors import InfeasibleScenarioError, SizeGuardError
from ..hetnet import Scenario
from .objective import (FAST_MAX_ORDER, InterferenceProduct, expand_objective_from,
                        lemma1_probability, per_bs_probability)
from .polynomial import WeightRule, linearize

logger = logging.getLogger(__name__)


@dataclass
class IntegerProgram:
    """
    c, A, b of a 0-1 program

    Variable v is n_{k,j} with v = j*K + k (k fastest). A and b are integral
    for the programs built here; hand-built programs may carry fractional b.
    columns maps block-local columns back to the full vector when the program
    is one block of a larger one.
    """
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    K: int = 0
    J1: int = 0
    columns: Optional[np.ndarray] = None
    probability: Optional[Union[float, np.ndarray]] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.A.shape != (len(self.b), len(self.c)):
            raise ValueError(f"A is {self.A.shape}, expected {(len(self.b), len(self.c))}")
        if self.K == 0 and self.J1 == 0:
            self.K, self.J1 = len(self.c), 1

    @property
    def n_vars(self) -> int:
        return len(self.c)

    @property
    def n_rows(self) -> int:
        return len(self.b)

    def is_feasible(self, x: Sequence[float], tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= -tol) and np.all(self.A @ x <= self.b + tol))

    def evaluate(self, x: Sequence[float]) -> Fraction:
        """c.x summed exactly (integral x)"""
        x = np.rint(np.asarray(x, dtype=float)).astype(int)
        return sum((Fraction(float(ci)) * int(xi) for ci, xi in zip(self.c, x) if xi),
                   Fraction(0))

    def split_blocks(self) -> List["IntegerProgram"]:
        """
        Independent column blocks

        Columns sharing a row with nonzero entries belong to one block; the
        rows of a block are those touching it. Rows touching no column are
        checked for 0 <= b and dropped.
        """
        n = self.n_vars
        parent = list(range(n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for row in self.A:
            cols = np.flatnonzero(row)
            for other in cols[1:]:
                ra, rb = find(cols[0]), find(other)
                if ra != rb:
                    parent[rb] = ra

        groups = {}
        for v in range(n):
            groups.setdefault(find(v), []).append(v)

        base = self.columns if self.columns is not None else np.arange(n)
        blocks = []
        for cols in sorted(groups.values()):
            cols = np.array(cols)
            rows = np.flatnonzero(np.any(self.A[:, cols] != 0, axis=1))
            prob = self.probability
            if prob is not None and np.ndim(prob) > 0:
                prob = np.asarray(prob)[cols]
            blocks.append(IntegerProgram(self.c[cols], self.A[np.ix_(rows, cols)], self.b[rows],
                                         self.K, self.J1, base[cols], prob))
        return blocks

    # === TEXT FORMAT ===

    def to_text(self) -> str:
        """
        Plain-text export

        Line 1 "m n", line 2 c, then the m rows of A, then b on one line.
        """
        def fmt(values):
            return " ".join(repr(float(v)) for v in values)

        lines = [f"{self.n_rows} {self.n_vars}", fmt(self.c)]
        lines += [fmt(row) for row in self.A]
        lines.append(fmt(self.b))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "IntegerProgram":
        lines = [line for line in text.splitlines() if line.strip()]
        try:
            m, n = (int(t) for t in lines[0].split())
            c = [float(t) for t in lines[1].split()] if n else []
            A = [[float(t) for t in lines[2 + i].split()] for i in range(m)]
            b = [float(t) for t in lines[2 + m].split()] if m else []
        except (IndexError, ValueError) as e:
            raise ValueError(f"malformed integer program text: {e}") from e
        if len(c) != n or len(b) != m or any(len(row) != n for row in A):
            raise ValueError("integer program text does not match its header")
        return cls(np.array(c), np.array(A).reshape(m, n), np.array(b))

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: Union[str, Path]) -> "IntegerProgram":
        return cls.from_text(Path(path).read_text())


def check_program_size(scenario: Scenario, limits: SolverLimits) -> int:
    """
    Variable count K(J+1) of the program, checked before any dense table

    Raises:
        SizeGuardError: above limits.max_program_vars
    """
    n_vars = scenario.K * (scenario.J + 1)
    if n_vars > limits.max_program_vars:
        raise SizeGuardError(
            f"program limited to {limits.max_program_vars} variables, got {n_vars}")
    return n_vars


def constraint_system(scenario: Scenario, unimodular: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """
    A = [Q; I] and b = [E; 1 - x]

    With unimodular=True every Q row is all ones and b_j = floor(E_j / L_j),
    which needs q constant per BS.

    Raises:
        InfeasibleScenarioError: some E_j < 0
    """
    K, J1 = scenario.K, scenario.J + 1
    E = scenario.spare_dof
    for j in np.flatnonzero(E < 0):
        raise InfeasibleScenarioError(int(j), int(scenario.serving_load[j]), int(scenario.dof[j]))

    Q = np.zeros((J1, K * J1))
    capacity = E.astype(float)
    for j in range(J1):
        if unimodular:
            Q[j, j * K:(j + 1) * K] = 1.0
            capacity[j] = np.floor(E[j] / scenario.paths[0, j]) if K else E[j]
        else:
            Q[j, j * K:(j + 1) * K] = scenario.paths[:, j]
    A = np.vstack([Q, np.eye(K * J1)])
    b = np.concatenate([capacity, 1.0 - scenario.association.reshape(-1, order='F')])
    return A, b


def objective_vector(scenario: Scenario, max_order: int, rule: WeightRule,
                     limits: SolverLimits = SolverLimits(),
                     product: Optional[InterferenceProduct] = None):
    """
    Linearised c and the probability it was weighted with

    Raises:
        SizeGuardError: K(J+1) above limits.max_program_vars
    """
    check_program_size(scenario, limits)
    product = product or InterferenceProduct.from_scenario(scenario)
    if limits.per_bs_probability:
        probability = per_bs_probability(scenario, limits.probability_floor)
    else:
        probability = lemma1_probability(scenario, limits.probability_floor)

    if max_order <= FAST_MAX_ORDER:
        c = product.linear_coefficients(max_order, rule, probability)
    else:
        poly = expand_objective_from(product, max_order, limits.expansion_term_limit)
        c = linearize(poly.negated(), rule, probability, product.n_vars)
    return c, probability


def _build(scenario: Scenario, max_order: int, rule: WeightRule, limits: SolverLimits,
           product: Optional[InterferenceProduct]) -> IntegerProgram:
    check_program_size(scenario, limits)
    A, b = constraint_system(scenario)
    c, probability = objective_vector(scenario, max_order, rule, limits, product)
    logger.debug("built %s program: %d rows, %d variables", rule.value, *A.shape)
    return IntegerProgram(c, A, b, scenario.K, scenario.J + 1, probability=probability)


def build_p3(scenario: Scenario, max_order: int = 3, limits: SolverLimits = SolverLimits(),
             product: Optional[InterferenceProduct] = None) -> IntegerProgram:
    """
    Expectation-linearised program

    c is the linearisation of the negated interference product, so
    maximising c.n minimises the product.
    """
    return _build(scenario, max_order, WeightRule.LEMMA1, limits, product)


def build_p4(scenario: Scenario, max_order: int = 3, limits: SolverLimits = SolverLimits(),
             product: Optional[InterferenceProduct] = None) -> IntegerProgram:
    """Upper-bound program: same constraints, arithmetic-mean weights"""
    return _build(scenario, max_order, WeightRule.UPPER_BOUND, limits, product)
