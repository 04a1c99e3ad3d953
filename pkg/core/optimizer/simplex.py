"""
Dense tableau simplex
Two-phase primal simplex with Bland's rule in exact (Fraction) or float
arithmetic, and Gomory cuts read off the final tableau
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import (InfeasibleProgramError, NoFractionalRowError, NumericalError,
                      UnboundedProgramError)

logger = logging.getLogger(__name__)

FLOAT_TOL = 1e-9
# float values this close to an integer are treated as that integer
SNAP_TOL = 1e-9

Number = Union[float, Fraction]


def _fraction(value) -> Fraction:
    return value if isinstance(value, Fraction) else Fraction(float(value))


def as_exact(values) -> np.ndarray:
    """Object array of Fractions (floats converted exactly)"""
    arr = np.asarray(values, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        out[idx] = _fraction(v)
    return out


def snap(value: float) -> float:
    nearest = round(value)
    return float(nearest) if abs(value - nearest) <= SNAP_TOL else value


def frac_part(value: Number, exact: bool) -> Number:
    if exact:
        return value - math.floor(value)
    v = snap(float(value))
    return v - math.floor(v)


class Tableau:
    """
    Simplex tableau for max c.x s.t. A x <= b, x >= 0

    Columns are the n structural variables, one slack per original row
    (s = b - A x), then phase-1 artificials; the last column is the rhs and
    the last row holds the reduced costs with the objective value in its
    rhs cell. Rows whose rhs is negative are negated and given an
    artificial.
    """

    def __init__(self, c, A, b, exact: bool = False, tol: Optional[float] = None):
        self.exact = exact
        self.tol = 0 if exact else (FLOAT_TOL if tol is None else tol)
        conv = as_exact if exact else (lambda v: np.asarray(v, dtype=float))

        self.c = conv(c)
        self.A = conv(np.atleast_2d(A))
        self.b = conv(b)
        m, n = self.A.shape
        self.n_struct = n
        self.n_slack = m

        negative = [i for i in range(m) if self.b[i] < 0]
        self.n_art = len(negative)
        width = n + m + self.n_art + 1
        T = np.empty((m + 1, width), dtype=object) if exact else np.zeros((m + 1, width))
        if exact:
            T.fill(Fraction(0))
        T[:m, :n] = self.A
        for i in range(m):
            T[i, n + i] = 1
            T[i, -1] = self.b[i]
        self.basis = [n + i for i in range(m)]
        for a, i in enumerate(negative):
            T[i, :] = -T[i, :]
            T[i, n + m + a] = 1
            self.basis[i] = n + m + a
        self.T = T
        self.pivots = 0

    # === ACCESS ===

    @property
    def m(self) -> int:
        return self.T.shape[0] - 1

    @property
    def value(self) -> Number:
        return self.T[-1, -1]

    def rhs(self, row: int) -> Number:
        return self.T[row, -1]

    def solution(self) -> np.ndarray:
        """Structural values (Fractions in exact mode)"""
        x = np.empty(self.n_struct, dtype=object) if self.exact else np.zeros(self.n_struct)
        if self.exact:
            x.fill(Fraction(0))
        for row, var in enumerate(self.basis):
            if var < self.n_struct:
                x[var] = self.T[row, -1]
        return x

    def fractional_rows(self, tol: float = 1e-6) -> List[int]:
        """Rows with a fractional rhs, most fractional first (ties by row)"""
        scored = []
        for row in range(self.m):
            f = float(frac_part(self.rhs(row), self.exact))
            distance = min(f, 1.0 - f)
            if distance > (0 if self.exact else tol):
                scored.append((-distance, row))
        return [row for _, row in sorted(scored)]

    # === PIVOTING ===

    def pivot(self, row: int, col: int) -> None:
        T = self.T
        T[row] = T[row] / T[row, col]
        column = T[:, col].copy()
        column[row] = 0
        T -= np.outer(column, T[row])
        self.basis[row] = col
        self.pivots += 1

    def _entering(self, limit: int) -> Optional[int]:
        reduced = self.T[-1, :limit]
        for j in range(limit):
            if reduced[j] < -self.tol:
                return j
        return None

    def _leaving(self, col: int) -> Optional[int]:
        best, best_ratio = None, None
        for i in range(self.m):
            a = self.T[i, col]
            if a > self.tol:
                ratio = self.T[i, -1] / a
                if (best is None or ratio < best_ratio
                        or (ratio == best_ratio and self.basis[i] < self.basis[best])):
                    best, best_ratio = i, ratio
        return best

    def _run(self, limit: int) -> None:
        max_pivots = 50 * (self.T.shape[0] + self.T.shape[1]) + 1000
        while True:
            col = self._entering(limit)
            if col is None:
                return
            row = self._leaving(col)
            if row is None:
                raise UnboundedProgramError(f"column {col} has no limiting row")
            self.pivot(row, col)
            if self.pivots > max_pivots:
                raise NumericalError(f"simplex exceeded {max_pivots} pivots")

    # === PHASES ===

    def _phase_one(self) -> None:
        n_real = self.n_struct + self.n_slack
        obj = self.T[-1]
        obj[:] = 0
        obj[n_real:-1] = 1
        for i, var in enumerate(self.basis):
            if var >= n_real:
                obj -= self.T[i]
        self._run(n_real + self.n_art)
        if self.value < -(0 if self.exact else 1e-7):
            raise InfeasibleProgramError(f"phase one ended at {float(self.value):.3e}")

        # drive zero-level artificials out; drop rows that cannot be pivoted
        redundant = []
        for i, var in enumerate(self.basis):
            if var < n_real:
                continue
            cols = [j for j in range(n_real) if abs(self.T[i, j]) > self.tol]
            if cols:
                self.pivot(i, cols[0])
            else:
                redundant.append(i)
        if redundant:
            keep = [i for i in range(self.m) if i not in redundant] + [self.m]
            self.T = self.T[keep]
            self.basis = [v for i, v in enumerate(self.basis) if i not in redundant]
        self.T = np.delete(self.T, np.s_[n_real:n_real + self.n_art], axis=1)
        self.n_art = 0

    def _phase_two(self) -> None:
        n = self.n_struct
        obj = self.T[-1]
        obj[:] = 0
        obj[:n] = -self.c
        for i, var in enumerate(self.basis):
            if obj[var] != 0:
                obj -= obj[var] * self.T[i]
        self._run(n + self.n_slack)

    def solve(self) -> "Tableau":
        if self.n_art:
            self._phase_one()
        self._phase_two()
        logger.debug("simplex optimum %s after %d pivots", float(self.value), self.pivots)
        return self


@dataclass
class LPSolution:
    """Optimal basic solution; unpacks as (x, basis, value)"""
    x: np.ndarray
    basis: List[int]
    value: Number
    tableau: Tableau

    def __iter__(self) -> Iterator:
        return iter((self.x, self.basis, self.value))

    @property
    def x_float(self) -> np.ndarray:
        return np.asarray([float(v) for v in self.x])


def simplex_solve(c: Sequence[float], A, b: Sequence[float], exact: bool = False,
                  tol: Optional[float] = None) -> LPSolution:
    """
    Solve max c.x s.t. A x <= b, x >= 0

    Args:
        c: objective
        A: constraint matrix
        b: bounds (negative entries allowed)
        exact: Fraction arithmetic instead of float
        tol: float pivot tolerance

    Returns:
        LPSolution with the optimal vertex, basis and value

    Raises:
        InfeasibleProgramError: no feasible point
        UnboundedProgramError: objective unbounded above
    """
    tableau = Tableau(c, A, b, exact, tol).solve()
    return LPSolution(tableau.solution(), list(tableau.basis), tableau.value, tableau)


def fractional_cut(tableau: Tableau, row: int) -> Tuple[np.ndarray, Number]:
    """
    Gomory fractional cut in tableau form: sum_j f_j t_j >= f_0

    Coefficients cover the structural then slack columns.
    """
    width = tableau.n_struct + tableau.n_slack
    f0 = frac_part(tableau.rhs(row), tableau.exact)
    if f0 == 0:
        raise NoFractionalRowError(f"row {row} has an integral right-hand side")
    coefs = [frac_part(v, tableau.exact) for v in tableau.T[row, :width]]
    return np.array(coefs, dtype=object if tableau.exact else float), f0


def _floor(value: Number, exact: bool) -> int:
    return math.floor(value) if exact else math.floor(snap(float(value)))


def gomory_cut(tableau: Tableau, row: int) -> Tuple[np.ndarray, int]:
    """
    Chvatal-Gomory cut from one tableau row, in the original variables

    Rounding the row down gives floor(t_x) x + floor(t_s) s <= floor(t_0),
    valid for integer points; substituting s = b - A x yields
    a* x <= b* with a* = floor(t_x) - floor(t_s) A and
    b* = floor(t_0) - floor(t_s) b. A and b must be integral.

    Raises:
        NoFractionalRowError: the row's rhs is already integral
    """
    exact = tableau.exact
    if frac_part(tableau.rhs(row), exact) == 0:
        raise NoFractionalRowError(f"row {row} has an integral right-hand side")

    n, m = tableau.n_struct, tableau.n_slack
    t = tableau.T[row]
    tx = np.array([_floor(v, exact) for v in t[:n]], dtype=np.int64)
    ts = np.array([_floor(v, exact) for v in t[n:n + m]], dtype=np.int64)
    A = np.array([[int(round(float(v))) for v in r] for r in tableau.A], dtype=np.int64).reshape(m, n)
    b = np.array([int(round(float(v))) for v in tableau.b], dtype=np.int64)

    a_star = tx - ts @ A
    b_star = int(_floor(tableau.rhs(row), exact) - ts @ b)
    return a_star, b_star
