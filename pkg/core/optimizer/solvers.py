"""
Nulling assignment solvers
Cutting plane, unimodular LP, heuristic, brute force, P4 bound and the
No-Nulling baseline, all returning a SolveReport
"""

import logging
import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..config import Method, SolverLimits
from ..errors import (InfeasibleProgramError, IntegralityError, NotSpecialCaseError,
                      SizeGuardError)
from ..hetnet import NullingAssignment, Scenario, sum_rate, sum_rate_batch
from .objective import InterferenceProduct
from .program import (IntegerProgram, build_p3, build_p4, check_program_size, constraint_system,
                      objective_vector)
from .polynomial import WeightRule
from .simplex import gomory_cut, simplex_solve, snap

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
BRUTE_FORCE_BATCH = 4096


@dataclass
class SolveReport:
    """Outcome of one method on one scenario; rates in bits/s/Hz"""
    assignment: NullingAssignment
    objective_linearized: float
    objective_exact_rate: float
    method: Method
    cuts_added: int = 0
    solve_time_ms: float = 0.0
    surrogate_value: float = float('nan')
    p2_assignment: Optional[NullingAssignment] = None
    lp_relaxation: float = float('nan')
    nodes: int = 0

    def to_document(self) -> Dict[str, Any]:
        doc = {
            'method': self.method.value,
            'assignment': self.assignment.n.tolist(),
            'objective_linearized': _json_float(self.objective_linearized),
            'objective_exact_rate_bps_hz': _json_float(self.objective_exact_rate),
            'surrogate_value': _json_float(self.surrogate_value),
            'lp_relaxation': _json_float(self.lp_relaxation),
            'cuts_added': self.cuts_added,
            'branch_nodes': self.nodes,
            'solve_time_ms': self.solve_time_ms,
        }
        if self.p2_assignment is not None:
            doc['p2_assignment'] = self.p2_assignment.n.tolist()
        return doc


def _json_float(value: float) -> Optional[float]:
    return None if value is None or math.isnan(value) else float(value)


def _bits(scenario: Scenario, assignment: NullingAssignment) -> float:
    return sum_rate(scenario, assignment) / LN2


# === INTEGER PROGRAMS ===

@dataclass
class IntegerSolution:
    x: np.ndarray
    value: Fraction
    cuts_added: int = 0
    nodes: int = 0
    lp_bound: float = float('nan')


def _use_exact(limits: SolverLimits, n_vars: int) -> bool:
    if limits.arithmetic == 'exact':
        return True
    if limits.arithmetic == 'float':
        return False
    return n_vars <= limits.exact_block_limit


def _is_integral(x: np.ndarray, tol: float) -> bool:
    return bool(np.all(np.abs(x - np.rint(x)) <= tol))


def _floor_integer_rows(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Integer rows keep only the integer part of their bound"""
    integral = np.all(A == np.rint(A), axis=1)
    snapped = np.array([snap(float(v)) for v in b])
    return np.where(integral, np.floor(snapped), b)


def _branch_and_bound(ip: IntegerProgram, A: np.ndarray, b: np.ndarray, exact: bool,
                      limits: SolverLimits) -> Tuple[np.ndarray, Fraction, int]:
    """Depth-first branching on the most fractional variable"""
    n = ip.n_vars
    best_x, best_value = None, None
    zero = np.zeros(n)
    if np.all(A @ zero <= b):
        best_x, best_value = zero, Fraction(0)

    stack: List[Tuple[Tuple[int, int], ...]] = [()]
    nodes = 0
    while stack and nodes < limits.max_bnb_nodes:
        fixes = stack.pop()
        nodes += 1
        rows = np.zeros((len(fixes), n))
        rhs = np.zeros(len(fixes))
        for r, (var, val) in enumerate(fixes):
            # x_var <= 0, or -x_var <= -1
            rows[r, var] = 1.0 if val == 0 else -1.0
            rhs[r] = 0.0 if val == 0 else -1.0
        try:
            lp = simplex_solve(ip.c, np.vstack([A, rows]), np.concatenate([b, rhs]), exact)
        except InfeasibleProgramError:
            continue
        if best_value is not None:
            bound = lp.value if exact else Fraction(float(lp.value))
            if bound <= best_value:
                continue

        x = lp.x_float
        distance = np.abs(x - np.rint(x))
        if distance.max() <= limits.integrality_tol:
            xi = np.rint(x)
            value = ip.evaluate(xi)
            if best_value is None or value > best_value:
                best_x, best_value = xi, value
            continue
        var = int(np.argmax(distance))
        stack.append(fixes + ((var, 0),))
        stack.append(fixes + ((var, 1),))

    if stack:
        logger.warning("branch and bound stopped at its %d-node limit", limits.max_bnb_nodes)
    if best_x is None:
        raise InfeasibleProgramError("no integer point found")
    return best_x, best_value, nodes


def solve_block(ip: IntegerProgram, limits: SolverLimits = SolverLimits()) -> IntegerSolution:
    """
    Cutting-plane loop on one block

    Re-solves the LP after every Gomory cut until the optimum is integral;
    past max_cuts (or when no violated cut can be read off in float mode)
    it branches instead.
    """
    exact = _use_exact(limits, ip.n_vars)
    tol = limits.integrality_tol
    A = ip.A.copy()
    b = _floor_integer_rows(A, ip.b)
    cuts = 0
    lp_bound = None

    while True:
        lp = simplex_solve(ip.c, A, b, exact)
        if lp_bound is None:
            lp_bound = float(lp.value)
        x = lp.x_float
        if _is_integral(x, tol):
            xi = np.rint(x)
            return IntegerSolution(xi, ip.evaluate(xi), cuts, 0, lp_bound)
        if cuts >= limits.max_cuts:
            logger.info("cut limit %d reached on a %d-variable block; branching",
                        limits.max_cuts, ip.n_vars)
            break

        cut = None
        for row in lp.tableau.fractional_rows(tol):
            a_star, b_star = gomory_cut(lp.tableau, row)
            if a_star @ x > b_star + tol:
                cut = (a_star, b_star)
                break
        if cut is None:
            logger.debug("no violated cut on the current tableau; branching")
            break
        A = np.vstack([A, cut[0].astype(float)])
        b = np.append(b, float(cut[1]))
        cuts += 1
        logger.debug("cut %d: %s <= %d", cuts, cut[0].tolist(), cut[1])

    xi, value, nodes = _branch_and_bound(ip, A, b, exact, limits)
    return IntegerSolution(xi, value, cuts, nodes, lp_bound)


def _check_empty_rows(ip: IntegerProgram) -> None:
    empty = ~np.any(ip.A != 0, axis=1)
    if np.any(ip.b[empty] < 0):
        raise InfeasibleProgramError("a constraint without variables has a negative bound")


def solve_integer_program(ip: IntegerProgram,
                          limits: SolverLimits = SolverLimits()) -> IntegerSolution:
    """Solve every independent block and stitch the solutions"""
    _check_empty_rows(ip)
    x = np.zeros(ip.n_vars)
    cuts = nodes = 0
    lp_bound = 0.0
    for block in ip.split_blocks():
        sol = solve_block(block, limits)
        x[block.columns] = sol.x
        cuts += sol.cuts_added
        nodes += sol.nodes
        lp_bound += sol.lp_bound
    return IntegerSolution(x, ip.evaluate(x), cuts, nodes, lp_bound)


def _assignment_of(ip: IntegerProgram, x: np.ndarray) -> NullingAssignment:
    return NullingAssignment.from_vector(x, ip.K, ip.J1)


def solve_cutting_plane(ip: IntegerProgram, limits: SolverLimits = SolverLimits(),
                        scenario: Optional[Scenario] = None,
                        method: Method = Method.CUTTING_PLANE) -> SolveReport:
    """
    Gomory cutting-plane solve of a 0-1 program

    Args:
        ip: the program
        limits: cut limit, tolerance and arithmetic
        scenario: when given, the exact sum rate of the result is reported

    Raises:
        InfeasibleProgramError: the program has no feasible point
    """
    start = time.perf_counter()
    sol = solve_integer_program(ip, limits)
    assignment = _assignment_of(ip, sol.x)
    rate = _bits(scenario, assignment) if scenario is not None else float('nan')
    elapsed = (time.perf_counter() - start) * 1000.0
    logger.debug("%s: objective %.6g with %d cuts, %d nodes",
                 method.value, float(sol.value), sol.cuts_added, sol.nodes)
    return SolveReport(assignment, float(sol.value), rate, method, sol.cuts_added, elapsed,
                       lp_relaxation=sol.lp_bound, nodes=sol.nodes)


# === SCENARIO-LEVEL METHODS ===

def solve_p3(scenario: Scenario, max_order: int = 3, limits: SolverLimits = SolverLimits(),
             product: Optional[InterferenceProduct] = None) -> SolveReport:
    """Expectation-linearised program solved by cutting planes"""
    product = product or InterferenceProduct.from_scenario(scenario)
    ip = build_p3(scenario, max_order, limits, product)
    report = solve_cutting_plane(ip, limits, scenario, Method.CUTTING_PLANE)
    report.surrogate_value = product.surrogate_value(report.assignment, max_order)
    return report


def solve_upper_bound_p4(scenario: Scenario, max_order: int = 3,
                         limits: SolverLimits = SolverLimits(),
                         product: Optional[InterferenceProduct] = None) -> SolveReport:
    """
    Upper-bound program; its optimum bounds the truncated product surrogate
    of every feasible assignment from above
    """
    product = product or InterferenceProduct.from_scenario(scenario)
    ip = build_p4(scenario, max_order, limits, product)
    report = solve_cutting_plane(ip, limits, scenario, Method.UPPER_BOUND_P4)
    report.surrogate_value = report.objective_linearized
    return report


def is_special_case(scenario: Scenario) -> bool:
    """q_{k,j} = L_j for every k"""
    return scenario.K == 0 or bool(np.all(scenario.paths == scenario.paths[0:1, :]))


def solve_unimodular(scenario: Scenario, max_order: int = 3,
                     limits: SolverLimits = SolverLimits(),
                     product: Optional[InterferenceProduct] = None) -> SolveReport:
    """
    One LP solve when every BS sees a fixed number of paths

    The Q rows become all ones with capacities floor(E_j / L_j); the matrix
    is then totally unimodular and the LP optimum is integral.

    Raises:
        NotSpecialCaseError: q varies within some BS column
        SizeGuardError: K(J+1) above limits.max_program_vars
        IntegralityError: the LP optimum came back fractional
    """
    if not is_special_case(scenario):
        raise NotSpecialCaseError("multipath counts vary per BS; use the cutting-plane method")
    check_program_size(scenario, limits)
    start = time.perf_counter()
    product = product or InterferenceProduct.from_scenario(scenario)
    A, b = constraint_system(scenario, unimodular=True)
    c, probability = objective_vector(scenario, max_order, WeightRule.LEMMA1, limits, product)
    ip = IntegerProgram(c, A, b, scenario.K, scenario.J + 1, probability=probability)

    x = np.zeros(ip.n_vars)
    lp_bound = 0.0
    for block in ip.split_blocks():
        lp = simplex_solve(block.c, block.A, block.b, _use_exact(limits, block.n_vars))
        xb = lp.x_float
        if not _is_integral(xb, limits.integrality_tol):
            raise IntegralityError(f"LP optimum is fractional: {xb.tolist()}")
        x[block.columns] = np.rint(xb)
        lp_bound += float(lp.value)

    assignment = _assignment_of(ip, x)
    elapsed = (time.perf_counter() - start) * 1000.0
    return SolveReport(assignment, float(ip.evaluate(x)), _bits(scenario, assignment),
                       Method.LP_UNIMODULAR, 0, elapsed,
                       surrogate_value=product.surrogate_value(assignment, max_order),
                       lp_relaxation=lp_bound)


def heuristic_assignment(scenario: Scenario) -> NullingAssignment:
    """
    Each BS nulls its strongest interferers (p_k g_{k,j}, ties by index)
    until the next one no longer fits its spare DoF
    """
    n = np.zeros((scenario.K, scenario.J + 1), dtype=np.int8)
    strength = scenario.user_power[:, None] * scenario.gains
    for j in range(scenario.J + 1):
        remaining = int(scenario.spare_dof[j])
        candidates = np.flatnonzero(scenario.association[:, j] == 0)
        # stable sort keeps index order among equal powers
        order = candidates[np.argsort(-strength[candidates, j], kind='stable')]
        for k in order:
            q = int(scenario.paths[k, j])
            if q > remaining:
                break
            n[k, j] = 1
            remaining -= q
    return NullingAssignment(n)


def solve_heuristic(scenario: Scenario) -> SolveReport:
    start = time.perf_counter()
    assignment = heuristic_assignment(scenario)
    elapsed = (time.perf_counter() - start) * 1000.0
    return SolveReport(assignment, float('nan'), _bits(scenario, assignment),
                       Method.HEURISTIC, 0, elapsed)


def solve_no_nulling(scenario: Scenario) -> SolveReport:
    start = time.perf_counter()
    assignment = NullingAssignment.zeros(scenario)
    elapsed = (time.perf_counter() - start) * 1000.0
    return SolveReport(assignment, float('nan'), _bits(scenario, assignment),
                       Method.NO_NULLING, 0, elapsed)


def _feasible_columns(scenario: Scenario, j: int) -> np.ndarray:
    """Every feasible nulling column of BS j, shape (options, K)"""
    candidates = np.flatnonzero(scenario.association[:, j] == 0)
    weights = scenario.paths[candidates, j]
    masks = np.arange(2 ** len(candidates))
    bits = (masks[:, None] >> np.arange(len(candidates))[None, :]) & 1
    fits = bits @ weights <= scenario.spare_dof[j]
    columns = np.zeros((int(fits.sum()), scenario.K), dtype=np.int8)
    columns[:, candidates] = bits[fits]
    return columns


def enumerate_feasible(scenario: Scenario, batch: int = BRUTE_FORCE_BATCH):
    """Yield batches (B, K, J+1) covering every feasible assignment once"""
    options = [_feasible_columns(scenario, j) for j in range(scenario.J + 1)]
    sizes = np.array([len(o) for o in options], dtype=np.int64)
    total = int(np.prod(sizes))
    for start in range(0, total, batch):
        index = np.arange(start, min(start + batch, total))
        out = np.zeros((len(index), scenario.K, scenario.J + 1), dtype=np.int8)
        rest = index
        for j in range(scenario.J + 1):
            rest, digit = np.divmod(rest, sizes[j])
            out[:, :, j] = options[j][digit]
        yield out


def solve_brute_force(scenario: Scenario, limits: SolverLimits = SolverLimits(),
                      product: Optional[InterferenceProduct] = None) -> SolveReport:
    """
    Exhaustive oracle over feasible assignments

    Returns the exact sum-rate maximiser and, as p2_assignment, the
    minimiser of the exact interference product.

    Raises:
        SizeGuardError: K(J+1) above limits.brute_force_max_vars
    """
    n_vars = scenario.K * (scenario.J + 1)
    if n_vars > limits.brute_force_max_vars:
        raise SizeGuardError(
            f"brute force limited to {limits.brute_force_max_vars} variables, got {n_vars}")
    start = time.perf_counter()
    product = product or InterferenceProduct.from_scenario(scenario)

    best_rate, best_n = -np.inf, None
    best_p2, best_p2_n = np.inf, None
    for batch in enumerate_feasible(scenario):
        rates = sum_rate_batch(scenario, batch)
        i = int(np.argmax(rates))
        if rates[i] > best_rate:
            best_rate, best_n = rates[i], batch[i]
        logs = np.atleast_1d(product.log_value(batch))
        i = int(np.argmin(logs))
        if logs[i] < best_p2:
            best_p2, best_p2_n = logs[i], batch[i]

    assignment = NullingAssignment(best_n)
    elapsed = (time.perf_counter() - start) * 1000.0
    return SolveReport(assignment, float('nan'), _bits(scenario, assignment),
                       Method.BRUTE_FORCE, 0, elapsed,
                       p2_assignment=NullingAssignment(best_p2_n))


def solve(scenario: Scenario, method: Method, max_order: int = 3,
          limits: SolverLimits = SolverLimits(),
          product: Optional[InterferenceProduct] = None) -> SolveReport:
    """
    Run one method and fill in the surrogate value of its assignment

    Every returned assignment is checked against the budget constraints.
    """
    method = Method(method)
    if method is Method.CUTTING_PLANE:
        report = solve_p3(scenario, max_order, limits, product)
    elif method is Method.UPPER_BOUND_P4:
        report = solve_upper_bound_p4(scenario, max_order, limits, product)
    elif method is Method.LP_UNIMODULAR:
        report = solve_unimodular(scenario, max_order, limits, product)
    elif method is Method.HEURISTIC:
        report = solve_heuristic(scenario)
    elif method is Method.BRUTE_FORCE:
        report = solve_brute_force(scenario, limits, product)
    else:
        report = solve_no_nulling(scenario)

    report.assignment.check(scenario)
    if math.isnan(report.surrogate_value):
        try:
            product = product or InterferenceProduct.from_scenario(scenario)
            report.surrogate_value = product.surrogate_value(report.assignment, max_order)
        except SizeGuardError as e:
            logger.debug("no surrogate for %s: %s", method.value, e)
    return report
