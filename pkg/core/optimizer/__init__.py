# Nulling assignment optimizer
from .objective import (InterferenceProduct, expand_objective, lemma1_formula,
                        lemma1_probability, p2_log_objective, p2_objective,
                        per_bs_probability)
from .polynomial import (LinearFactor, PolynomialObjective, WeightRule, expand_product,
                         linearize)
from .program import IntegerProgram, build_p3, build_p4, check_program_size, constraint_system
from .simplex import LPSolution, Tableau, fractional_cut, gomory_cut, simplex_solve
from .solvers import (SolveReport, heuristic_assignment, solve, solve_brute_force,
                      solve_cutting_plane, solve_heuristic, solve_integer_program,
                      solve_no_nulling, solve_p3, solve_unimodular, solve_upper_bound_p4)
