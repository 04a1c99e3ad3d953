"""
Error types
Every failure the library raises on purpose derives from NullPlanError
"""


class NullPlanError(Exception):
    """Base class for all NullPlan errors"""


class ConfigError(NullPlanError):
    """Invalid experiment configuration or input document"""


class GeometryError(NullPlanError, ValueError):
    """Array geometry violates its invariants"""


class DofExceededError(NullPlanError):
    """More pattern constraints than the co-array can honour"""

    def __init__(self, rows: int, budget: int):
        super().__init__(f"DoF exceeded: {rows} pattern rows for a budget of {budget}")
        self.rows = rows
        self.budget = budget


class UnachievablePatternError(NullPlanError):
    """Pattern constraints are inconsistent"""

    def __init__(self, residual: float, tolerance: float):
        super().__init__(
            f"unachievable pattern: residual {residual:.3e} exceeds tolerance {tolerance:.1e}"
        )
        self.residual = residual
        self.tolerance = tolerance


class InfeasibleScenarioError(NullPlanError):
    """Serving load alone breaks a BS DoF budget"""

    def __init__(self, bs: int, load: int, budget: int):
        super().__init__(
            f"BS {bs}: serving load {load} + 1 noise DoF exceeds budget D={budget}"
        )
        self.bs = bs
        self.load = load
        self.budget = budget


class InfeasibleAssignmentError(NullPlanError):
    """A nulling assignment violates one of the P1 constraints"""

    def __init__(self, constraint: str, detail: str):
        super().__init__(f"constraint {constraint} violated: {detail}")
        self.constraint = constraint
        self.detail = detail


class InfeasibleProgramError(NullPlanError):
    """Linear or integer program has no feasible point"""


class UnboundedProgramError(NullPlanError):
    """Linear program objective is unbounded"""


class NotSpecialCaseError(NullPlanError):
    """Multipath counts are not constant per BS; use the cutting-plane path"""


class IntegralityError(NullPlanError):
    """LP optimum expected to be integral was not"""


class NoFractionalRowError(NullPlanError):
    """Cut requested on a tableau row whose value is already integral"""


class SizeGuardError(NullPlanError):
    """Instance too large for the requested method"""


class NoMacroUsersError(NullPlanError):
    """Outage statistic requested on a scenario without macro users"""


class GenerationError(NullPlanError):
    """Scenario generation gave up after its attempt cap"""


class NumericalError(NullPlanError):
    """Floating-point simplex stalled or lost feasibility"""
