"""
Co-array beamforming
Weights that pass desired directions at unit gain and null interferers
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .coarray import (ArrayGeometry, SourceEnsemble, coarray_manifold_column,
                      identity_indicator, steering_matrix)
from .errors import DofExceededError, UnachievablePatternError

logger = logging.getLogger(__name__)

# Solve residual and null-depth certificate
RESIDUAL_TOL = 1e-8
NULL_DEPTH_TOL = 1e-6


@dataclass(frozen=True)
class NullingSpec:
    """Desired and null directions for one co-array beamformer"""
    desired_dirs: Tuple[float, ...]
    null_dirs: Tuple[float, ...] = ()
    null_noise: bool = True

    def __post_init__(self):
        desired = tuple(float(t) for t in self.desired_dirs)
        nulls = tuple(float(t) for t in self.null_dirs)
        everything = desired + nulls
        if len(set(everything)) != len(everything):
            raise ValueError("desired and null directions must be pairwise distinct")
        object.__setattr__(self, 'desired_dirs', desired)
        object.__setattr__(self, 'null_dirs', nulls)

    @property
    def row_count(self) -> int:
        return len(self.desired_dirs) + len(self.null_dirs) + int(self.null_noise)


@dataclass(frozen=True)
class CoArrayWeights:
    """Solved co-array weight vector w (length N^2) and its solve residual"""
    w: np.ndarray
    residual: float
    geometry: ArrayGeometry

    def pattern(self, theta: float) -> complex:
        return beam_pattern(self.geometry, self.w, theta)

    def certifies(self, tol: float = RESIDUAL_TOL) -> bool:
        return self.residual <= tol


def pattern_rows_fit(rows: int, budget: int) -> bool:
    """Shared DoF rule: a pattern with `rows` constraints fits a budget of `budget`"""
    return rows <= budget


def _manifold_block(geometry: ArrayGeometry, thetas: Sequence[float]) -> np.ndarray:
    # columns conj(a) kron a, vectorised over directions (N^2 x D)
    F = steering_matrix(geometry, thetas)
    n = geometry.size
    return (F.conj()[:, None, :] * F[None, :, :]).reshape(n * n, -1)


def build_constraint_system(geometry: ArrayGeometry,
                            spec: NullingSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Stack the pattern constraints M w = rhs

    Rows are (conj(a) kron a)^H for each desired then null direction, followed
    by the flattened identity row when noise is nulled.

    Args:
        geometry: physical array
        spec: directions to pass and null

    Returns:
        (M, rhs) with M complex (rows x N^2) and rhs real

    Raises:
        DofExceededError: more rows than N^2
    """
    n2 = geometry.size ** 2
    rows = spec.row_count
    if not pattern_rows_fit(rows, n2):
        raise DofExceededError(rows, n2)

    blocks = []
    dirs = spec.desired_dirs + spec.null_dirs
    if dirs:
        blocks.append(_manifold_block(geometry, dirs).conj().T)
    if spec.null_noise:
        blocks.append(identity_indicator(geometry.size).reshape(1, -1).astype(complex))
    M = np.vstack(blocks) if blocks else np.zeros((0, n2), dtype=complex)

    rhs = np.zeros(rows)
    rhs[:len(spec.desired_dirs)] = 1.0
    return M, rhs


def solve_weights(geometry: ArrayGeometry, spec: NullingSpec,
                  tol: float = RESIDUAL_TOL) -> CoArrayWeights:
    """
    Minimum-norm co-array weights for a nulling spec

    Args:
        geometry: physical array
        spec: directions to pass and null
        tol: residual above which the pattern is declared unachievable

    Returns:
        CoArrayWeights with the solve residual

    Raises:
        DofExceededError: too many constraints
        UnachievablePatternError: constraints inconsistent (residual > tol)
    """
    M, rhs = build_constraint_system(geometry, spec)
    if len(spec.desired_dirs) < 1:
        raise ValueError("a weight solve needs at least one desired direction")

    # lstsq returns the minimum-norm least-squares solution
    w, *_ = linalg.lstsq(M, rhs.astype(complex))
    residual = float(np.linalg.norm(M @ w - rhs))
    logger.debug("solved %d pattern rows on %d sensors, residual %.3e",
                 M.shape[0], geometry.size, residual)

    if residual > tol:
        rank = np.linalg.matrix_rank(M)
        if rank < M.shape[0]:
            raise UnachievablePatternError(residual, tol)
        # full row rank but badly conditioned: keep the weights, report the residual
        logger.warning("ill-conditioned pattern system, residual %.3e", residual)
    return CoArrayWeights(w, residual, geometry)


def beam_pattern(geometry: ArrayGeometry, w: np.ndarray, theta: float) -> complex:
    """B(theta) = w^H (conj(a(theta)) kron a(theta))"""
    w = np.asarray(w)
    if w.shape != (geometry.size ** 2,):
        raise ValueError(f"weight vector must have length {geometry.size ** 2}")
    return complex(np.vdot(w, coarray_manifold_column(geometry, theta)))


def pattern_grid(weights: CoArrayWeights, grid: int) -> np.ndarray:
    """
    Sample B(theta) on a uniform grid over (-90, 90) degrees

    Returns:
        array of shape (grid, 2): theta in degrees and complex B
    """
    theta_deg = np.linspace(-90.0, 90.0, grid + 2)[1:-1]
    block = _manifold_block(weights.geometry, np.deg2rad(theta_deg))
    values = weights.w.conj() @ block
    return np.column_stack([theta_deg, values])


def filtered_power(weights: CoArrayWeights, ensemble: SourceEnsemble) -> float:
    """
    Beamformer output r' = sum_i B(theta_i) sigma_i^2 + sigma_n^2 w^H 1

    For solved weights the output is real up to the residual; the real part
    is returned.
    """
    geometry = weights.geometry
    total = ensemble.noise_power * np.vdot(weights.w, identity_indicator(geometry.size))
    if ensemble.size:
        gains = weights.w.conj() @ _manifold_block(geometry, ensemble.directions)
        total = total + gains @ np.asarray(ensemble.powers)
    return float(np.real(total))


def realize_bs_nulling(served_paths: Sequence[float], nulled_paths: Sequence[float],
                       geometry: ArrayGeometry, dof_budget: Optional[int] = None,
                       tol: float = RESIDUAL_TOL) -> CoArrayWeights:
    """
    Co-array weights realising one BS's nulling decision

    Args:
        served_paths: path directions of the BS's own users (unit gain)
        nulled_paths: path directions of the users it nulls
        geometry: the BS array
        dof_budget: D_j; checked with the same rule as the optimizer's budget

    Returns:
        CoArrayWeights
    """
    spec = NullingSpec(tuple(served_paths), tuple(nulled_paths), null_noise=True)
    if dof_budget is not None and not pattern_rows_fit(spec.row_count, dof_budget):
        raise DofExceededError(spec.row_count, dof_budget)
    return solve_weights(geometry, spec, tol)


def max_null_depth(weights: CoArrayWeights, null_dirs: Sequence[float]) -> float:
    """Largest |B| over the null directions (0 when there are none)"""
    if len(null_dirs) == 0:
        return 0.0
    values = weights.w.conj() @ _manifold_block(weights.geometry, null_dirs)
    return float(np.max(np.abs(values)))
