"""
Test co-array beamforming
Constraint stacking, nulling weight solves, patterns and filtered power
"""

import numpy as np
import pytest
from scipy import linalg

from core.beamforming import (CoArrayWeights, NullingSpec, beam_pattern, build_constraint_system,
                              filtered_power, max_null_depth, pattern_grid, realize_bs_nulling,
                              solve_weights)
from core.coarray import ArrayGeometry, SourceEnsemble, identity_indicator, nested_positions
from core.errors import DofExceededError, UnachievablePatternError

deg = np.deg2rad


def test_single_desired_row():
    geometry = nested_positions(2, 2)
    M, rhs = build_constraint_system(geometry, NullingSpec((0.2,), (), null_noise=False))
    assert M.shape == (1, 16)
    assert rhs.tolist() == [1.0]


def test_stacked_rows():
    geometry = nested_positions(2, 2)
    spec = NullingSpec(deg([10, -20]), deg([30, 45, -60]), null_noise=True)
    M, rhs = build_constraint_system(geometry, spec)
    assert M.shape == (6, 16)
    assert rhs.tolist() == [1, 1, 0, 0, 0, 0]
    assert np.allclose(M[-1], identity_indicator(4))


def test_too_many_rows():
    geometry = ArrayGeometry((1, 2))
    spec = NullingSpec(deg([0, 10]), deg([30, -30]), null_noise=True)
    with pytest.raises(DofExceededError) as info:
        build_constraint_system(geometry, spec)
    assert info.value.rows == 5
    assert info.value.budget == 4


def test_ula_passes_broadside():
    weights = solve_weights(ArrayGeometry((1, 2, 3)), NullingSpec((0.0,)))
    assert abs(weights.pattern(0.0) - 1) < 1e-10


def test_nested_nulls():
    geometry = nested_positions(2, 2)
    nulls = deg([-40, 25, 60])
    weights = solve_weights(geometry, NullingSpec(deg([10]), nulls))
    assert abs(weights.pattern(deg(10)) - 1) < 1e-8
    for eta in nulls:
        assert abs(weights.pattern(eta)) < 1e-8
    assert max_null_depth(weights, nulls) < 1e-8


def test_weights_have_minimum_norm():
    geometry = nested_positions(2, 2)
    spec = NullingSpec(deg([10]), deg([-40, 25]))
    M, _ = build_constraint_system(geometry, spec)
    weights = solve_weights(geometry, spec)
    # no component along the null space of the constraint rows
    kernel = linalg.null_space(M)
    assert kernel.shape[1] > 0
    assert np.linalg.norm(kernel.conj().T @ weights.w) < 1e-8


def test_near_duplicate_desired_directions():
    geometry = nested_positions(3, 3)
    spec = NullingSpec((deg(20), deg(20.01)), (deg(-50),))
    weights = solve_weights(geometry, spec)
    assert np.isfinite(weights.residual)


def test_inconsistent_pattern():
    # a two-sensor co-array cannot null two directions and noise while passing a third
    geometry = ArrayGeometry((0, 1))
    with pytest.raises(UnachievablePatternError) as info:
        solve_weights(geometry, NullingSpec((0.0,), (0.3, -0.5)))
    assert info.value.residual > info.value.tolerance


def test_needs_a_desired_direction():
    with pytest.raises(ValueError):
        solve_weights(nested_positions(2, 2), NullingSpec((), (0.3,)))


def test_directions_must_be_distinct():
    with pytest.raises(ValueError):
        NullingSpec((0.3,), (0.3,))


def test_random_null_depth():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n1, n2 = rng.integers(1, 5, size=2)
        geometry = nested_positions(int(n1), int(n2))
        lags = 2 * (int(n2) * (int(n1) + 1) - 1) + 1
        # keep the rows below the distinct-lag count so the system has full row rank
        rows = int(rng.integers(2, min(lags, 8) + 1))
        n_desired = int(rng.integers(1, rows))
        angles = rng.choice(np.arange(-80, 81, 7), size=rows - 1, replace=False)
        spec = NullingSpec(tuple(deg(angles[:n_desired])), tuple(deg(angles[n_desired:])))
        weights = solve_weights(geometry, spec)
        for delta in spec.desired_dirs:
            assert abs(weights.pattern(delta) - 1) <= 1e-6
        assert max_null_depth(weights, spec.null_dirs) <= 1e-6


# === PATTERNS ===

def test_identity_weights_give_unit_pattern():
    geometry = nested_positions(2, 3)
    w = identity_indicator(geometry.size) / geometry.size
    for theta in (-1.2, 0.0, 0.4):
        assert beam_pattern(geometry, w, theta) == pytest.approx(1.0)


def test_zero_weights():
    geometry = nested_positions(2, 2)
    assert beam_pattern(geometry, np.zeros(16), 0.7) == 0


def test_weight_length_checked():
    with pytest.raises(ValueError):
        beam_pattern(nested_positions(2, 2), np.zeros(5), 0.0)


def test_pattern_grid_matches_pointwise():
    geometry = nested_positions(2, 2)
    weights = solve_weights(geometry, NullingSpec((deg(15),), (deg(-30),)))
    grid = pattern_grid(weights, 9)
    assert grid.shape == (9, 2)
    assert -90 < grid[0, 0].real < grid[-1, 0].real < 90
    for theta_deg, value in grid:
        assert value == pytest.approx(weights.pattern(deg(theta_deg.real)))


# === FILTERED POWER ===

def test_filtered_power_keeps_desired_source():
    geometry = nested_positions(3, 3)
    desired, nulls = deg([5]), deg([-35, 50])
    weights = solve_weights(geometry, NullingSpec(tuple(desired), tuple(nulls)))
    ensemble = SourceEnsemble(tuple(desired) + tuple(nulls), (5.0, 3.0, 7.0), noise_power=2.0)
    assert filtered_power(weights, ensemble) == pytest.approx(5.0, abs=1e-6)


def test_filtered_power_of_nulled_sources():
    geometry = nested_positions(3, 3)
    nulls = deg([20, -35])
    weights = solve_weights(geometry, NullingSpec((0.0,), tuple(nulls)))
    ensemble = SourceEnsemble(tuple(nulls), (4.0, 9.0), noise_power=1.5)
    assert filtered_power(weights, ensemble) == pytest.approx(0.0, abs=1e-6)


def test_filtered_power_matches_direct_evaluation():
    geometry = nested_positions(2, 2)
    rng = np.random.default_rng(5)
    w = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    weights = CoArrayWeights(w, 0.0, geometry)
    ensemble = SourceEnsemble((-0.3, 0.5), (2.0, 0.5), noise_power=0.25)
    direct = sum(beam_pattern(geometry, w, t) * p
                 for t, p in zip(ensemble.directions, ensemble.powers))
    direct += 0.25 * np.vdot(w, identity_indicator(4))
    assert filtered_power(weights, ensemble) == pytest.approx(float(np.real(direct)))


# === BS REALISATION ===

def test_realize_respects_dof_budget():
    geometry = nested_positions(3, 3)
    with pytest.raises(DofExceededError):
        realize_bs_nulling(deg([0, 10]), deg([30, 40, 50]), geometry, dof_budget=5)


def test_realize_nulls():
    geometry = nested_positions(3, 3)
    nulls = deg([30, -45])
    weights = realize_bs_nulling(deg([0]), nulls, geometry, dof_budget=12)
    assert weights.certifies()
    assert max_null_depth(weights, nulls) <= 1e-6
    assert max_null_depth(weights, []) == 0.0
