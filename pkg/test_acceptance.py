"""
Long Monte Carlo acceptance runs
Deselect with: pytest -m "not slow"
"""

import itertools

import numpy as np
import pandas as pd
import pytest

from conftest import ASSETS, random_scenarios, small_config
from core.config import Method, load_config
from core.harness import reports_frame, run_experiment
from core.optimizer import (IntegerProgram, solve_integer_program, solve_p3, solve_unimodular,
                            solve_upper_bound_p4)
from core.optimizer.objective import InterferenceProduct
from core.optimizer.solvers import enumerate_feasible

pytestmark = pytest.mark.slow


def test_cutting_plane_against_exhaustive_search():
    rng = np.random.default_rng(2024)
    for _ in range(500):
        n = int(rng.integers(2, 13))
        rows = int(rng.integers(1, 4))
        A = np.vstack([rng.integers(0, 4, size=(rows, n)), np.eye(n)])
        b = np.concatenate([rng.integers(0, 2 * n, size=rows), np.ones(n)])
        ip = IntegerProgram(np.round(rng.normal(size=n), 3), A, b)

        best = max(ip.evaluate(np.array(p, dtype=float))
                   for p in itertools.product([0, 1], repeat=n)
                   if np.all(A @ np.array(p) <= b))
        solution = solve_integer_program(ip)
        assert solution.value == best
        assert ip.is_feasible(solution.x)


@pytest.mark.parametrize("paths", [1, 2])
def test_unimodular_fast_path(paths):
    for s in random_scenarios(50, seed=300 + paths, fixed_paths=paths):
        fast = solve_unimodular(s)
        assert fast.objective_linearized == pytest.approx(
            solve_p3(s).objective_linearized, rel=1e-12, abs=1e-12)


def test_relaxed_bound_holds():
    for s in random_scenarios(100, seed=400):
        product = InterferenceProduct.from_scenario(s)
        bound = solve_upper_bound_p4(s, product=product).surrogate_value
        assert solve_p3(s, product=product).surrogate_value <= bound + 1e-9
        best = max(product.surrogate_value(n) for batch in enumerate_feasible(s) for n in batch)
        assert best <= bound + 1e-9


def _desk_sweep():
    return small_config(n_sbs=[1, 2, 3], n_users=5, trials=20, seed=11, dof_mbs=12,
                        macro_radius=200.0)


def test_desk_scale_sweep():
    frame = reports_frame(run_experiment(_desk_sweep()))
    assert (frame['error'] == '').all()

    wide = frame.pivot(index='trial_id', columns='method')
    rate = wide['sum_rate_bps_hz']
    outage = wide['mu_outage_prob']
    surrogate = wide['surrogate_value']

    assert (rate[Method.CUTTING_PLANE.value] >= rate[Method.NO_NULLING.value] - 1e-9).all()
    assert (rate[Method.HEURISTIC.value] >= rate[Method.NO_NULLING.value] - 1e-9).all()
    assert (surrogate[Method.CUTTING_PLANE.value]
            <= surrogate[Method.UPPER_BOUND_P4.value] + 1e-9).all()

    cp = outage[Method.CUTTING_PLANE.value]
    base = outage[Method.NO_NULLING.value]
    measured = cp.notna() & base.notna()
    assert (cp[measured] <= base[measured] + 1e-12).all()


def test_desk_sweep_is_reproducible():
    a = reports_frame(run_experiment(_desk_sweep()))
    b = reports_frame(run_experiment(_desk_sweep()))
    pd.testing.assert_frame_equal(a, b)


def test_default_sweep_trends():
    config = load_config(ASSETS / 'default_config.json', trials=100)
    assert config.n_sbs_values == [2, 4, 6, 8]
    assert config.n_users_values == [30]
    frame = reports_frame(run_experiment(config))
    assert (frame['error'] == '').all()

    means = frame.groupby(['n_sbs', 'method'])[['sum_rate_bps_hz', 'mu_outage_prob']].mean()
    rate = means['sum_rate_bps_hz'].unstack('method')
    outage = means['mu_outage_prob'].unstack('method')
    cp = rate[Method.CUTTING_PLANE.value]
    heuristic = rate[Method.HEURISTIC.value]
    base = rate[Method.NO_NULLING.value]

    assert (cp >= heuristic - 1e-9).all()
    assert (heuristic >= base - 1e-9).all()
    assert base[8] < base[2]
    assert outage[Method.NO_NULLING.value].is_monotonic_increasing

    surrogate = frame.pivot(index='trial_id', columns='method', values='surrogate_value')
    assert (surrogate[Method.CUTTING_PLANE.value]
            <= surrogate[Method.UPPER_BOUND_P4.value] + 1e-9).all()
