"""
Test the two-tier HetNet model
Path loss, scenario invariants, exact rates, outage and the JSON document
"""

import math

import numpy as np
import pytest

from conftest import ASSETS, build_scenario, random_scenarios
from core.errors import InfeasibleAssignmentError, InfeasibleScenarioError, NoMacroUsersError
from core.hetnet import (LinkClass, NullingAssignment, Scenario, load_scenario,
                         outage_probability_mu, path_gain, path_loss_db, rate_macro_user,
                         rate_small_cell_user, save_scenario, sum_rate, sum_rate_batch,
                         user_rates)


# === PATH LOSS ===

def test_reference_distance():
    assert path_loss_db(1.0, LinkClass.MACRO) == pytest.approx(38.0)
    assert path_gain((0, 0), (1, 0), LinkClass.MACRO) == pytest.approx(10 ** -3.8)


def test_macro_path_loss_at_500m():
    assert path_loss_db(500.0, LinkClass.MACRO) == pytest.approx(132.47, abs=0.01)


def test_short_distances_clamp():
    assert path_loss_db(0.2, LinkClass.SMALL_INDOOR) == path_loss_db(1.0, LinkClass.SMALL_INDOOR)


def test_indoor_beats_outdoor():
    d = 40.0
    assert path_loss_db(d, LinkClass.SMALL_INDOOR) < path_loss_db(d, LinkClass.SMALL_OUTDOOR)


# === SCENARIO ===

def test_base_load_must_fit():
    with pytest.raises(InfeasibleScenarioError) as info:
        build_scenario([0, 1], [[1.0, 0.1], [0.1, 1.0]], paths=[[2, 1], [1, 2]], dof=[2, 4])
    assert info.value.bs == 0
    assert info.value.load == 2


def test_derived_arrays():
    s = build_scenario([0, 1, 1], np.full((3, 2), 0.1), paths=[[2, 1], [1, 3], [1, 2]],
                       dof=[4, 7])
    assert s.association.tolist() == [[1, 0], [0, 1], [0, 1]]
    assert s.serving_load.tolist() == [2, 5]
    assert s.spare_dof.tolist() == [1, 1]
    assert s.users_of(1).tolist() == [1, 2]
    assert s.macro_users.tolist() == [0]


def test_scenario_is_immutable():
    s = build_scenario([0], [[0.5]])
    with pytest.raises(ValueError):
        s.gains[0, 0] = 1.0


# === ASSIGNMENTS ===

def test_vector_order_is_column_stacked():
    n = NullingAssignment([[0, 1], [1, 0], [0, 0]])
    assert n.vector().tolist() == [0, 1, 0, 1, 0, 0]
    assert np.array_equal(NullingAssignment.from_vector(n.vector(), 3, 2).n, n.n)


def test_nulling_own_user_is_infeasible():
    s = build_scenario([0, 1], [[1.0, 0.1], [0.1, 1.0]])
    n = NullingAssignment([[0, 0], [0, 1]])
    assert [c for c, _ in n.violations(s)] == ["own_user"]
    with pytest.raises(InfeasibleAssignmentError) as info:
        sum_rate(s, n)
    assert info.value.constraint == "own_user"


def test_budget_overrun_is_infeasible():
    s = build_scenario([0, 1, 1], np.full((3, 2), 0.1), paths=[[1, 2], [2, 1], [2, 1]],
                       dof=[4, 4])
    n = NullingAssignment([[0, 0], [1, 0], [1, 0]])
    assert [c for c, _ in n.violations(s)] == ["dof_budget"]
    assert not n.is_feasible(s)
    assert NullingAssignment([[0, 0], [1, 0], [0, 0]]).is_feasible(s)


def test_assignment_entries_are_binary():
    with pytest.raises(ValueError):
        NullingAssignment([[0, 2]])


# === RATES ===

def test_isolated_small_cell_user():
    s = build_scenario([1], [[1e-3, 0.5]], user_power=[2.0], bs_power=[1.0, 2.0],
                       ratios=[100.0, 10.0])
    expected = 2.0 * math.log(1.0 + 10.0 * 2.0 * 0.5)
    assert rate_small_cell_user(s, NullingAssignment.zeros(s), 0, 1) == pytest.approx(expected)


def test_two_small_cells_by_hand():
    G = np.array([[0.01, 0.5, 0.1],
                  [0.01, 0.2, 0.25]])
    s = build_scenario([1, 2], G, user_power=[1.0, 1.0], bs_power=[1.0, 2.0, 4.0],
                       ratios=[100.0, 10.0, 10.0])
    n = NullingAssignment.zeros(s)
    user0 = math.log(1 + 10 * 1 * 0.5 / (1 + 1 * 0.2)) + math.log(1 + 10 * 2 * 0.5 / (1 + 4 * 0.1))
    user1 = math.log(1 + 10 * 1 * 0.25 / (1 + 1 * 0.1)) + math.log(1 + 10 * 4 * 0.25 / (1 + 2 * 0.2))
    assert rate_small_cell_user(s, n, 0, 1) == pytest.approx(user0)
    assert rate_small_cell_user(s, n, 1, 2) == pytest.approx(user1)
    assert sum_rate(s, n) == pytest.approx(user0 + user1)


def test_nulling_everything_restores_isolated_rate():
    G = np.array([[0.01, 0.5, 0.1],
                  [0.01, 0.2, 0.25]])
    s = build_scenario([1, 2], G, bs_power=[1.0, 2.0, 4.0], ratios=[100.0, 10.0, 10.0])
    n = NullingAssignment([[1, 0, 1], [1, 1, 0]])
    assert n.is_feasible(s)
    isolated = (math.log(1 + 10 * 0.5) + math.log(1 + 10 * 2 * 0.5)
                + math.log(1 + 10 * 0.25) + math.log(1 + 10 * 4 * 0.25))
    assert sum_rate(s, n) == pytest.approx(isolated)


def test_macro_user_without_small_cells():
    s = build_scenario([0], [[0.01]], user_power=[3.0], bs_power=[5.0], ratios=[100.0])
    expected = math.log(1 + 100 * 3 * 0.01) + math.log(1 + 100 * 5 * 0.01)
    assert rate_macro_user(s, NullingAssignment.zeros(s), 0) == pytest.approx(expected)


def test_macro_user_by_hand():
    # one MUE and two SUEs on SBS 1
    G = np.array([[0.02, 0.05],
                  [0.03, 0.4],
                  [0.01, 0.3]])
    s = build_scenario([0, 1, 1], G, user_power=[2.0, 1.0, 1.0], bs_power=[10.0, 3.0],
                       ratios=[100.0, 10.0], dof=[4, 4])
    up = math.log(1 + 100 * 2 * 0.02 / (1 + 1 * 0.03 + 1 * 0.01))
    down = math.log(1 + 100 * 10 * 0.02 / (1 + 3 * 0.05))
    assert rate_macro_user(s, NullingAssignment.zeros(s), 0) == pytest.approx(up + down)

    # the MBS nulls both SUEs: only noise remains on the MUE uplink
    n = NullingAssignment([[0, 0], [1, 0], [1, 0]])
    clean_up = math.log(1 + 100 * 2 * 0.02 / 1.0)
    assert rate_macro_user(s, n, 0) == pytest.approx(clean_up + down)


def test_wrong_serving_bs_is_rejected():
    s = build_scenario([0, 1], [[1.0, 0.1], [0.1, 1.0]])
    n = NullingAssignment.zeros(s)
    with pytest.raises(ValueError):
        rate_small_cell_user(s, n, 0, 1)
    with pytest.raises(ValueError):
        rate_macro_user(s, n, 1)


def test_empty_network():
    s = Scenario(build_scenario([0], [[0.5]]).bss, (), np.zeros((0, 1)), np.zeros((0, 1)))
    assert sum_rate(s, NullingAssignment.zeros(s)) == 0.0


def test_batch_matches_single():
    s = random_scenarios(1, seed=3)[0]
    rng = np.random.default_rng(0)
    batch = rng.integers(0, 2, size=(5, s.K, s.J + 1))
    rates = sum_rate_batch(s, batch)
    for n, rate in zip(batch, rates):
        assert rate == pytest.approx(sum_rate(s, n, check=False))


def test_single_flips_never_reduce_sum_rate():
    for s in random_scenarios(200, seed=21):
        base = NullingAssignment.zeros(s).n.astype(int)
        # start from a random feasible point: greedy fill in a random order
        rng = np.random.default_rng(s.K)
        for k, j in rng.permutation([(k, j) for k in range(s.K) for j in range(s.J + 1)]):
            trial = base.copy()
            trial[k, j] = 1
            if NullingAssignment(trial).is_feasible(s) and rng.random() < 0.5:
                base = trial
        before = float(user_rates(s, base).sum())
        for k in range(s.K):
            for j in range(s.J + 1):
                if base[k, j]:
                    continue
                flipped = base.copy()
                flipped[k, j] = 1
                if NullingAssignment(flipped).is_feasible(s):
                    assert float(user_rates(s, flipped).sum()) >= before - 1e-12


# === OUTAGE ===

def _two_macro_users():
    # SINR of user 0 is 10 / (1 + 1) = 7 dB, user 1 is 1 / (1 + 3) = -6 dB
    G = np.array([[1.0, 0.5],
                  [0.1, 1.5]])
    return build_scenario([0, 0], G, bs_power=[10.0, 2.0], ratios=[100.0, 10.0], dof=[3, 3])


def test_crafted_outage():
    s = _two_macro_users()
    n = NullingAssignment.zeros(s)
    assert outage_probability_mu(s, n, 0.0) == 0.5


def test_outage_threshold_limits():
    s = _two_macro_users()
    n = NullingAssignment.zeros(s)
    assert outage_probability_mu(s, n, -math.inf) == 0.0
    assert outage_probability_mu(s, n, math.inf) == 1.0


def test_outage_without_small_cells():
    s = build_scenario([0, 0], [[0.1], [0.2]], bs_power=[10.0])
    assert outage_probability_mu(s, NullingAssignment.zeros(s), 0.0) == 0.0


def test_nulling_lowers_outage():
    s = _two_macro_users()
    n = NullingAssignment([[0, 0], [0, 1]])
    assert outage_probability_mu(s, n, 0.0) == 0.0


def test_outage_needs_macro_users():
    s = build_scenario([1], [[0.1, 0.5]])
    with pytest.raises(NoMacroUsersError):
        outage_probability_mu(s, NullingAssignment.zeros(s), 0.0)


# === DOCUMENT ===

def test_document_roundtrip(tmp_path):
    s = random_scenarios(1, seed=5)[0]
    path = tmp_path / 'scenario.json'
    save_scenario(s, path)
    loaded = load_scenario(path)
    assert np.allclose(loaded.gains, s.gains, rtol=1e-12)
    assert np.array_equal(loaded.paths, s.paths)
    assert np.array_equal(loaded.association, s.association)
    assert loaded.dof.tolist() == s.dof.tolist()
    assert loaded.bss[1].array == s.bss[1].array


def test_demo_scenario_loads():
    s = load_scenario(ASSETS / 'demo_scenario.json')
    assert (s.K, s.J) == (5, 2)
    assert s.spare_dof.tolist() == [16, 8, 8]
    assert s.serving.tolist() == [1, 1, 2, 0, 0]
