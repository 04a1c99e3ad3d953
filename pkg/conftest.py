"""
Shared test helpers for NullPlan
Hand-built scenarios (powers given in noise units) and small random networks
"""

import math
from pathlib import Path

import numpy as np
import pytest

from core.config import ExperimentConfig
from core.harness import generate_scenario, trial_rng
from core.hetnet import BaseStation, Scenario, User

ASSETS = Path(__file__).parent / "assets"


def build_scenario(serving, gains, paths=None, dof=None, user_power=None, bs_power=None,
                   ratios=None, noise_floor=1.0) -> Scenario:
    """
    Scenario from linear quantities

    noise_dbm is 0, so a power p is written as 10*log10(p) dBm and comes back
    as p in noise units.
    """
    gains = np.asarray(gains, dtype=float)
    K, J1 = gains.shape
    paths = np.ones((K, J1), dtype=int) if paths is None else np.asarray(paths)
    dof = [K * 3 + 1] * J1 if dof is None else dof
    user_power = [1.0] * K if user_power is None else user_power
    bs_power = [1.0] * J1 if bs_power is None else bs_power
    ratios = [1.0] * J1 if ratios is None else ratios

    bss = [BaseStation(j, (100.0 * j, 0.0), 10.0 * math.log10(bs_power[j]), ratios[j], dof[j])
           for j in range(J1)]
    users = [User(k, (100.0 * serving[k] + 5.0, 0.0), 10.0 * math.log10(user_power[k]),
                  serving[k])
             for k in range(K)]
    return Scenario(bss, users, gains, paths, noise_floor, 0.0)


def small_config(**overrides) -> ExperimentConfig:
    """Desk-sized network: 4 users, 2 SBSs, 12 nulling variables"""
    settings = dict(
        macro_radius=150.0, small_radius=60.0, min_sbs_separation=60.0,
        n_sbs=2, n_users=4, dof_mbs=9, dof_sbs=5, q_max=2,
        hotspot_fraction=0.5, trials=2, seed=7, workers=1,
    )
    settings.update(overrides)
    return ExperimentConfig(**settings)


def random_scenarios(count: int, seed: int = 0, **overrides):
    config = small_config(**overrides)
    return [generate_scenario(config, trial_rng(seed, t)) for t in range(count)]


@pytest.fixture
def scenarios():
    return random_scenarios(12)
