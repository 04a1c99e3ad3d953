"""
Monte Carlo harness
Scenario generation, the trial runner, aggregation and CSV output
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .beamforming import NULL_DEPTH_TOL, max_null_depth, realize_bs_nulling
from .coarray import nested_positions
from .config import ExperimentConfig, Method
from .errors import (GenerationError, InfeasibleScenarioError, NoMacroUsersError,
                     NullPlanError)
from .hetnet import (BaseStation, LinkClass, NullingAssignment, Scenario, User,
                     outage_probability_mu, path_gain)
from .optimizer import InterferenceProduct, solve

logger = logging.getLogger(__name__)

MAX_PLACEMENT_ATTEMPTS = 10_000
MAX_GENERATION_ATTEMPTS = 100
TRIALS_COLUMNS = [
    'trial_id', 'n_sbs', 'n_users', 'method', 'sum_rate_bps_hz', 'sum_rate_bps',
    'mu_outage_prob', 'cuts_added', 'solve_time_ms', 'seed', 'surrogate_value', 'error',
]
SUMMARY_COLUMNS = ['sweep_value', 'method', 'metric', 'mean', 'stderr', 'n']
SUMMARY_METRICS = ['sum_rate_bps_hz', 'sum_rate_bps', 'mu_outage_prob', 'surrogate_value']
FLOAT_FORMAT = '%.9g'


@dataclass
class TrialReport:
    """One row of trials.csv: one method on one trial"""
    trial_id: int
    n_sbs: int
    n_users: int
    method: str
    sum_rate_bps_hz: float
    sum_rate_bps: float
    mu_outage_prob: float
    cuts_added: int
    solve_time_ms: float
    seed: int
    surrogate_value: float = float('nan')
    error: str = ''


# === SCENARIO GENERATION ===

def _uniform_disk(rng: np.random.Generator, radius: float, count: int,
                  center: Tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    r = radius * np.sqrt(rng.random(count))
    phi = rng.uniform(0.0, 2.0 * np.pi, count)
    return np.column_stack([center[0] + r * np.cos(phi), center[1] + r * np.sin(phi)])


def place_small_cells(config: ExperimentConfig, rng: np.random.Generator,
                      n_sbs: int) -> np.ndarray:
    """
    SBS centres uniform in the macro disk, pairwise at least the configured
    separation apart

    Raises:
        GenerationError: the attempt cap ran out
    """
    placed: List[np.ndarray] = []
    separation = config.sbs_separation
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        if len(placed) == n_sbs:
            break
        candidate = _uniform_disk(rng, config.macro_radius, 1)[0]
        if all(np.hypot(*(candidate - p)) >= separation for p in placed):
            placed.append(candidate)
    if len(placed) < n_sbs:
        raise GenerationError(
            f"placed {len(placed)} of {n_sbs} SBSs {separation} m apart "
            f"in {MAX_PLACEMENT_ATTEMPTS} attempts")
    return np.array(placed).reshape(n_sbs, 2)


def place_users(config: ExperimentConfig, rng: np.random.Generator, n_users: int,
                sbs_positions: np.ndarray) -> np.ndarray:
    """Users uniform in the macro disk; a hotspot share lands inside small cells"""
    hot = int(round(config.hotspot_fraction * n_users)) if len(sbs_positions) else 0
    users = _uniform_disk(rng, config.macro_radius, n_users - hot)
    if hot:
        cells = rng.integers(0, len(sbs_positions), hot)
        offsets = _uniform_disk(rng, config.small_radius, hot)
        users = np.vstack([users, sbs_positions[cells] + offsets])
    return users


def associate(config: ExperimentConfig, users: np.ndarray, sbs_positions: np.ndarray) -> np.ndarray:
    """Nearest SBS covering the user (within small_radius), otherwise the MBS"""
    serving = np.zeros(len(users), dtype=np.int64)
    if len(sbs_positions) == 0 or len(users) == 0:
        return serving
    dist = np.linalg.norm(users[:, None, :] - sbs_positions[None, :, :], axis=2)
    nearest = np.argmin(dist, axis=1)
    covered = dist[np.arange(len(users)), nearest] <= config.small_radius
    serving[covered] = nearest[covered] + 1
    return serving


def macro_user_powers(config: ExperimentConfig, distances: Sequence[float]) -> np.ndarray:
    """
    Power level of every macro user by distance quantile to the MBS

    The users are ranked by distance and split into len(mue_levels) groups
    of near-equal size, nearest group first. Ties keep draw order.
    """
    levels = np.asarray(config.powers.mue_levels, dtype=float)
    distances = np.asarray(distances, dtype=float)
    if len(distances) == 0:
        return np.empty(0)
    rank = np.empty(len(distances), dtype=np.int64)
    rank[np.argsort(distances, kind='stable')] = np.arange(len(distances))
    return levels[rank * len(levels) // len(distances)]


def _link_class(serving: int, j: int) -> LinkClass:
    if j == 0:
        return LinkClass.MACRO
    return LinkClass.SMALL_INDOOR if serving == j else LinkClass.SMALL_OUTDOOR


def _draw_scenario(config: ExperimentConfig, rng: np.random.Generator,
                   n_sbs: int, n_users: int) -> Scenario:
    sbs = place_small_cells(config, rng, n_sbs)
    users = place_users(config, rng, n_users, sbs)
    serving = associate(config, users, sbs)
    positions = np.vstack([np.zeros((1, 2)), sbs])

    if config.fixed_paths is not None:
        paths = np.full((n_users, n_sbs + 1), config.fixed_paths, dtype=np.int64)
    else:
        paths = rng.integers(1, config.q_max + 1, size=(n_users, n_sbs + 1))

    gains = np.empty((n_users, n_sbs + 1))
    for k in range(n_users):
        for j in range(n_sbs + 1):
            gains[k, j] = path_gain(positions[j], users[k], _link_class(serving[k], j),
                                    config.path_loss)

    array = nested_positions(*config.sbs_array)
    bss = [BaseStation(0, (0.0, 0.0), config.powers.mbs, config.ratio_mbs, config.dof_mbs)]
    bss += [BaseStation(j + 1, tuple(float(v) for v in sbs[j]), config.powers.sbs,
                        config.ratio_sbs, config.dof_sbs, array)
            for j in range(n_sbs)]
    powers = np.full(n_users, config.powers.sue)
    macro = serving == 0
    powers[macro] = macro_user_powers(config, np.hypot(users[macro, 0], users[macro, 1]))
    people = []
    for k in range(n_users):
        pos = tuple(float(v) for v in users[k])
        power = float(powers[k])
        people.append(User(k, pos, power, int(serving[k])))

    return Scenario(bss, people, gains, paths, config.epsilon_n, config.noise_dbm)


def generate_scenario(config: ExperimentConfig, rng: np.random.Generator,
                      n_sbs: Optional[int] = None, n_users: Optional[int] = None) -> Scenario:
    """
    Random two-tier network

    Redraws until every BS can carry its serving load.

    Args:
        config: experiment settings
        rng: random stream for this trial
        n_sbs: SBS count (defaults to the first sweep value)
        n_users: user count (defaults to the first sweep value)

    Raises:
        GenerationError: attempt cap exceeded
    """
    n_sbs = config.n_sbs_values[0] if n_sbs is None else n_sbs
    n_users = config.n_users_values[0] if n_users is None else n_users
    last = None
    for attempt in range(MAX_GENERATION_ATTEMPTS):
        try:
            return _draw_scenario(config, rng, n_sbs, n_users)
        except InfeasibleScenarioError as e:
            last = e
            logger.debug("generation attempt %d rejected: %s", attempt + 1, e)
    raise GenerationError(
        f"no feasible scenario in {MAX_GENERATION_ATTEMPTS} attempts; last violation: {last}")


# === NULL REALISATION ===

def path_directions(scenario: Scenario, rng: np.random.Generator,
                    spread_deg: float) -> Dict[Tuple[int, int], np.ndarray]:
    """
    Arrival angles of every user's paths at every SBS

    Arrays lie along the x axis, so the line-of-sight angle from broadside
    is asin(dx / d); the other paths are offset uniformly within the spread.
    """
    limit = np.deg2rad(89.0)
    spread = np.deg2rad(spread_deg)
    out = {}
    for j in range(1, scenario.J + 1):
        bx, by = scenario.bss[j].position
        for k, user in enumerate(scenario.users):
            d = max(scenario.distance(k, j), 1e-9)
            los = np.arcsin(np.clip((user.position[0] - bx) / d, -1.0, 1.0))
            extra = rng.uniform(-spread, spread, int(scenario.paths[k, j]) - 1)
            out[(k, j)] = np.clip(np.concatenate([[los], los + extra]), -limit, limit)
    return out


def verify_nulls(scenario: Scenario, assignment: NullingAssignment,
                 directions: Dict[Tuple[int, int], np.ndarray]) -> int:
    """
    Solve the co-array weights of every SBS for its nulling decision

    Returns:
        number of SBSs whose nulls are not certified
    """
    failures = 0
    for j in range(1, scenario.J + 1):
        bs = scenario.bss[j]
        served = scenario.users_of(j)
        if bs.array is None or len(served) == 0:
            continue
        desired = np.concatenate([directions[(k, j)] for k in served])
        nulled_users = np.flatnonzero(assignment.n[:, j] == 1)
        nulled = (np.concatenate([directions[(k, j)] for k in nulled_users])
                  if len(nulled_users) else np.zeros(0))
        try:
            weights = realize_bs_nulling(desired, nulled, bs.array, bs.dof_budget)
            depth = max_null_depth(weights, nulled)
        except (NullPlanError, ValueError) as e:
            logger.warning("SBS %d: nulls not realisable: %s", j, e)
            failures += 1
            continue
        if depth > NULL_DEPTH_TOL:
            logger.warning("SBS %d: null depth %.3e above %.1e", j, depth, NULL_DEPTH_TOL)
            failures += 1
    return failures


# === RUNNER ===

def trial_rng(seed: int, trial_id: int) -> np.random.Generator:
    """Independent stream per (seed, trial_id)"""
    return np.random.default_rng(np.random.SeedSequence([seed, trial_id]))


def _failed_row(base: dict, method: Method, error: Exception) -> TrialReport:
    nan = float('nan')
    return TrialReport(**base, method=method.value, sum_rate_bps_hz=nan, sum_rate_bps=nan,
                       mu_outage_prob=nan, cuts_added=0, solve_time_ms=nan,
                       error=f"{type(error).__name__}: {error}")


def run_trial(config: ExperimentConfig, trial_id: int, n_sbs: int,
              n_users: int) -> List[TrialReport]:
    """Every configured method on one generated scenario"""
    rng = trial_rng(config.seed, trial_id)
    scenario = generate_scenario(config, rng, n_sbs, n_users)
    base = dict(trial_id=trial_id, n_sbs=n_sbs, n_users=n_users, seed=config.seed)
    product = InterferenceProduct.from_scenario(scenario)
    directions = (path_directions(scenario, rng, config.path_spread_deg)
                  if config.verify_nulls else None)

    rows = []
    for method in config.methods:
        try:
            report = solve(scenario, method, config.max_order, config.limits, product)
        except NullPlanError as e:
            logger.warning("trial %d, %s failed: %s", trial_id, method.value, e)
            rows.append(_failed_row(base, method, e))
            continue

        try:
            outage = outage_probability_mu(scenario, report.assignment, config.gamma_out,
                                           config.outage_array_gain)
        except NoMacroUsersError:
            outage = float('nan')
        if config.verify_nulls:
            verify_nulls(scenario, report.assignment, directions)

        rate = report.objective_exact_rate
        rows.append(TrialReport(
            **base, method=method.value,
            sum_rate_bps_hz=rate,
            sum_rate_bps=rate * config.bandwidth,
            mu_outage_prob=outage,
            cuts_added=report.cuts_added,
            solve_time_ms=report.solve_time_ms if config.record_timing else float('nan'),
            surrogate_value=report.surrogate_value,
        ))
    return rows


def _trial_plan(config: ExperimentConfig) -> List[Tuple[int, int, int]]:
    plan = []
    for p, (_, n_sbs, n_users) in enumerate(config.sweep_points()):
        for t in range(config.trials):
            plan.append((p * config.trials + t, n_sbs, n_users))
    return plan


def _run_planned(args) -> List[TrialReport]:
    config, trial_id, n_sbs, n_users = args
    return run_trial(config, trial_id, n_sbs, n_users)


def run_experiment(config: ExperimentConfig) -> List[TrialReport]:
    """
    All sweep points, all trials, all methods

    Trial ids run across the whole sweep; rows come back in trial order
    whatever the worker count.

    Raises:
        GenerationError: a trial's scenario could not be generated
    """
    plan = _trial_plan(config)
    for value, n_sbs, n_users in config.sweep_points():
        logger.info("sweep %s=%d: %d trials (n_sbs=%d, n_users=%d)",
                    config.sweep_param, value, config.trials, n_sbs, n_users)

    jobs = [(config, trial_id, n_sbs, n_users) for trial_id, n_sbs, n_users in plan]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_planned, jobs))
    else:
        results = [_run_planned(job) for job in jobs]
    return [row for rows in results for row in rows]


# === AGGREGATION ===

def reports_frame(reports: Iterable[TrialReport]) -> pd.DataFrame:
    frame = pd.DataFrame([asdict(r) for r in reports], columns=TRIALS_COLUMNS)
    return frame


def aggregate(reports: Union[Sequence[TrialReport], pd.DataFrame],
              sweep_param: str = 'n_sbs') -> pd.DataFrame:
    """
    Mean, standard error and count per (sweep value, method, metric)

    Failed rows and missing values are skipped; stderr is std(ddof=1)/sqrt(n),
    0 for a single value.
    """
    frame = reports if isinstance(reports, pd.DataFrame) else reports_frame(reports)
    if frame.empty:
        raise ValueError("aggregate needs at least one report")
    frame = frame[frame['error'].fillna('') == '']
    long = frame.melt(id_vars=[sweep_param, 'method'], value_vars=SUMMARY_METRICS,
                      var_name='metric', value_name='value').dropna(subset=['value'])
    long = long.rename(columns={sweep_param: 'sweep_value'})

    grouped = long.groupby(['sweep_value', 'method', 'metric'], sort=False)['value']
    summary = grouped.agg(mean='mean', std='std', n='count').reset_index()
    summary['stderr'] = np.where(summary['n'] > 1,
                                 summary['std'].fillna(0.0) / np.sqrt(summary['n']), 0.0)
    # keep methods in run order within each sweep value
    summary = summary.sort_values(['sweep_value'], kind='stable')
    return summary[SUMMARY_COLUMNS].reset_index(drop=True)


def write_trials_csv(reports: Sequence[TrialReport], path: Union[str, Path]) -> None:
    reports_frame(reports).to_csv(path, index=False, float_format=FLOAT_FORMAT)


def write_summary_csv(summary: pd.DataFrame, path: Union[str, Path]) -> None:
    summary.to_csv(path, index=False, float_format=FLOAT_FORMAT)


def all_failed(reports: Sequence[TrialReport]) -> bool:
    return bool(reports) and all(r.error for r in reports)
