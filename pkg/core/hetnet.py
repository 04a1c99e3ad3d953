"""
Two-tier HetNet model
Placements, powers, path loss, association, multipath counts and exact rates
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .coarray import ArrayGeometry, GeometryDocument, difference_coarray
from .config import PathLossConfig
from .errors import InfeasibleAssignmentError, InfeasibleScenarioError, NoMacroUsersError

logger = logging.getLogger(__name__)

MIN_DISTANCE_M = 1.0


class LinkClass(Enum):
    """Path loss families"""
    MACRO = "macro"
    SMALL_OUTDOOR = "small_outdoor"
    SMALL_INDOOR = "small_indoor"


def path_loss_db(distance: float, link_class: LinkClass,
                 models: PathLossConfig = PathLossConfig()) -> float:
    """Log-distance path loss in dB; distances below 1 m are clamped to 1 m"""
    model = getattr(models, link_class.value)
    d = max(float(distance), MIN_DISTANCE_M)
    return model.intercept_db + 10.0 * model.exponent * math.log10(d)


def path_gain(tx_pos: Sequence[float], rx_pos: Sequence[float], link_class: LinkClass,
              models: PathLossConfig = PathLossConfig()) -> float:
    """
    Large-scale linear power gain between two points

    Args:
        tx_pos: (x, y) in meters
        rx_pos: (x, y) in meters
        link_class: which log-distance family applies
        models: path loss constants

    Returns:
        10^(-PL/10)
    """
    distance = math.hypot(tx_pos[0] - rx_pos[0], tx_pos[1] - rx_pos[1])
    return 10.0 ** (-path_loss_db(distance, link_class, models) / 10.0)


def dbm_to_noise_units(dbm, noise_dbm: float):
    """Linear power relative to the reference noise level"""
    return 10.0 ** ((np.asarray(dbm, dtype=float) - noise_dbm) / 10.0)


@dataclass(frozen=True)
class BaseStation:
    """
    One BS; index 0 is the MBS

    ratio is the array-gain factor (M_j - S_j + 1) / S_j, the only way M and S
    enter the rate model.
    """
    id: int
    position: Tuple[float, float]
    tx_power_dbm: float
    ratio: float
    dof_budget: int
    array: Optional[ArrayGeometry] = None

    @property
    def is_macro(self) -> bool:
        return self.id == 0


@dataclass(frozen=True)
class User:
    id: int
    position: Tuple[float, float]
    tx_power_dbm: float
    serving_bs: int


@dataclass(frozen=True)
class Scenario:
    """
    Immutable network snapshot

    Matrices are K x (J+1): gains g (linear), paths q, association x derived
    from each user's serving BS. Powers are expressed relative to noise_dbm,
    so noise_floor is the additive term of every SINR denominator.
    """
    bss: Tuple[BaseStation, ...]
    users: Tuple[User, ...]
    gains: np.ndarray
    paths: np.ndarray
    noise_floor: float = 1.0
    noise_dbm: float = -99.0

    def __post_init__(self):
        object.__setattr__(self, 'bss', tuple(self.bss))
        object.__setattr__(self, 'users', tuple(self.users))
        gains = np.array(self.gains, dtype=float).reshape(self.K, self.J + 1)
        paths = np.array(self.paths, dtype=np.int64).reshape(self.K, self.J + 1)
        gains.setflags(write=False)
        paths.setflags(write=False)
        object.__setattr__(self, 'gains', gains)
        object.__setattr__(self, 'paths', paths)
        self._validate()

    def _validate(self):
        if not self.bss or not self.bss[0].is_macro:
            raise ValueError("scenario needs the MBS as BS 0")
        if [b.id for b in self.bss] != list(range(len(self.bss))):
            raise ValueError("BS ids must be 0..J in order")
        if [u.id for u in self.users] != list(range(len(self.users))):
            raise ValueError("user ids must be 0..K-1 in order")
        if self.noise_floor <= 0:
            raise ValueError("noise floor must be positive")
        if np.any(self.gains <= 0):
            raise ValueError("gains must be positive")
        if np.any(self.paths < 1):
            raise ValueError("multipath counts must be >= 1")
        for u in self.users:
            if not 0 <= u.serving_bs <= self.J:
                raise ValueError(f"user {u.id} served by unknown BS {u.serving_bs}")
        for b in self.bss:
            if b.dof_budget < 1:
                raise ValueError(f"BS {b.id} needs a DoF budget >= 1")
            if b.array is not None and not b.is_macro:
                lags = difference_coarray(b.array).size
                if b.dof_budget > lags:
                    raise ValueError(
                        f"BS {b.id}: DoF budget {b.dof_budget} exceeds its {lags} co-array lags")
        load = self.serving_load
        for j in range(self.J + 1):
            if load[j] + 1 > self.dof[j]:
                raise InfeasibleScenarioError(j, int(load[j]), int(self.dof[j]))

    # === SHAPES ===

    @property
    def K(self) -> int:
        return len(self.users)

    @property
    def J(self) -> int:
        """Number of SBSs"""
        return len(self.bss) - 1

    # === DERIVED ARRAYS ===

    @cached_property
    def association(self) -> np.ndarray:
        """x_{k,j}"""
        x = np.zeros((self.K, self.J + 1), dtype=np.int64)
        for u in self.users:
            x[u.id, u.serving_bs] = 1
        x.setflags(write=False)
        return x

    @cached_property
    def serving(self) -> np.ndarray:
        return np.array([u.serving_bs for u in self.users], dtype=np.int64)

    @cached_property
    def dof(self) -> np.ndarray:
        return np.array([b.dof_budget for b in self.bss], dtype=np.int64)

    @cached_property
    def ratios(self) -> np.ndarray:
        return np.array([b.ratio for b in self.bss], dtype=float)

    @cached_property
    def user_power(self) -> np.ndarray:
        """p_k in noise units"""
        return dbm_to_noise_units([u.tx_power_dbm for u in self.users], self.noise_dbm)

    @cached_property
    def bs_power(self) -> np.ndarray:
        """p_j in noise units"""
        return dbm_to_noise_units([b.tx_power_dbm for b in self.bss], self.noise_dbm)

    @cached_property
    def serving_load(self) -> np.ndarray:
        """sum_k x_{k,j} q_{k,j}"""
        return (self.association * self.paths).sum(axis=0)

    @cached_property
    def spare_dof(self) -> np.ndarray:
        """E_j = D_j - sum_k x_{k,j} q_{k,j} - 1"""
        return self.dof - self.serving_load - 1

    @property
    def macro_users(self) -> np.ndarray:
        return np.flatnonzero(self.serving == 0)

    def users_of(self, j: int) -> np.ndarray:
        """U_j"""
        return np.flatnonzero(self.serving == j)

    def distance(self, k: int, j: int) -> float:
        u, b = self.users[k].position, self.bss[j].position
        return math.hypot(u[0] - b[0], u[1] - b[1])

    def to_document(self) -> "ScenarioDocument":
        return ScenarioDocument.from_scenario(self)


@dataclass(frozen=True)
class NullingAssignment:
    """Binary n_{k,j}: BS j nulls user k"""
    n: np.ndarray

    def __post_init__(self):
        n = np.array(self.n, dtype=np.int8)
        if n.ndim != 2:
            raise ValueError("assignment must be a K x (J+1) matrix")
        if np.any((n != 0) & (n != 1)):
            raise ValueError("assignment entries must be 0 or 1")
        n.setflags(write=False)
        object.__setattr__(self, 'n', n)

    @classmethod
    def zeros(cls, scenario: Scenario) -> "NullingAssignment":
        return cls(np.zeros((scenario.K, scenario.J + 1), dtype=np.int8))

    @classmethod
    def from_vector(cls, vector: Sequence[float], K: int, J1: int) -> "NullingAssignment":
        """Inverse of vector(): k fastest, j outer"""
        v = np.rint(np.asarray(vector, dtype=float)).astype(np.int8)
        return cls(v.reshape(K, J1, order='F'))

    def vector(self) -> np.ndarray:
        """Column-stacked n (k fastest, j outer)"""
        return self.n.reshape(-1, order='F').astype(float)

    def violations(self, scenario: Scenario) -> List[Tuple[str, str]]:
        """Independent check of the P1 constraints; empty when feasible"""
        found = []
        if self.n.shape != (scenario.K, scenario.J + 1):
            return [("shape", f"expected {(scenario.K, scenario.J + 1)}, got {self.n.shape}")]
        served = (self.n == 1) & (scenario.association == 1)
        for k, j in zip(*np.nonzero(served)):
            found.append(("own_user", f"BS {j} nulls its own user {k}"))
        load = scenario.serving_load + (self.n * scenario.paths).sum(axis=0) + 1
        for j in np.flatnonzero(load > scenario.dof):
            found.append(("dof_budget", f"BS {j} uses {load[j]} of {scenario.dof[j]} DoF"))
        return found

    def check(self, scenario: Scenario) -> None:
        found = self.violations(scenario)
        if found:
            constraint, detail = found[0]
            raise InfeasibleAssignmentError(constraint, detail)

    def is_feasible(self, scenario: Scenario) -> bool:
        return not self.violations(scenario)


# === RATES ===

def _interference_terms(scenario: Scenario, n: np.ndarray):
    """
    Signal and interference per user for a batch of assignments

    Args:
        scenario: network
        n: assignments, shape (..., K, J+1)

    Returns:
        (up_signal, up_interference, down_signal, down_interference), each (..., K)
    """
    K = scenario.K
    keep = 1.0 - n
    pu, pb, G = scenario.user_power, scenario.bs_power, scenario.gains
    s = scenario.serving
    ks = np.arange(K)
    ratio = scenario.ratios[s]

    g_serving = G[ks, s]
    up_signal = np.broadcast_to(ratio * pu * g_serving, n.shape[:-1])
    down_signal = np.broadcast_to(ratio * pb[s] * g_serving, n.shape[:-1])

    # received uplink power at each BS after nulling, summed over users
    rx = pu[:, None] * G * keep                          # (..., K, J+1)
    total_at_bs = rx.sum(axis=-2)                        # (..., J+1)
    sue = (s != 0).astype(float)
    mbs_uplink = (rx[..., :, 0] * sue).sum(axis=-1)      # only SUEs interfere at the MBS

    # downlink power from every SBS at each user after nulling
    dl = pb[None, :] * G * keep
    dl_sbs_total = dl[..., :, 1:].sum(axis=-1)           # (..., K)

    own_up = pu * g_serving
    own_dl = pb[s] * g_serving
    macro = s == 0
    up_interference = np.where(
        macro,
        mbs_uplink[..., None],
        np.maximum(np.take(total_at_bs, s, axis=-1) - own_up, 0.0),
    )
    down_interference = np.where(
        macro,
        dl_sbs_total,
        np.maximum(dl_sbs_total - own_dl, 0.0),
    )
    return up_signal, up_interference, down_signal, down_interference


def user_rates(scenario: Scenario, n: np.ndarray) -> np.ndarray:
    """
    Exact per-user rate (uplink + downlink), nats/s/Hz

    Args:
        scenario: network
        n: assignment matrix or a batch of them, shape (..., K, J+1)

    Returns:
        rates of shape (..., K), each user at its serving BS
    """
    n = np.asarray(n, dtype=float)
    if scenario.K == 0:
        return np.zeros(n.shape[:-1])
    eps = scenario.noise_floor
    up_s, up_i, dn_s, dn_i = _interference_terms(scenario, n)
    return np.log1p(up_s / (eps + up_i)) + np.log1p(dn_s / (eps + dn_i))


def _as_matrix(n) -> np.ndarray:
    return n.n if isinstance(n, NullingAssignment) else np.asarray(n)


def rate_small_cell_user(scenario: Scenario, n: NullingAssignment, k: int, j: int) -> float:
    """R_{k,j} for a small-cell user, nats/s/Hz"""
    if j < 1 or scenario.serving[k] != j:
        raise ValueError(f"user {k} is not served by SBS {j}")
    return float(user_rates(scenario, _as_matrix(n))[k])


def rate_macro_user(scenario: Scenario, n: NullingAssignment, k: int) -> float:
    """R_{k,0} for a macro user, nats/s/Hz"""
    if scenario.serving[k] != 0:
        raise ValueError(f"user {k} is not served by the MBS")
    return float(user_rates(scenario, _as_matrix(n))[k])


def sum_rate(scenario: Scenario, n: NullingAssignment, check: bool = True) -> float:
    """
    P1 objective: sum of every user's rate at its serving BS, nats/s/Hz

    Raises:
        InfeasibleAssignmentError: n breaks a budget or nulls a served user (when check)
    """
    if check and isinstance(n, NullingAssignment):
        n.check(scenario)
    return float(user_rates(scenario, _as_matrix(n)).sum())


def sum_rate_batch(scenario: Scenario, batch: np.ndarray) -> np.ndarray:
    """Sum rates for a stack of assignments (B, K, J+1), unchecked"""
    return user_rates(scenario, batch).sum(axis=-1)


def macro_downlink_sinr_db(scenario: Scenario, n: NullingAssignment,
                           array_gain: bool = False) -> np.ndarray:
    """Downlink SINR of each macro user, dB"""
    mus = scenario.macro_users
    _, _, dn_s, dn_i = _interference_terms(scenario, _as_matrix(n).astype(float))
    signal = dn_s[mus]
    if not array_gain:
        signal = signal / scenario.ratios[0]
    return 10.0 * np.log10(signal / (scenario.noise_floor + dn_i[mus]))


def outage_probability_mu(scenario: Scenario, n: NullingAssignment, gamma_out_db: float,
                          array_gain: bool = False) -> float:
    """
    Fraction of macro users whose downlink SINR is below gamma_out

    Raises:
        NoMacroUsersError: scenario has no macro user
    """
    if len(scenario.macro_users) == 0:
        raise NoMacroUsersError("outage needs at least one macro user")
    sinr = macro_downlink_sinr_db(scenario, n, array_gain)
    return float(np.mean(sinr < gamma_out_db))


# === JSON DOCUMENT ===

class BaseStationDocument(BaseModel):
    model_config = ConfigDict(extra='forbid')

    position: Tuple[float, float]
    tx_power_dbm: float
    ratio: float = Field(gt=0)
    dof_budget: int = Field(ge=1)
    array: Optional[GeometryDocument] = None


class UserDocument(BaseModel):
    model_config = ConfigDict(extra='forbid')

    position: Tuple[float, float]
    tx_power_dbm: float
    serving_bs: int = Field(ge=0)


class ScenarioDocument(BaseModel):
    """
    JSON form of a Scenario

    gains_db is K x (J+1) in dB (10 log10 g); paths is the q matrix. The
    association matrix is carried for readers but each user's serving_bs is
    authoritative.
    """
    model_config = ConfigDict(extra='forbid')

    noise_floor: float = Field(1.0, gt=0)
    noise_dbm: float = -99.0
    base_stations: List[BaseStationDocument]
    users: List[UserDocument]
    gains_db: List[List[float]]
    paths: List[List[int]]
    association: Optional[List[List[int]]] = None

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "ScenarioDocument":
        return cls(
            noise_floor=scenario.noise_floor,
            noise_dbm=scenario.noise_dbm,
            base_stations=[
                BaseStationDocument(
                    position=b.position, tx_power_dbm=b.tx_power_dbm, ratio=b.ratio,
                    dof_budget=b.dof_budget,
                    array=b.array.to_document() if b.array is not None else None,
                )
                for b in scenario.bss
            ],
            users=[
                UserDocument(position=u.position, tx_power_dbm=u.tx_power_dbm,
                             serving_bs=u.serving_bs)
                for u in scenario.users
            ],
            gains_db=(10.0 * np.log10(scenario.gains)).tolist(),
            paths=scenario.paths.tolist(),
            association=scenario.association.tolist(),
        )

    def to_scenario(self) -> Scenario:
        bss = [
            BaseStation(j, tuple(b.position), b.tx_power_dbm, b.ratio, b.dof_budget,
                        b.array.to_geometry() if b.array is not None else None)
            for j, b in enumerate(self.base_stations)
        ]
        users = [User(k, tuple(u.position), u.tx_power_dbm, u.serving_bs)
                 for k, u in enumerate(self.users)]
        J1 = len(bss)
        gains = 10.0 ** (np.asarray(self.gains_db, dtype=float).reshape(len(users), J1) / 10.0)
        return Scenario(bss, users, gains, np.asarray(self.paths).reshape(len(users), J1),
                        self.noise_floor, self.noise_dbm)


def load_scenario(path) -> Scenario:
    with open(path, 'r') as f:
        return ScenarioDocument.model_validate_json(f.read()).to_scenario()


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, 'w') as f:
        f.write(scenario.to_document().model_dump_json(indent=2))
