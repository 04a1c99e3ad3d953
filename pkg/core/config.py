"""
Configuration models
Experiment settings, solver limits and process-level knobs
"""

import json
import logging
import os
from enum import Enum
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError


# Process-level knobs, read once per process
LOG_LEVEL = os.getenv('NULLPLAN_LOG_LEVEL', 'INFO').upper()
DEFAULT_WORKERS = int(os.getenv('NULLPLAN_WORKERS', '1'))


class Method(str, Enum):
    """Nulling assignment methods"""
    CUTTING_PLANE = "cutting_plane"
    LP_UNIMODULAR = "lp_unimodular"
    HEURISTIC = "heuristic"
    BRUTE_FORCE = "brute_force"
    UPPER_BOUND_P4 = "upper_bound_p4"
    NO_NULLING = "no_nulling"


class SolverLimits(BaseModel):
    """Knobs shared by the optimizer entry points"""
    model_config = ConfigDict(frozen=True, extra='forbid')

    max_cuts: int = Field(500, ge=0)
    integrality_tol: float = Field(1e-6, gt=0)
    # exact = Fraction tableau, float = numpy tableau, auto = exact for small blocks
    arithmetic: Literal["auto", "exact", "float"] = "auto"
    exact_block_limit: int = Field(16, ge=1)
    max_bnb_nodes: int = Field(20000, ge=1)
    brute_force_max_vars: int = Field(22, ge=1)
    expansion_term_limit: int = Field(2_000_000, ge=1)
    # the expansion-based methods build dense square tables over K(J+1) variables
    max_program_vars: int = Field(2000, ge=1)
    probability_floor: float = Field(1e-3, gt=0, le=1)
    per_bs_probability: bool = False


class PathLossModel(BaseModel):
    """Log-distance law PL = intercept + 10 * exponent * log10(d_m)"""
    model_config = ConfigDict(frozen=True, extra='forbid')

    intercept_db: float
    exponent: float = Field(gt=0)


class PathLossConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    macro: PathLossModel = PathLossModel(intercept_db=38.0, exponent=3.5)
    small_outdoor: PathLossModel = PathLossModel(intercept_db=30.5, exponent=3.67)
    small_indoor: PathLossModel = PathLossModel(intercept_db=38.46, exponent=2.0)


class PowerConfig(BaseModel):
    """Transmit powers per role, dBm"""
    model_config = ConfigDict(frozen=True, extra='forbid')

    mbs: float = 40.0
    sbs: float = 25.0
    sue: float = 15.0
    # macro users take one level per distance quantile to the MBS, nearest first
    mue_levels: Tuple[float, ...] = (10.0, 15.0, 20.0, 25.0, 30.0)

    @field_validator('mue_levels')
    @classmethod
    def _levels_nonempty(cls, v):
        if len(v) == 0:
            raise ValueError('mue_levels must not be empty')
        return v


class ExperimentConfig(BaseModel):
    """Monte Carlo experiment definition; field names are the config file keys"""
    model_config = ConfigDict(frozen=True, extra='forbid')

    macro_radius: float = Field(1000.0, gt=0)
    small_radius: float = Field(50.0, gt=0)
    n_sbs: Union[int, List[int]] = [2, 4, 6, 8]
    n_users: Union[int, List[int]] = 30
    bandwidth: float = Field(4e6, gt=0)
    powers: PowerConfig = PowerConfig()
    noise_dbm: float = -99.0
    ratio_mbs: float = Field(100.0, gt=0)
    ratio_sbs: float = Field(10.0, gt=0)
    dof_mbs: int = Field(100, ge=1)
    dof_sbs: int = Field(12, ge=1)
    sbs_array: Tuple[int, int] = (3, 3)
    q_max: int = Field(3, ge=1)
    fixed_paths: Optional[int] = Field(None, ge=1)
    trials: int = Field(100, ge=1)
    seed: int = 0
    methods: List[Method] = [
        Method.NO_NULLING, Method.HEURISTIC, Method.CUTTING_PLANE, Method.UPPER_BOUND_P4
    ]
    gamma_out: float = 0.0
    outage_array_gain: bool = False
    epsilon_n: float = Field(1.0, gt=0)
    max_order: int = Field(3, ge=1)
    path_loss: PathLossConfig = PathLossConfig()
    min_sbs_separation: Optional[float] = Field(None, ge=0)
    hotspot_fraction: float = Field(0.0, ge=0, le=1)
    verify_nulls: bool = False
    path_spread_deg: float = Field(10.0, ge=0, lt=90)
    # off: solve_time_ms stays empty and reruns are byte-identical
    record_timing: bool = False
    workers: int = Field(DEFAULT_WORKERS, ge=1)
    limits: SolverLimits = SolverLimits()

    @field_validator('n_sbs', 'n_users')
    @classmethod
    def _sweep_nonempty(cls, v, info):
        values = v if isinstance(v, list) else [v]
        if not values:
            raise ValueError(f'{info.field_name} sweep list must not be empty')
        if info.field_name == 'n_users' and min(values) < 0:
            raise ValueError('n_users must be >= 0')
        if info.field_name == 'n_sbs' and min(values) < 0:
            raise ValueError('n_sbs must be >= 0')
        return v

    @field_validator('methods')
    @classmethod
    def _methods_nonempty(cls, v):
        if not v:
            raise ValueError('methods must not be empty')
        return v

    @field_validator('sbs_array')
    @classmethod
    def _array_counts(cls, v):
        if v[0] < 1 or v[1] < 1:
            raise ValueError('sbs_array counts must be >= 1')
        return v

    @model_validator(mode='after')
    def _single_sweep(self):
        if len(self.n_sbs_values) > 1 and len(self.n_users_values) > 1:
            raise ValueError('only one of n_sbs / n_users may be swept')
        return self

    @property
    def n_sbs_values(self) -> List[int]:
        return self.n_sbs if isinstance(self.n_sbs, list) else [self.n_sbs]

    @property
    def n_users_values(self) -> List[int]:
        return self.n_users if isinstance(self.n_users, list) else [self.n_users]

    @property
    def sweep_param(self) -> str:
        return 'n_users' if len(self.n_users_values) > 1 else 'n_sbs'

    @property
    def sbs_separation(self) -> float:
        if self.min_sbs_separation is None:
            return 2.0 * self.small_radius
        return self.min_sbs_separation

    def sweep_points(self) -> List[Tuple[int, int, int]]:
        """
        Enumerate sweep points

        Returns:
            list of (sweep_value, n_sbs, n_users)
        """
        if self.sweep_param == 'n_users':
            return [(k, self.n_sbs_values[0], k) for k in self.n_users_values]
        return [(j, j, self.n_users_values[0]) for j in self.n_sbs_values]


def load_config(path: Union[str, Path], **overrides) -> ExperimentConfig:
    """
    Load an ExperimentConfig from a JSON file

    Args:
        path: config file
        overrides: field values replacing the file's (None values ignored)

    Returns:
        validated ExperimentConfig

    Raises:
        ConfigError: unreadable file or invalid fields
    """
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    data.update({k: v for k, v in overrides.items() if v is not None})
    return parse_config(data)


def parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid config: {e}") from e


def configure_logging(level: Optional[str] = None) -> None:
    """Install the single stream handler used by the CLI"""
    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    )
