"""
NullPlan command line
Co-array reports, beam patterns, single-scenario solves and Monte Carlo runs
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
from pydantic import ValidationError

from core.beamforming import NullingSpec, pattern_grid, solve_weights
from core.coarray import GeometryDocument, difference_coarray, max_dof, nested_positions
from core.config import Method, configure_logging, load_config
from core.errors import (ConfigError, GenerationError, InfeasibleScenarioError,
                         NoMacroUsersError, NullPlanError)
from core.harness import (aggregate, all_failed, run_experiment, write_summary_csv,
                          write_trials_csv)
from core.hetnet import load_scenario, outage_probability_mu
from core.optimizer import solve

logger = logging.getLogger("nullplan")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SCENARIO = 3
EXIT_SOLVER = 4


def _float_list(text: str) -> List[float]:
    return [float(t) for t in text.split(',') if t.strip()] if text else []


def _int_list(text: str) -> List[int]:
    return [int(t) for t in text.split(',') if t.strip()]


# === SUBCOMMANDS ===

def cmd_coarray(args) -> int:
    geometry = nested_positions(args.n1, args.n2)
    coarray = difference_coarray(geometry)
    report = {
        'n1': args.n1,
        'n2': args.n2,
        'positions': list(geometry.positions),
        'lags': list(coarray.lags),
        'n_lags': coarray.size,
        'contiguous_aperture': coarray.contiguous_aperture,
        'max_dof': max_dof(geometry.size),
    }
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        print(f"positions: {report['positions']}")
        print(f"lags: {report['n_lags']} distinct, contiguous aperture {coarray.contiguous_aperture}")
        print(f"max DoF: {report['max_dof']}")
    return EXIT_OK


def cmd_pattern(args) -> int:
    try:
        geometry = GeometryDocument.model_validate_json(Path(args.geometry).read_text()).to_geometry()
    except (OSError, ValidationError) as e:
        raise ConfigError(f"cannot read geometry {args.geometry}: {e}") from e
    spec = NullingSpec(tuple(np.deg2rad(_float_list(args.desired))),
                       tuple(np.deg2rad(_float_list(args.nulls))))
    weights = solve_weights(geometry, spec)
    grid = pattern_grid(weights, args.grid)
    frame = pd.DataFrame({
        'theta_deg': grid[:, 0].real,
        're': grid[:, 1].real,
        'im': grid[:, 1].imag,
        'abs': np.abs(grid[:, 1]),
    })
    frame.to_csv(args.out, index=False, float_format='%.9g')
    logger.info("wrote %d pattern samples to %s (residual %.2e)", args.grid, args.out,
                weights.residual)
    return EXIT_OK


def cmd_solve(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except (OSError, ValidationError, ValueError) as e:
        if isinstance(e, NullPlanError):
            raise
        raise ConfigError(f"cannot read scenario {args.scenario}: {e}") from e

    report = solve(scenario, Method(args.method), args.max_order)
    document = report.to_document()
    try:
        document['mu_outage_prob'] = outage_probability_mu(scenario, report.assignment, 0.0)
    except NoMacroUsersError:
        document['mu_outage_prob'] = None
    Path(args.out).write_text(json.dumps(document, indent=2))
    logger.info("%s: %.4f bits/s/Hz, %d cuts", args.method, report.objective_exact_rate,
                report.cuts_added)
    return EXIT_OK


def _run_and_write(config, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    reports = run_experiment(config)
    write_trials_csv(reports, out / 'trials.csv')
    if all_failed(reports):
        logger.error("every trial failed")
        return EXIT_SOLVER
    write_summary_csv(aggregate(reports, config.sweep_param), out / 'summary.csv')
    logger.info("wrote %d rows to %s", len(reports), out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = load_config(args.config, trials=args.trials, seed=args.seed, workers=args.workers)
    return _run_and_write(config, Path(args.out))


def cmd_sweep(args) -> int:
    other = 'n_users' if args.param == 'n_sbs' else 'n_sbs'
    base = load_config(args.config)
    overrides = {
        args.param: _int_list(args.values),
        other: getattr(base, f"{other}_values")[0],
        'trials': args.trials,
        'seed': args.seed,
        'workers': args.workers,
    }
    config = load_config(args.config, **overrides)
    return _run_and_write(config, Path(args.out))


# === PARSER ===

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='nullplan',
        description='Co-array interference nulling planner for two-tier HetNets')
    parser.add_argument('--log-level', default=None, help='overrides NULLPLAN_LOG_LEVEL')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('coarray', help='nested array geometry and lag report')
    p.add_argument('--n1', type=int, required=True)
    p.add_argument('--n2', type=int, required=True)
    p.add_argument('--json', action='store_true')
    p.set_defaults(handler=cmd_coarray)

    p = sub.add_parser('pattern', help='solve nulling weights and sample the beam pattern')
    p.add_argument('--geometry', required=True, help='geometry JSON file')
    p.add_argument('--desired', required=True, help='comma-separated degrees')
    p.add_argument('--nulls', default='', help='comma-separated degrees')
    p.add_argument('--grid', type=int, default=721)
    p.add_argument('--out', required=True)
    p.set_defaults(handler=cmd_pattern)

    p = sub.add_parser('solve', help='solve one scenario document')
    p.add_argument('--scenario', required=True)
    p.add_argument('--method', choices=[m.value for m in Method], default=Method.CUTTING_PLANE.value)
    p.add_argument('--max-order', type=int, default=3)
    p.add_argument('--out', required=True)
    p.set_defaults(handler=cmd_solve)

    for name, handler in (('simulate', cmd_simulate), ('sweep', cmd_sweep)):
        p = sub.add_parser(name, help=f'{name} Monte Carlo trials')
        p.add_argument('--config', required=True)
        p.add_argument('--out', required=True)
        p.add_argument('--trials', type=int, default=None)
        p.add_argument('--seed', type=int, default=None)
        p.add_argument('--workers', type=int, default=None)
        if name == 'sweep':
            p.add_argument('--param', choices=['n_sbs', 'n_users'], required=True)
            p.add_argument('--values', required=True, help='comma-separated counts')
        p.set_defaults(handler=handler)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except ConfigError as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    except (GenerationError, InfeasibleScenarioError) as e:
        logger.error("%s", e)
        return EXIT_SCENARIO
    except NullPlanError as e:
        logger.error("%s", e)
        return EXIT_SOLVER
    except ValueError as e:
        logger.error("invalid input: %s", e)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
