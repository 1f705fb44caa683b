"""
Digital Pound Ecosystem Simulator - Main Entry Point
Validate configs, run scenarios, evaluate the design-option matrix and replay traces
"""

import argparse
import logging
import os
import sys
from typing import Dict, Iterable, List, Optional

from dotenv import load_dotenv

# Add current directory to path for imports
sys.path.insert(0, os.path.abspath(os.path.dirname(__file__) + '/..'))

from src.domain.errors import ConfigInvalid, EngineError
from src.domain.settings import SimulationSettings
from src.engine.matrix import (
    BATTERIES,
    cli_matrix_render,
    compare_expectations,
    compare_topology,
    evaluate_matrix,
    load_expectations,
    load_suitability,
    load_topology,
    write_combinations,
    write_matrix,
)
from src.engine.replay import replay
from src.engine.scenario import Scenario
from src.engine.scenario_engine import ScenarioEngine, write_artifacts
from src.engine.workloads import run_all
from src.engine.world import WorldConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FAILED = 2

DEFAULT_WORLD = 'config/worlds/standard.yaml'
SETTINGS_PATH = 'config/settings.yaml'

STANDARD_SCENARIOS = {
    'U1': 'config/scenarios/u1_standard.yaml',
    'U2': 'config/scenarios/u2_standard.yaml',
    'U3': 'config/scenarios/u3_standard.yaml',
}

# Matrix suites: batteries to run and whether the randomized workloads join in
SUITES = {
    'all': (BATTERIES, True),
    'standard': (('standard',), False),
    'privacy': (('standard', 'unsealed'), False),
    'liquidity': (('standard', 'liquidity'), False),
    'workloads': ((), True),
}


def exit_code(verdicts: Iterable[bool]) -> int:
    """0 when every verdict passed, 2 otherwise"""
    return EXIT_OK if all(verdicts) else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='dpound',
        description='Deterministic digital pound ecosystem simulator',
    )
    parser.add_argument('--verbose', '-v', action='store_true', help='Debug logging')
    parser.add_argument('--quiet', '-q', action='store_true', help='Errors only')
    parser.add_argument('--settings', default=SETTINGS_PATH, help='Simulation defaults file')
    sub = parser.add_subparsers(dest='command', required=True)

    validate = sub.add_parser('validate', help='Check a world and its scenarios fit together')
    validate.add_argument('--world', default=DEFAULT_WORLD)
    validate.add_argument('--scenario', action='append', default=[], help='Repeatable')

    run = sub.add_parser('run', help='Run one scenario and write trace and reports')
    run.add_argument('--world', default=DEFAULT_WORLD)
    run.add_argument('--scenario', required=True)
    run.add_argument('--out', default=None)
    run.add_argument('--seed', type=int, default=None)

    matrix = sub.add_parser('matrix', help='Evaluate every design option')
    matrix.add_argument('--world', default=DEFAULT_WORLD)
    matrix.add_argument('--suite', choices=sorted(SUITES), default='all')
    matrix.add_argument('--out', default=None)
    matrix.add_argument('--seed', type=int, default=None)

    rerun = sub.add_parser('replay', help='Re-verify a trace file')
    rerun.add_argument('trace')
    rerun.add_argument('--seed', type=int, default=None)
    return parser


def configure_logging(verbose: bool = False, quiet: bool = False):
    if verbose:
        level = logging.DEBUG
    elif quiet:
        level = logging.ERROR
    else:
        level = getattr(logging, os.getenv('DPOUND_LOG_LEVEL', 'WARNING').upper(), logging.WARNING)
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')


def load_settings(path: str) -> SimulationSettings:
    if not os.path.exists(path):
        logger.warning("[WARN] No settings file at %s, using defaults", path)
        return SimulationSettings()
    try:
        return SimulationSettings.from_yaml(path)
    except (OSError, TypeError, AttributeError) as e:
        raise ConfigInvalid(f"Cannot read settings file {path}: {e}") from e


def output_dir(args: argparse.Namespace, settings: SimulationSettings) -> str:
    return args.out or os.getenv('DPOUND_SANDBOX_OUT') or settings.out_dir


def load_world(path: str, settings: SimulationSettings, seed: Optional[int] = None) -> WorldConfig:
    world = WorldConfig.load(path, settings)
    return world.with_settings(seed=seed) if seed is not None else world


def cmd_validate(args: argparse.Namespace, settings: SimulationSettings) -> int:
    world = load_world(args.world, settings)
    for path in args.scenario:
        scenario = Scenario.load(path)
        ScenarioEngine(world, scenario)
        print(f"[OK] {path} fits {args.world}")
    print(f"[OK] {args.world}: {len(world.participants)} participants, {len(world.bindings)} bindings")
    return EXIT_OK


def cmd_run(args: argparse.Namespace, settings: SimulationSettings) -> int:
    world = load_world(args.world, settings, args.seed)
    scenario = Scenario.load(args.scenario)
    try:
        result = ScenarioEngine(world, scenario).run()
    except ConfigInvalid:
        raise
    except EngineError as e:
        print(f"[ERROR] {scenario.name}: {e.kind}: {e}")
        return EXIT_FAILED

    paths = write_artifacts(result, output_dir(args, settings))
    print(result.report.text())
    for kind, path in sorted(paths.items()):
        print(f"  {kind:<9} {path}")
    for failure in result.report.failures():
        print(f"[ERROR] {failure}")
    return exit_code([result.passed])


def standard_scenarios() -> Dict[str, Scenario]:
    return {use_case: Scenario.load(path) for use_case, path in STANDARD_SCENARIOS.items()}


def cmd_matrix(args: argparse.Namespace, settings: SimulationSettings) -> int:
    world = load_world(args.world, settings, args.seed)
    batteries, workloads = SUITES[args.suite]
    verdicts: List[bool] = []

    print("=" * 70)
    print(f"DESIGN OPTION MATRIX - suite {args.suite}")
    print("=" * 70)

    if batteries:
        ratings = load_suitability()
        result = evaluate_matrix(world, standard_scenarios(), ratings, batteries)
        csv_path, text_path = write_matrix(result, output_dir(args, settings))
        print(cli_matrix_render(result))
        print(f"Written: {csv_path}, {text_path}")

        mismatches = compare_expectations(result, load_expectations())
        mismatches += compare_topology(result, load_topology())
        for mismatch in mismatches:
            print(f"[ERROR] {mismatch}")
        verdicts.append(not mismatches)

        # Unsuitable options are expected to break their own postconditions
        for option in result.frame.itertuples():
            if ratings.get(option.option) in ('suitable', 'partial') and not option.standard_passed:
                print(f"[ERROR] {option.option} rated {ratings[option.option]} failed its standard run")
                verdicts.append(False)

        if result.combinations:
            combos_path = write_combinations(result, output_dir(args, settings))
            print(f"Combinations: {len(result.combinations)} run, written to {combos_path}")
        for label in result.failed_combinations():
            print(f"[ERROR] combination {label} failed its standard run")
            verdicts.append(False)

    if workloads:
        print()
        for verdict in run_all(world.seed):
            tag = 'OK' if verdict.passed else 'ERROR'
            print(f"[{tag}] {verdict.name}: {verdict.cases} cases, {verdict.violations} violations {verdict.detail}".rstrip())
            verdicts.append(verdict.passed)

    code = exit_code(verdicts)
    print()
    print(f"VERDICT: {'PASS' if code == EXIT_OK else 'FAIL'}")
    print("=" * 70)
    return code


def cmd_replay(args: argparse.Namespace, settings: SimulationSettings) -> int:
    try:
        verdict = replay(args.trace, seed=args.seed, settings=settings)
    except EngineError as e:
        if isinstance(e, ConfigInvalid):
            raise
        print(f"[ERROR] {e.kind}: {e}")
        return EXIT_FAILED
    for check in verdict.checks:
        print(f"  [{'PASS' if check.passed else 'FAIL'}] {check.name} {check.detail}".rstrip())
    print(f"[OK] {args.trace} replays identically" if verdict.passed else f"[ERROR] {args.trace} failed checks")
    return exit_code([verdict.passed])


COMMANDS = {
    'validate': cmd_validate,
    'run': cmd_run,
    'matrix': cmd_matrix,
    'replay': cmd_replay,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, dispatch the subcommand and return its exit code"""
    load_dotenv()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on unknown flags, which is reserved for failed verdicts
        return EXIT_CONFIG if e.code else EXIT_OK
    configure_logging(args.verbose, args.quiet)

    try:
        settings = load_settings(args.settings)
        return COMMANDS[args.command](args, settings)
    except ConfigInvalid as e:
        print(f"[ERROR] Invalid configuration: {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
