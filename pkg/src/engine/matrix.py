"""
Evaluation Matrix
Runs every design option through its use case and tabulates privacy, liquidity, hops and failure modes
"""

import itertools
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Tuple

import pandas as pd
import yaml

from src.domain.errors import ConfigInvalid, EngineError
from src.domain.model import ParticipantRole
from src.engine.scenario import Scenario
from src.engine.scenario_engine import ScenarioEngine
from src.engine.world import SLOT_OPTIONS, USE_CASE_SLOTS, WorldConfig
from src.participants.funds_locking import RELEASE_LOCKS, RELEASE_SETTLEMENT

logger = logging.getLogger(__name__)

COLUMNS = ['option', 'rating', 'privacy_ok', 'central_bank_exposed', 'tsp_exposed', 'sealing_required',
           'liquidity_demand', 'hop_count', 'failure_modes', 'standard_passed']

BATTERIES = ('standard', 'liquidity', 'unsealed')

# Ratings whose options must complete their use case in every combination
RUNNABLE_RATINGS = ('suitable', 'partial')

COMBINATION_COLUMNS = ['use_case', 'bindings', 'outcome', 'passed', 'failure_mode']

# Options that route personal data through the CBDC system and rely on sealing to stay private
UNSEALED_CELLS = ('U1.S1.D4', 'U2.S1.D1', 'U3.S1.D1', 'U3.S2.D1', 'U3.S2.D2')

# Use case whose standard run exercises each slot
SLOT_USE_CASE = {
    'U1.S1': 'U1', 'U1.S2': 'U1', 'U2.S1': 'U2', 'U2.S2': 'U2',
    'U3.S1': 'U3', 'U3.S2': 'U3', 'U3.S3': 'U3',
}

_CENTRAL = {ParticipantRole.CENTRAL_BANK_CBDC_SYSTEM, ParticipantRole.CENTRAL_BANK_RTGS,
            ParticipantRole.FPS_SCHEME}


@dataclass
class CellResult:
    """One run of one option under one battery"""

    option: str
    battery: str
    bindings: Dict[str, str]
    outcome: str
    passed: bool
    central_bank_exposed: Optional[bool] = None
    tsp_exposed: Optional[bool] = None
    exposed_components: List[str] = field(default_factory=list)
    liquidity_demand: int = 0
    hop_count: int = 0
    failure_mode: Optional[str] = None
    edges: List[str] = field(default_factory=list)


@dataclass
class CombinationResult:
    """Standard run of one use case with every slot it exercises bound"""

    use_case: str
    bindings: Dict[str, str]
    outcome: str
    passed: bool
    failure_mode: Optional[str] = None

    @property
    def label(self) -> str:
        return combination_label(self.bindings)


@dataclass
class MatrixResult:
    cells: List[CellResult]
    frame: pd.DataFrame
    combinations: List[CombinationResult] = field(default_factory=list)

    def row(self, option: str) -> Dict[str, Any]:
        rows = self.frame[self.frame['option'] == option]
        if rows.empty:
            raise KeyError(option)
        return rows.iloc[0].to_dict()

    def cell(self, option: str, battery: str = 'standard') -> CellResult:
        for cell in self.cells:
            if cell.option == option and cell.battery == battery:
                return cell
        raise KeyError(f"{option}/{battery}")

    def flagged(self) -> List[str]:
        """Options whose standard run exposed personal data to the central bank"""
        return sorted(self.frame.loc[~self.frame['privacy_ok'].astype(bool), 'option'])

    def failed_combinations(self) -> List[str]:
        return [combo.label for combo in self.combinations if not combo.passed]


def load_suitability(path: str = 'config/suitability.yaml') -> Dict[str, str]:
    """Rating (suitable, partial, unsuitable) per option id such as U1.S2.D5"""
    try:
        with open(path, 'r') as f:
            doc = yaml.safe_load(f) or {}
    except OSError as e:
        raise ConfigInvalid(f"Cannot read suitability file {path}: {e}") from e
    ratings = {}
    for slot, options in doc.items():
        for option, rating in (options or {}).items():
            ratings[f"{slot}.{option}"] = str(rating)
    return ratings


def compatible_bindings(world: WorldConfig, slot: str, option: str) -> Dict[str, str]:
    """
    Bindings exercising one option, with partner slots moved only as far as compatibility needs

    Lock, release and settlement options of the pay-on-delivery case must
    meet; everything else keeps the world's own binding.
    """
    bindings = dict(world.bindings)
    bindings[slot] = option
    if SLOT_USE_CASE[slot] != 'U3' or slot == 'U3.S1':
        return bindings

    if slot == 'U3.S2':
        releases = [r for r in sorted(RELEASE_LOCKS) if option in RELEASE_LOCKS[r]]
        if bindings.get('U3.S3') not in releases:
            bindings['U3.S3'] = releases[0]
    lock_options = RELEASE_LOCKS[bindings['U3.S3']]
    if bindings.get('U3.S2') not in lock_options:
        bindings['U3.S2'] = lock_options[0]
    settlements = RELEASE_SETTLEMENT[bindings['U3.S3']]
    if bindings.get('U2.S2') not in settlements:
        bindings['U2.S2'] = settlements[0]
    return bindings


def combination_label(bindings: Dict[str, str]) -> str:
    return ' '.join(f"{slot}.{option}" for slot, option in sorted(bindings.items()))


def is_compatible(bindings: Dict[str, str]) -> bool:
    """Lock and settlement options can both act on what the bound release option frees"""
    release = bindings.get('U3.S3')
    if release is None:
        return True
    return (bindings.get('U3.S2') in RELEASE_LOCKS[release]
            and bindings.get('U2.S2') in RELEASE_SETTLEMENT[release])


def binding_combinations(use_case: str, ratings: Dict[str, str]) -> List[Dict[str, str]]:
    """
    Cross-product of runnable options over the slots a use case exercises

    Args:
        use_case: U1, U2 or U3
        ratings: Suitability rating per option id; only suitable and partial options take part

    Returns:
        One binding per compatible combination, in slot-then-option order
    """
    slots = USE_CASE_SLOTS[use_case]
    choices = [[option for option in SLOT_OPTIONS[slot] if ratings.get(f"{slot}.{option}") in RUNNABLE_RATINGS]
               for slot in slots]
    combinations = []
    for picked in itertools.product(*choices):
        bindings = dict(zip(slots, picked))
        if is_compatible(bindings):
            combinations.append(bindings)
    return combinations


def stressed_world(world: WorldConfig, use_case: str) -> WorldConfig:
    """
    Remove intermediary prefunding

    Payments into wallets lose the intermediary wallets they are fronted
    from; redemptions lose the settlement accounts intermediaries pay out of.
    """
    roles = {spec.id: spec.role for spec in world.participants}
    institution = {spec.id: spec.institution or spec.id for spec in world.participants}
    intermediary = [w for w in world.wallets if roles[w.owner] not in _CENTRAL | {ParticipantRole.USER}]
    if use_case == 'U1':
        return world.with_wallet_balances({w.name: 0 for w in intermediary})
    holders = {institution[w.owner] for w in intermediary}
    return world.with_account_balances({
        a.name: 0 for a in world.settlement_accounts
        if institution[a.holder] in holders and roles[a.holder] not in _CENTRAL
    })


def run_cell(world: WorldConfig, scenario: Scenario, slot: str, option: str, battery: str) -> CellResult:
    option_id = f"{slot}.{option}"
    cell_world = world.with_bindings(compatible_bindings(world, slot, option))
    if battery == 'liquidity':
        cell_world = stressed_world(cell_world, scenario.use_case)
    elif battery == 'unsealed':
        cell_world = cell_world.with_settings(cbdc_sealing=False)

    try:
        result = ScenarioEngine(cell_world, scenario).run()
    except EngineError as e:
        logger.warning("[WARN] %s/%s cannot run: %s", option_id, battery, e)
        return CellResult(option_id, battery, dict(cell_world.bindings), 'deadlock', False, failure_mode=e.kind)

    report = result.report
    evidence = report.slots[slot]
    return CellResult(
        option=option_id,
        battery=battery,
        bindings=report.bindings,
        outcome=report.outcome,
        passed=report.passed,
        central_bank_exposed=evidence.central_bank_exposed,
        tsp_exposed=evidence.tsp_exposed,
        exposed_components=evidence.exposed_components,
        liquidity_demand=evidence.liquidity_demand,
        hop_count=evidence.hop_count,
        failure_mode=report.failure_mode,
        edges=evidence.edges,
    )


def run_combination(world: WorldConfig, scenario: Scenario, bindings: Dict[str, str]) -> CombinationResult:
    label = combination_label(bindings)
    try:
        result = ScenarioEngine(world.with_bindings(bindings), scenario).run()
    except EngineError as e:
        logger.warning("[WARN] %s cannot run: %s", label, e)
        return CombinationResult(scenario.use_case, dict(bindings), 'deadlock', False, e.kind)
    report = result.report
    if not report.passed:
        logger.warning("[WARN] %s ended %s (%s)", label, report.outcome, report.failure_mode)
    return CombinationResult(scenario.use_case, dict(bindings), report.outcome, report.passed, report.failure_mode)


def evaluate_combinations(world: WorldConfig, scenarios: Dict[str, Scenario],
                          ratings: Dict[str, str]) -> List[CombinationResult]:
    """Run the standard scenario of each use case end to end under every runnable combination"""
    results = []
    for use_case in sorted(scenarios):
        for bindings in binding_combinations(use_case, ratings):
            results.append(run_combination(world, scenarios[use_case], bindings))
    passed = sum(1 for combo in results if combo.passed)
    logger.info("[OK] Combinations: %d of %d passed", passed, len(results))
    return results


def combination_frame(combinations: List[CombinationResult]) -> pd.DataFrame:
    rows = [{
        'use_case': combo.use_case,
        'bindings': combo.label,
        'outcome': combo.outcome,
        'passed': combo.passed,
        'failure_mode': combo.failure_mode or '-',
    } for combo in combinations]
    return pd.DataFrame(rows, columns=COMBINATION_COLUMNS)


def evaluate_matrix(world: WorldConfig, scenarios: Dict[str, Scenario],
                    ratings: Optional[Dict[str, str]] = None,
                    batteries: Iterable[str] = BATTERIES,
                    slots: Optional[Iterable[str]] = None) -> MatrixResult:
    """
    Run each option of each slot under the requested batteries

    Args:
        world: Reference world; each cell re-binds the slot under test
        scenarios: Standard scenario per use case (U1, U2, U3)
        ratings: Suitability rating per option id
        batteries: Any of standard, liquidity, unsealed
        slots: Restrict to these capability slots

    Returns:
        MatrixResult with raw cells, one summary row per option id and, when
        the standard battery runs with ratings, every runnable combination
    """
    ratings = ratings or {}
    batteries = [b for b in BATTERIES if b in set(batteries)]
    cells: List[CellResult] = []
    for slot in sorted(slots or SLOT_OPTIONS):
        scenario = scenarios.get(SLOT_USE_CASE[slot])
        if scenario is None:
            continue
        for option in SLOT_OPTIONS[slot]:
            for battery in batteries:
                if battery == 'unsealed' and f"{slot}.{option}" not in UNSEALED_CELLS:
                    continue
                cells.append(run_cell(world, scenario, slot, option, battery))
    frame = summarise(cells, ratings)
    logger.info("[OK] Matrix: %d cells over %d options", len(cells), len(frame))
    combinations = []
    if 'standard' in batteries and ratings and slots is None:
        combinations = evaluate_combinations(world, scenarios, ratings)
    return MatrixResult(cells, frame, combinations)


def summarise(cells: List[CellResult], ratings: Dict[str, str]) -> pd.DataFrame:
    """One row per option id, deterministic row and column order"""
    rows = []
    by_option: Dict[str, Dict[str, CellResult]] = {}
    for cell in cells:
        by_option.setdefault(cell.option, {})[cell.battery] = cell
    for option in sorted(by_option):
        runs = by_option[option]
        standard = runs.get('standard') or next(iter(runs.values()))
        unsealed = runs.get('unsealed')
        modes = sorted({f"{c.battery}:{c.failure_mode}" for c in runs.values() if c.failure_mode})
        rows.append({
            'option': option,
            'rating': ratings.get(option, '-'),
            'privacy_ok': not standard.central_bank_exposed,
            'central_bank_exposed': bool(standard.central_bank_exposed),
            'tsp_exposed': bool(standard.tsp_exposed),
            'sealing_required': bool(unsealed and unsealed.central_bank_exposed and not standard.central_bank_exposed),
            'liquidity_demand': standard.liquidity_demand,
            'hop_count': standard.hop_count,
            'failure_modes': ';'.join(modes) or '-',
            'standard_passed': standard.passed,
        })
    return pd.DataFrame(rows, columns=COLUMNS)


def cli_matrix_render(result: MatrixResult) -> str:
    """Fixed-width text table; header only when there are no results"""
    frame = result.frame
    if frame.empty:
        return '  '.join(COLUMNS) + '\n'
    return frame.to_string(index=False, columns=COLUMNS) + '\n'


def load_expectations(path: str = 'config/expectations/privacy_matrix.yaml') -> Dict[str, Dict[str, Any]]:
    try:
        with open(path, 'r') as f:
            return yaml.safe_load(f) or {}
    except OSError as e:
        raise ConfigInvalid(f"Cannot read expectation file {path}: {e}") from e


def compare_expectations(result: MatrixResult, expectations: Dict[str, Dict[str, Any]]) -> List[str]:
    """
    Mismatches between measured exposure and the transcribed verdicts

    Each expectation maps an option id to any of central_bank, tsp (booleans)
    and exposed (participants that must appear among the exposed components).
    """
    mismatches = []
    for option, expected in sorted(expectations.items()):
        try:
            cell = result.cell(option)
        except KeyError:
            mismatches.append(f"{option}: not evaluated")
            continue
        for flag in ('central_bank', 'tsp'):
            if flag in expected and getattr(cell, f"{flag}_exposed") != expected[flag]:
                mismatches.append(f"{option}: {flag} exposed {getattr(cell, f'{flag}_exposed')}, "
                                  f"expected {expected[flag]}")
        for component in expected.get('exposed', []):
            if component not in cell.exposed_components:
                mismatches.append(f"{option}: {component} not exposed")
    for mismatch in mismatches:
        logger.error("[ERROR] Privacy matrix mismatch %s", mismatch)
    return mismatches


def load_topology(path: str = 'config/expectations/topology.yaml') -> Dict[str, Dict[str, Any]]:
    """Golden message edges per option id: required edges plus roles that must not appear"""
    return load_expectations(path)


def compare_topology(result: MatrixResult, expectations: Dict[str, Dict[str, Any]]) -> List[str]:
    """
    Mismatches between the delivered message graph and the golden topology

    Edges are role-level (Sender->Receiver:Kind) and compared as a required
    subset, so extra acknowledgements do not break a cell. Roles listed
    under absent must not send or receive anything in the slot.
    """
    mismatches = []
    for option, expected in sorted(expectations.items()):
        try:
            cell = result.cell(option)
        except KeyError:
            mismatches.append(f"{option}: not evaluated")
            continue
        for edge in expected.get('edges') or []:
            if edge not in cell.edges:
                mismatches.append(f"{option}: missing edge {edge}")
        for role in expected.get('absent') or []:
            touching = [e for e in cell.edges if role in e.split(':', 1)[0].split('->')]
            if touching:
                mismatches.append(f"{option}: {role} present in {touching[0]}")
    for mismatch in mismatches:
        logger.error("[ERROR] Topology mismatch %s", mismatch)
    return mismatches


def write_matrix(result: MatrixResult, out_dir: str) -> Tuple[str, str]:
    """Write matrix.csv and matrix.txt; both are byte-stable for a given seed"""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, 'matrix.csv')
    text_path = os.path.join(out_dir, 'matrix.txt')
    result.frame.to_csv(csv_path, index=False, lineterminator='\n')
    with open(text_path, 'w') as f:
        f.write(cli_matrix_render(result))
    return csv_path, text_path


def write_combinations(result: MatrixResult, out_dir: str) -> str:
    """Write combinations.csv, one row per end-to-end run of a full binding"""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, 'combinations.csv')
    combination_frame(result.combinations).to_csv(path, index=False, lineterminator='\n')
    return path
