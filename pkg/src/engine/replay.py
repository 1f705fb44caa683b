"""
Trace Replay
Independently reconciles a trace file, then re-executes it and demands a byte-identical result
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from src.domain.errors import InvariantViolation, TraceMismatch
from src.domain.money import Money
from src.domain.settings import SimulationSettings
from src.engine.invariants import InvariantVerdict, apply_entries
from src.engine.scenario import Scenario
from src.engine.scenario_engine import ScenarioEngine, Trace
from src.engine.world import WorldConfig
from src.ledger.journal import JournalEntry

logger = logging.getLogger(__name__)

_CHECKPOINTS = ('Opening', 'Balance')
_CENTRAL_BANK_MONEY = ('CBDC', 'RTGS')


@dataclass
class ReplayVerdict:
    path: str
    identical: bool
    checks: List[InvariantVerdict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.identical and all(c.passed for c in self.checks)


def parse_delta(line: str) -> Optional[JournalEntry]:
    """Journal entry for a delta line, None for message and checkpoint lines"""
    parts = line.split('|')
    if len(parts) != 5 or parts[1] in _CHECKPOINTS:
        return None
    ledger, _, kind = parts[1].rpartition(':')
    try:
        return JournalEntry(int(parts[0]), kind, parts[2], Money(int(parts[3])), parts[4], ledger or 'CBDC')
    except ValueError as e:
        raise TraceMismatch(f"Unreadable delta line {line!r}: {e}") from e


def check_trace(trace: Trace) -> List[InvariantVerdict]:
    """
    Re-derive closing balances from the opening checkpoint plus every delta

    Runs without the engine, so a hand-edited delta shows up even when
    the file is never re-executed.
    """
    opening = {position: balance for position, balance, _ in trace.checkpoints('Opening')}
    closing = {position: balance for position, balance, _ in trace.checkpoints('Balance')}
    ledgers = {position: ledger for position, _, ledger in trace.checkpoints('Opening')}
    entries = [entry for entry in (parse_delta(line) for line in trace.lines) if entry is not None]
    derived = apply_entries(opening, entries)

    drift = sorted(p for p in set(derived) | set(closing) if derived.get(p, 0) != closing.get(p, 0))
    reconciliation = InvariantVerdict(
        'reconciliation', not drift,
        f"{len(drift)} positions drift, first {drift[0]}" if drift else f"{len(entries)} deltas")

    def money(balances: Dict[str, int]) -> int:
        return sum(v for p, v in balances.items() if ledgers.get(p) in _CENTRAL_BANK_MONEY)

    conserved = money(derived) == money(opening)
    conservation = InvariantVerdict('conservation', conserved, f"{money(opening)} -> {money(derived)}")
    return [reconciliation, conservation]


def replay(path: str, seed: Optional[int] = None, settings: Optional[SimulationSettings] = None) -> ReplayVerdict:
    """
    Verify a trace file

    Args:
        path: Trace written by a previous run
        seed: Re-execute under this seed instead of the recorded one
        settings: Base settings the world file overrides

    Returns:
        ReplayVerdict with the independent checks and the re-run invariants

    Raises:
        InvariantViolation: the file does not reconcile on its own
        TraceMismatch: re-execution differs from the file
    """
    recorded = Trace.read(path)
    checks = check_trace(recorded)
    broken = [c for c in checks if not c.passed]
    if broken:
        raise InvariantViolation(f"{path}: " + '; '.join(f"{c.name} {c.detail}" for c in broken))

    header = recorded.header
    for key in ('seed', 'world', 'scenario'):
        if key not in header:
            raise TraceMismatch(f"{path} has no {key} in its header")
    bindings = dict(pair.split('=', 1) for pair in header.get('bindings', '').split(',') if pair)
    world = WorldConfig.load(header['world'], settings).with_bindings(bindings)
    world = world.with_settings(seed=int(header['seed']) if seed is None else seed)
    scenario = Scenario.load(header['scenario'])

    result = ScenarioEngine(world, scenario).run()
    expected, actual = recorded.text().splitlines(), result.trace.text().splitlines()
    if expected != actual:
        index = next((i for i, (a, b) in enumerate(zip(expected, actual)) if a != b),
                     min(len(expected), len(actual)))
        got = actual[index] if index < len(actual) else '<end>'
        want = expected[index] if index < len(expected) else '<end>'
        raise TraceMismatch(f"{path} line {index + 1}: recorded {want!r}, replayed {got!r}")

    logger.info("[OK] Replayed %s: %d lines identical", path, len(expected))
    return ReplayVerdict(path, True, checks + list(result.report.invariants))
