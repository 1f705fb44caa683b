"""
Postcondition Report
Verdicts on a scenario's expected clauses, invariants and exposure, plus the text report
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

from src.domain.model import ParticipantRole
from src.engine.invariants import InvariantVerdict, Snapshot, balance_effects, user_position

logger = logging.getLogger(__name__)


@dataclass
class ClauseVerdict:
    clause: str
    passed: bool
    detail: str = ''


@dataclass
class UseCaseOutcome:
    """What the orchestrated flow ended with"""

    succeeded: bool
    failure_mode: Optional[str] = None
    failure_detail: str = ''
    lock: Optional[Any] = None


@dataclass
class SlotEvidence:
    """Per-slot measurements the evaluation matrix aggregates"""

    slot: str
    option: str
    central_bank_exposed: bool
    tsp_exposed: bool
    exposed_roles: List[str]
    exposed_components: List[str]
    hop_count: int
    liquidity_demand: int
    edges: List[str] = field(default_factory=list)


@dataclass
class PostconditionReport:
    scenario: str
    use_case: str
    bindings: Dict[str, str]
    expected_outcome: str
    outcome: str
    failure_mode: Optional[str] = None
    clauses: List[ClauseVerdict] = field(default_factory=list)
    invariants: List[InvariantVerdict] = field(default_factory=list)
    assertions: List[ClauseVerdict] = field(default_factory=list)
    slots: Dict[str, SlotEvidence] = field(default_factory=dict)
    unsettled: List[str] = field(default_factory=list)
    keys: Dict[str, int] = field(default_factory=dict)
    exposure_lines: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (
            self.outcome == self.expected_outcome
            and all(c.passed for c in self.clauses)
            and all(i.passed for i in self.invariants)
            and all(a.passed for a in self.assertions)
        )

    def failures(self) -> List[str]:
        failed = []
        if self.outcome != self.expected_outcome:
            failed.append(f"outcome {self.outcome} (expected {self.expected_outcome})")
        failed += [f"clause {c.clause}: {c.detail}" for c in self.clauses if not c.passed]
        failed += [f"invariant {i.name}: {i.detail}" for i in self.invariants if not i.passed]
        failed += [f"assertion {a.clause}: {a.detail}" for a in self.assertions if not a.passed]
        return failed

    def text(self) -> str:
        """Banner-style report written next to the trace"""
        lines = [
            "=" * 70,
            f"SCENARIO REPORT - {self.scenario} ({self.use_case})",
            "=" * 70,
            "",
            f"Bindings:  {', '.join(f'{k}={v}' for k, v in sorted(self.bindings.items()))}",
            f"Outcome:   {self.outcome} (expected {self.expected_outcome})",
        ]
        if self.failure_mode:
            lines.append(f"Failure:   {self.failure_mode}")
        lines += ["", "POSTCONDITIONS:"]
        lines += [f"  [{'PASS' if c.passed else 'FAIL'}] {c.clause} {c.detail}".rstrip() for c in self.clauses]
        lines += ["", "INVARIANTS:"]
        lines += [f"  [{'PASS' if i.passed else 'FAIL'}] {i.name} {i.detail}".rstrip() for i in self.invariants]
        if self.assertions:
            lines += ["", "ASSERTIONS:"]
            lines += [f"  [{'PASS' if a.passed else 'FAIL'}] {a.clause} {a.detail}".rstrip()
                      for a in self.assertions]
        lines += ["", "EXPOSURE / LIQUIDITY:"]
        for slot, evidence in sorted(self.slots.items()):
            lines.append(
                f"  {slot}.{evidence.option}: central_bank={'yes' if evidence.central_bank_exposed else 'no'}"
                f" tsp={'yes' if evidence.tsp_exposed else 'no'} hops={evidence.hop_count}"
                f" liquidity={evidence.liquidity_demand}"
            )
        lines += ["", f"Unsettled obligations: {len(self.unsettled)}"]
        lines += [f"  {u}" for u in self.unsettled]
        lines.append(f"Keys: seals={self.keys.get('seals', 0)} opens={self.keys.get('opens', 0)} "
                     f"directory={self.keys.get('directory_entries', 0)}")
        lines += ["", f"VERDICT: {'PASS' if self.passed else 'FAIL'}", "=" * 70, ""]
        return "\n".join(lines)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'scenario': self.scenario,
            'use_case': self.use_case,
            'bindings': dict(sorted(self.bindings.items())),
            'expected_outcome': self.expected_outcome,
            'outcome': self.outcome,
            'failure_mode': self.failure_mode,
            'passed': self.passed,
            'clauses': {c.clause: c.passed for c in self.clauses},
            'invariants': {i.name: i.passed for i in self.invariants},
            'assertions': {a.clause: a.passed for a in self.assertions},
            'slots': {
                slot: {
                    'option': e.option,
                    'central_bank_exposed': e.central_bank_exposed,
                    'tsp_exposed': e.tsp_exposed,
                    'exposed_roles': e.exposed_roles,
                    'exposed_components': e.exposed_components,
                    'hop_count': e.hop_count,
                    'liquidity_demand': e.liquidity_demand,
                }
                for slot, e in sorted(self.slots.items())
            },
            'unsettled': list(self.unsettled),
            'keys': dict(self.keys),
        }


@dataclass
class ClauseContext:
    eco: Any
    scenario: Any
    opening: Snapshot
    closing: Snapshot
    outcome: UseCaseOutcome
    invariants: List[InvariantVerdict]

    @property
    def amount(self) -> int:
        return self.scenario.amount

    def moved(self, actor: str) -> int:
        pid = self.scenario.actor(actor)
        return (user_position(self.eco, self.closing.balances, pid)
                - user_position(self.eco, self.opening.balances, pid))

    def inbox_has(self, actor: str, *kinds: str) -> bool:
        participant = self.eco.participant(self.scenario.actor(actor))
        return any(env.kind in kinds for env in participant.inbox)


def _moved_by(actor: str, sign: int) -> Callable[[ClauseContext], Tuple[bool, str]]:
    def check(ctx: ClauseContext) -> Tuple[bool, str]:
        moved = ctx.moved(actor)
        return moved == sign * ctx.amount, f"{actor} moved {moved:+d}"
    return check


def _notified(actor: str, *kinds: str) -> Callable[[ClauseContext], Tuple[bool, str]]:
    kinds = kinds or ('PaymentNotification', 'Notification')
    return lambda ctx: (ctx.inbox_has(actor, *kinds), '')


def _cross_ledger_settled(ctx: ClauseContext) -> Tuple[bool, str]:
    conserved = all(i.passed for i in ctx.invariants if i.name in ('conservation', 'books'))
    unsettled = ctx.eco.eps.unsettled_batches() if ctx.eco.eps is not None else []
    return conserved and not unsettled, f"{len(unsettled)} unsettled batches"


def _no_funds_moved(ctx: ClauseContext) -> Tuple[bool, str]:
    users = [pid for pid, role in ctx.eco.roles.items() if role is ParticipantRole.USER]
    moved = {pid: user_position(ctx.eco, ctx.closing.balances, pid) - user_position(ctx.eco, ctx.opening.balances, pid)
             for pid in users}
    moved = {pid: delta for pid, delta in moved.items() if delta}
    return not moved, ', '.join(f"{pid}:{delta:+d}" for pid, delta in sorted(moved.items()))


def _lock_state(ctx: ClauseContext) -> Optional[str]:
    from src.participants.funds_locking import lock_state
    if ctx.outcome.lock is None:
        return None
    return lock_state(ctx.eco, ctx.outcome.lock)


def _funds_unlocked(ctx: ClauseContext) -> Tuple[bool, str]:
    state = _lock_state(ctx)
    wallet = ctx.eco.wallet_of(ctx.scenario.actor('consumer'))
    pip = ctx.eco.pip(ctx.eco.core.wallet(wallet).managing_pip)
    held = ctx.eco.core.lock_sum(wallet).minor_units + pip.pip_lock_sum(wallet).minor_units
    return state in (None, 'Cancelled', 'Refunded', 'Expired') and held == 0, f"lock {state}, held {held}"


CLAUSES: Dict[str, Callable[[ClauseContext], Tuple[bool, str]]] = {
    'payer_debited': _moved_by('payer', -1),
    'payee_credited': _moved_by('payee', 1),
    'consumer_debited': _moved_by('consumer', -1),
    'merchant_credited': _moved_by('merchant', 1),
    'cross_ledger_settled': _cross_ledger_settled,
    'payer_notified': _notified('payer'),
    'payee_notified': _notified('payee', 'PaymentNotification'),
    'merchant_notified': _notified('merchant'),
    'product_delivered': _notified('consumer', 'ProductDelivery'),
    'delivery_agent_notified': _notified('delivery_agent'),
    'funds_locked': lambda ctx: (ctx.outcome.lock is not None, ''),
    'lock_released': lambda ctx: (_lock_state(ctx) == 'Released', f"lock {_lock_state(ctx)}"),
    'no_funds_moved': _no_funds_moved,
    'funds_unlocked': _funds_unlocked,
}


def decide_clauses(ctx: ClauseContext) -> List[ClauseVerdict]:
    """Exactly one verdict per expected clause"""
    verdicts = []
    for clause in ctx.scenario.clauses:
        check = CLAUSES.get(clause)
        if check is None:
            verdicts.append(ClauseVerdict(clause, False, 'unknown clause'))
            continue
        passed, detail = check(ctx)
        verdicts.append(ClauseVerdict(clause, passed, detail))
    return verdicts


def slot_evidence(eco, slots) -> Dict[str, SlotEvidence]:
    """Exposure, hop count and intermediary liquidity per bound slot"""
    evidence = {}
    for slot in slots:
        exposures = eco.bus.exposures
        roles = sorted({row.role.value for row in exposures.rows if row.slot == slot})
        records = [r for r in eco.bus.records if r.envelope is not None and r.envelope.slot == slot]
        evidence[slot] = SlotEvidence(
            slot=slot,
            option=eco.bindings.get(slot, '-'),
            central_bank_exposed=exposures.central_bank_exposed(slot),
            tsp_exposed=exposures.exposed(ParticipantRole.TSP, slot=slot),
            exposed_roles=roles,
            exposed_components=sorted({row.component for row in exposures.rows if row.slot == slot}),
            hop_count=len(records),
            liquidity_demand=liquidity_demand(eco, records),
            edges=role_edges(eco, slot),
        )
    return evidence


def role_edges(eco, slot: Optional[str] = None) -> List[str]:
    """Distinct sender->receiver:kind edges at role level, in delivery order"""
    edges: List[str] = []
    for record in eco.bus.records:
        env = record.envelope
        if env is None or (slot is not None and env.slot != slot):
            continue
        edge = f"{eco.roles[env.sender].value}->{eco.roles[env.receiver].value}:{env.kind}"
        if edge not in edges:
            edges.append(edge)
    return edges


def liquidity_demand(eco, records) -> int:
    """Peak absolute swing of any intermediary-held wallet across the given records"""
    intermediary = {wid for wid, w in eco.core.wallets.items()
                    if w.technical or eco.roles[w.owner] is not ParticipantRole.USER}
    running: Dict[str, int] = defaultdict(int)
    peak = 0
    for record in records:
        for entry in record.deltas:
            for position, delta in balance_effects(entry):
                if position in intermediary:
                    running[position] += delta
                    peak = max(peak, abs(running[position]))
    return peak


def check_assertions(scenario, report: PostconditionReport) -> List[ClauseVerdict]:
    """Scenario-level expectations on failure mode and per-slot exposure"""
    assertions = []
    expected_mode = scenario.expect.get('failure_mode')
    if expected_mode is not None:
        assertions.append(ClauseVerdict('failure_mode', report.failure_mode == expected_mode,
                                        f"got {report.failure_mode}"))
    for slot, flags in sorted((scenario.expect.get('exposure') or {}).items()):
        evidence = report.slots.get(slot)
        for flag, wanted in sorted(flags.items()):
            actual = getattr(evidence, f"{flag}_exposed", None) if evidence else None
            assertions.append(ClauseVerdict(f"{slot}.{flag}", actual == wanted, f"got {actual}"))
    return assertions
