"""
Scenario Engine
Runs one scripted use case over a built world and produces the trace and postcondition report
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from src.domain.errors import (
    ComplianceFailed,
    ConsumerRejected,
    DigitalPoundError,
    LedgerError,
    ParticipantError,
    PrivacyError,
    RailError,
    UnknownAlias,
)
from src.domain.model import Alias
from src.domain.money import Money
from src.engine.invariants import Snapshot, check_all
from src.engine.postconditions import (
    ClauseContext,
    PostconditionReport,
    UseCaseOutcome,
    check_assertions,
    decide_clauses,
    slot_evidence,
)
from src.engine.scenario import Scenario
from src.engine.world import USE_CASE_SLOTS, WorldConfig
from src.ledger.core_ledger import CreditState
from src.participants.confirmation_of_payee import confirm_payee
from src.participants.ecosystem import Ecosystem
from src.participants.funds_locking import cancel_lock, lock_state, place_lock, release_and_settle
from src.participants.interop_settlement import settle_cbdc_to_cbm, settle_cbm_to_cbdc
from src.participants.payment_requests import request_to_lock, request_to_pay

logger = logging.getLogger(__name__)

# Domain failures a use case ends on; engine errors (mis-bound options) propagate
USE_CASE_FAILURES = (LedgerError, RailError, ParticipantError, PrivacyError)

UNKNOWN_ALIAS = '07700900999'


@dataclass
class Trace:
    """Header, opening balances, delivered messages with their deltas, closing balances"""

    header: Dict[str, str]
    lines: List[str] = field(default_factory=list)

    def text(self) -> str:
        head = ' '.join(f"{key}={value}" for key, value in self.header.items())
        return '\n'.join([f"# {head}", *self.lines]) + '\n'

    def write(self, path: str):
        with open(path, 'w') as f:
            f.write(self.text())

    @classmethod
    def parse(cls, text: str) -> 'Trace':
        rows = text.splitlines()
        if not rows or not rows[0].startswith('# '):
            return cls({}, rows)
        header = {}
        for token in rows[0][2:].split(' '):
            key, _, value = token.partition('=')
            header[key] = value
        return cls(header, rows[1:])

    @classmethod
    def read(cls, path: str) -> 'Trace':
        with open(path, 'r') as f:
            return cls.parse(f.read())

    def checkpoints(self, kind: str) -> List[Tuple[str, int, str]]:
        """(position, balance, ledger) for every Opening or Balance line"""
        found = []
        for line in self.lines:
            parts = line.split('|')
            if len(parts) == 5 and parts[1] == kind:
                found.append((parts[2], int(parts[3]), parts[4]))
        return found


@dataclass
class RunResult:
    trace: Trace
    report: PostconditionReport
    eco: Ecosystem

    @property
    def passed(self) -> bool:
        return self.report.passed

    def exposure_text(self) -> str:
        rows = self.eco.bus.exposures.lines()
        return '\n'.join(['component_role|datum_kind|message|channel', *rows]) + '\n'


class ScenarioEngine:
    """Single mutator of one world for the length of one scenario"""

    def __init__(self, world: WorldConfig, scenario: Scenario):
        scenario.validate(world)
        world.require_bindings(USE_CASE_SLOTS[scenario.use_case])
        self.world = world
        self.scenario = scenario
        self.eco: Optional[Ecosystem] = None

    def run(self) -> RunResult:
        """
        Build the world, apply the script, run the use case and check everything

        Returns:
            RunResult with the trace and the postcondition report

        Raises:
            ConfigInvalid: world or scenario do not fit together
            ScenarioDeadlock: the bound options can never complete the flow
        """
        eco = Ecosystem(self.world)
        self.eco = eco
        opening = Snapshot.capture(eco)
        self._apply_script()

        flow = {'U1': self._run_u1, 'U2': self._run_u2, 'U3': self._run_u3}[self.scenario.use_case]
        outcome = flow()
        if eco.eps is not None:
            eco.bus.record_step('eps.flush', eco.eps.flush)

        closing = Snapshot.capture(eco)
        invariants = check_all(eco, opening)
        report = self._report(opening, closing, outcome, invariants)
        trace = self._trace(opening, closing)
        level = logging.INFO if report.passed else logging.WARNING
        logger.log(level, "[%s] %s finished %s in %d ticks", 'OK' if report.passed else 'WARN',
                   self.scenario.name, report.outcome, eco.clock.now)
        return RunResult(trace, report, eco)

    # Script

    def _apply_script(self):
        eco, scenario = self.eco, self.scenario
        for event in scenario.events:
            action = event.action
            if action in ('reject', 'consumer_reject'):
                if scenario.use_case == 'U1':
                    self._user(scenario.actor('payer')).decisions['confirm_payee'] = False
                else:
                    self._user(scenario.actor('consumer')).decisions['authorise'] = False
            elif action == 'delivery_failed':
                self._user(scenario.actor('consumer')).decisions['accept_delivery'] = False
            elif action in ('pip_reject', 'pip_timeout'):
                pip = event.value or self._credited_pip()
                eco.pip(pip).credit_policy = 'reject' if action == 'pip_reject' else 'timeout'
            elif action == 'scheme_failure':
                eco.rail.fail_next_payment = True
            elif action == 'compliance_fail':
                eco.participant(event.value or self._compliance_party()).compliance_pass = False
        logger.debug("[CONFIG] Applied %d script events", len(scenario.events))

    def _user(self, pid: str):
        return self.eco.participant(pid)

    def _credited_pip(self) -> str:
        """PIP confirming the credit the use case ends with"""
        actor = 'payee' if self.scenario.use_case == 'U1' else 'consumer'
        return self.eco.core.wallet(self.eco.wallet_of(self.scenario.actor(actor))).managing_pip

    def _compliance_party(self) -> str:
        if self.scenario.use_case == 'U1':
            return self.eco.rail.account(self.eco.account_of(self.scenario.actor('payer'))).bank
        return self._credited_pip()

    def _alias(self, holder: str) -> Alias:
        event = self.scenario.event('invalid_alias')
        typed = str(event.value or UNKNOWN_ALIAS) if event is not None else self.scenario.alias
        if typed is None:
            return self.eco.directory.alias_for(self.eco.wallet_of(holder))
        try:
            return Alias.parse(typed)
        except ValueError as e:
            raise UnknownAlias(str(e)) from e

    def _advance_scripted(self):
        event = self.scenario.event('advance')
        if event is not None:
            self.eco.bus.advance(int(event.value or 1))

    def _require_compliance(self, pid: str):
        if not self.eco.participant(pid).compliance_pass:
            logger.info("[REJECTED] %s fails payment compliance checks", pid)
            raise ComplianceFailed(f"{pid} stopped the payment on compliance grounds", pid)

    @staticmethod
    def _failed(error: DigitalPoundError, lock=None) -> UseCaseOutcome:
        logger.info("[REJECTED] Use case failed: %s (%s)", error.kind, error)
        return UseCaseOutcome(False, error.kind, str(error), lock)

    # Use cases

    def _run_u1(self) -> UseCaseOutcome:
        """Parent pays child: bank account to digital pound wallet"""
        eco, scenario, bindings = self.eco, self.scenario, self.eco.bindings
        payer, payee = scenario.actor('payer'), scenario.actor('payee')
        payer_account = eco.account_of(payer)
        payer_bank = eco.rail.account(payer_account).bank
        amount = Money(scenario.amount)
        reference = scenario.name
        self._advance_scripted()

        try:
            alias = self._alias(payee)
            eco.send(payer, payer_bank, 'PaymentInitiation', None,
                     {'reference': reference, 'amount': amount, 'alias': eco.alias_datum(alias)})
            cop = confirm_payee(eco, bindings['U1.S1'], payer_bank, alias)
            confirmed = eco.send(payer_bank, payer, 'CopResult', None,
                                 {'reference': reference, 'payee_name': cop.payee_name}).result
            if not confirmed:
                raise ConsumerRejected(f"{payer} did not confirm {cop.payee_name.value}", payer)
            eco.send(payer, payer_bank, 'PaymentAuthorisation', None, {'reference': reference, 'amount': amount})
            self._require_compliance(payer_bank)

            settle_cbm_to_cbdc(eco, bindings['U1.S2'], payer_account, cop.wallet, amount)
            eco.send(cop.pip, payee, 'PaymentNotification', None, {'reference': reference, 'amount': amount})
            eco.send(payer_bank, payer, 'PaymentNotification', None, {'reference': reference, 'amount': amount})
            return UseCaseOutcome(True)
        except USE_CASE_FAILURES as e:
            eco.send(payer_bank, payer, 'Notification', None,
                     {'reference': reference, 'status': 'failed', 'reason': e.kind})
            return self._failed(e)

    def _checkout(self, initiation: str) -> Tuple[str, str, str, Money]:
        eco, scenario = self.eco, self.scenario
        consumer, merchant, acquirer = (scenario.actor(a) for a in ('consumer', 'merchant', 'acquirer'))
        amount = Money(scenario.amount)
        eco.send(consumer, merchant, 'Checkout', None, {'reference': scenario.name, 'amount': amount})
        eco.send(merchant, acquirer, initiation, None, {'reference': scenario.name, 'amount': amount})
        return consumer, merchant, acquirer, amount

    def _run_u2(self) -> UseCaseOutcome:
        """Consumer pays merchant online: wallet to merchant's bank account"""
        eco, scenario, bindings = self.eco, self.scenario, self.eco.bindings
        self._advance_scripted()
        consumer, merchant, acquirer, amount = self._checkout('PaymentRequestInitiation')
        merchant_account = eco.account_of(merchant)

        try:
            request = request_to_pay(eco, bindings['U2.S1'], acquirer, merchant, self._alias(consumer),
                                     amount, scenario.name)
            self._require_compliance(request.consumer_pip)
            settle_cbdc_to_cbm(eco, bindings['U2.S2'], request.consumer_wallet, merchant_account, amount,
                               acquirer=acquirer)
            merchant_bank = eco.rail.account(merchant_account).bank
            eco.send(merchant_bank, merchant, 'PaymentNotification', None,
                     {'reference': scenario.name, 'amount': amount})
            eco.send(request.consumer_pip, consumer, 'PaymentNotification', None,
                     {'reference': scenario.name, 'amount': amount})
            eco.send(merchant, consumer, 'ProductDelivery', None, {'reference': scenario.name})
            return UseCaseOutcome(True)
        except USE_CASE_FAILURES as e:
            eco.send(acquirer, merchant, 'Notification', None,
                     {'reference': scenario.name, 'status': 'failed', 'reason': e.kind})
            return self._failed(e)

    def _run_u3(self) -> UseCaseOutcome:
        """Pay on delivery: lock at checkout, release and settle once the goods arrive"""
        eco, scenario, bindings = self.eco, self.scenario, self.eco.bindings
        consumer, merchant, acquirer, amount = self._checkout('LockRequestInitiation')
        courier = scenario.actor('delivery_agent')
        merchant_account = eco.account_of(merchant)
        reference = scenario.name
        lock = None

        try:
            request = request_to_lock(eco, bindings['U3.S1'], acquirer, merchant, self._alias(consumer),
                                      amount, reference, expiry=eco.clock.now + scenario.lock_ticks)
            self._require_compliance(request.consumer_pip)
            lock = place_lock(eco, bindings['U3.S2'], request, merchant_account)
            eco.send(acquirer, merchant, 'PaymentConfirmation', None, {'reference': reference, 'lock': lock.reference})
            eco.send(merchant, courier, 'DispatchOrder', None, {'reference': reference})
            self._advance_scripted()

            accepted = eco.send(courier, consumer, 'DeliveryAttempt', None, {'reference': reference}).result
            if not accepted:
                eco.send(courier, consumer, 'DeliveryFailed', None, {'reference': reference})
                eco.send(courier, merchant, 'Notification', None, {'reference': reference, 'status': 'undelivered'})
                cancel_lock(eco, lock)
                eco.send(acquirer, merchant, 'Notification', None,
                         {'reference': reference, 'status': 'failed', 'reason': 'DeliveryFailed'})
                logger.info("[REJECTED] Delivery of %s refused, lock %s cancelled", reference, lock.reference)
                return UseCaseOutcome(False, 'DeliveryFailed', 'consumer refused delivery', lock)

            eco.send(consumer, request.consumer_pip, 'ReleaseAuthorisation', None,
                     {'reference': reference, 'lock': lock.reference})
            release_and_settle(eco, bindings['U3.S3'], lock, bindings['U2.S2'])
            merchant_bank = eco.rail.account(merchant_account).bank
            eco.send(merchant_bank, merchant, 'PaymentNotification', None, {'reference': reference, 'amount': amount})
            eco.send(merchant, courier, 'Notification', None, {'reference': reference, 'status': 'paid'})
            eco.send(request.consumer_pip, consumer, 'PaymentNotification', None,
                     {'reference': reference, 'amount': amount})
            return UseCaseOutcome(True, lock=lock)
        except USE_CASE_FAILURES as e:
            if lock is not None and lock_state(eco, lock) == 'Active':
                try:
                    cancel_lock(eco, lock)
                except USE_CASE_FAILURES as cancel_error:
                    logger.error("[ERROR] Could not cancel lock %s: %s", lock.reference, cancel_error)
            eco.send(acquirer, merchant, 'Notification', None,
                     {'reference': reference, 'status': 'failed', 'reason': e.kind})
            return self._failed(e, lock)

    # Results

    def _report(self, opening: Snapshot, closing: Snapshot, outcome: UseCaseOutcome,
                invariants) -> PostconditionReport:
        eco, scenario = self.eco, self.scenario
        ctx = ClauseContext(eco, scenario, opening, closing, outcome, invariants)
        report = PostconditionReport(
            scenario=scenario.name,
            use_case=scenario.use_case,
            bindings={slot: eco.bindings[slot] for slot in USE_CASE_SLOTS[scenario.use_case]},
            expected_outcome=scenario.expected_outcome,
            outcome='success' if outcome.succeeded else 'failure',
            failure_mode=outcome.failure_mode,
            clauses=decide_clauses(ctx),
            invariants=list(invariants),
            slots=slot_evidence(eco, USE_CASE_SLOTS[scenario.use_case]),
            unsettled=self._unsettled(),
            keys=eco.keys.key_metric(),
        )
        report.assertions = check_assertions(scenario, report)
        return report

    def _unsettled(self) -> List[str]:
        eco = self.eco
        pending = [f"pending credit {p.id} {p.amount.minor_units} to {p.target_wallet}"
                   for p in eco.core.pending.values() if p.state is CreditState.AWAITING]
        batches = []
        if eco.eps is not None:
            batches = [f"batch {b.id} window {b.window[0]}-{b.window[1]} "
                       f"{len(b.obligations)} obligations" for b in eco.eps.unsettled_batches()]
        return pending + batches

    def _trace(self, opening: Snapshot, closing: Snapshot) -> Trace:
        eco = self.eco
        header = {
            'seed': str(eco.settings.seed),
            'world': self.world.path,
            'scenario': self.scenario.path,
            'bindings': ','.join(f"{slot}={option}" for slot, option in sorted(eco.bindings.items())),
        }
        lines = [f"0|Opening|{pos}|{bal}|{opening.ledger_of(eco, pos)}" for pos, bal in opening.balances.items()]
        for record in eco.bus.records:
            lines.extend(record.lines(eco.roles))
        lines += [f"{closing.tick}|Balance|{pos}|{bal}|{closing.ledger_of(eco, pos)}"
                  for pos, bal in closing.balances.items()]
        return Trace(header, lines)


def run(world: WorldConfig, scenario: Scenario) -> RunResult:
    return ScenarioEngine(world, scenario).run()


def write_artifacts(result: RunResult, out_dir: str) -> Dict[str, str]:
    """
    Write trace, postcondition report and exposure report for one run

    Returns:
        Artifact kind -> path
    """
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.join(out_dir, result.report.scenario)
    paths = {
        'trace': f"{stem}.trace",
        'report': f"{stem}.report.txt",
        'exposure': f"{stem}.exposure.txt",
    }
    result.trace.write(paths['trace'])
    with open(paths['report'], 'w') as f:
        f.write(result.report.text())
    with open(paths['exposure'], 'w') as f:
        f.write(result.exposure_text())
    logger.info("[OK] Wrote %s", ', '.join(sorted(paths.values())))
    return paths
