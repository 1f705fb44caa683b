"""
Randomized Workloads
Seeded obligation batches and lock-and-pay mixes, each checked against a brute-force oracle
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from src.domain.clock import SimClock
from src.domain.errors import InsufficientSettlementFunds
from src.domain.ids import IdSource
from src.domain.money import Money
from src.engine.invariants import Snapshot, check_locks
from src.engine.scenario_engine import USE_CASE_FAILURES
from src.engine.world import WorldConfig
from src.participants.ecosystem import Ecosystem
from src.participants.funds_locking import (
    RELEASE_SETTLEMENT,
    FundsLock,
    cancel_lock,
    lock_state,
    place_lock,
    release_and_settle,
)
from src.participants.interop_settlement import CBDC_TO_CBM_OPTIONS, settle_cbdc_to_cbm
from src.participants.payment_requests import request_to_lock
from src.rail.netting import NetSettlementBatch, Obligation, settle_batch
from src.rail.settlement_rail import SettlementRail

logger = logging.getLogger(__name__)


@dataclass
class WorkloadVerdict:
    name: str
    cases: int
    violations: int
    detail: str = ''

    @property
    def passed(self) -> bool:
        return self.violations == 0


# Netting

def obligation_batch(rng: np.random.Generator, max_participants: int = 6,
                     max_obligations: int = 20) -> Tuple[Dict[str, int], List[Tuple[str, str, int]]]:
    """Opening balances and (debtor, creditor, pence) obligations between 2..max participants"""
    count = int(rng.integers(2, max_participants + 1))
    participants = [f"bank{i}" for i in range(count)]
    balances = {p: int(rng.integers(0, 50_000)) for p in participants}
    obligations = []
    for _ in range(int(rng.integers(0, max_obligations + 1))):
        debtor, creditor = rng.choice(count, size=2, replace=False)
        obligations.append((participants[int(debtor)], participants[int(creditor)], int(rng.integers(1, 10_000))))
    return balances, obligations


def gross_oracle(balances: Dict[str, int], obligations: List[Tuple[str, str, int]]) -> Dict[str, int]:
    """Apply every obligation one by one; a short final position means nothing settles"""
    result = dict(balances)
    for debtor, creditor, amount in obligations:
        result[debtor] -= amount
        result[creditor] += amount
    if any(value < 0 for value in result.values()):
        return dict(balances)
    return result


def settle_netted(balances: Dict[str, int], obligations: List[Tuple[str, str, int]]) -> Dict[str, int]:
    """Run the obligations through a real batch and RTGS, returning final settlement balances"""
    ids = IdSource()
    rail = SettlementRail(SimClock(), ids)
    accounts = {
        p: rail.open_settlement_account(p, f"{200000 + i}", f"{i:08d}", Money(b))
        for i, (p, b) in enumerate(sorted(balances.items()))
    }
    batch = NetSettlementBatch('B-0001', (0, 50))
    for index, (debtor, creditor, amount) in enumerate(obligations):
        batch.append(Obligation(f"O-{index:04d}", debtor, creditor, Money(amount)))
    try:
        settle_batch(batch, rail)
    except InsufficientSettlementFunds:
        pass
    return {p: rail.balance(a).minor_units for p, a in accounts.items()}


def check_netting(seed: int, batches: int = 500) -> WorkloadVerdict:
    """Net settlement must land exactly where gross application does"""
    rng = np.random.default_rng(seed)
    violations = []
    for case in range(batches):
        balances, obligations = obligation_batch(rng)
        if settle_netted(balances, obligations) != gross_oracle(balances, obligations):
            violations.append(case)
    detail = f"first mismatch at batch {violations[0]}" if violations else ''
    return WorkloadVerdict('netting', batches, len(violations), detail)


# PIP locks against participant payment flows

LOCK_WORKLOAD_WORLD = 'config/worlds/standard.yaml'

# Lock options held on the consumer wallet itself
WALLET_LOCK_OPTIONS = ('D1', 'D2', 'D3', 'D4')


def pip_lock_world(seed: int, path: str = LOCK_WORKLOAD_WORLD) -> WorldConfig:
    """Standard world with registrations and the tick budget stretched over a long run"""
    return WorldConfig.load(path).with_settings(seed=seed, tick_budget=1_000_000, dcr_validity_ticks=1_000_000)


def run_pip_lock_workload(seed: int, steps: int = 200, honour_locks: bool = True) -> Tuple[Ecosystem, Snapshot]:
    """
    Interleave lock placement, release, cancellation, expiry and wallet payments

    Every action goes through the participants: requests reach the consumer
    PIP, locks are placed and released by whoever holds them, and payments
    run a cash-out option end to end. With honour_locks off the consumer PIP
    stops sending its lock sum as the debit floor, which is how a PIP that
    forgets its own locks behaves.
    """
    rng = np.random.default_rng(seed)
    eco = Ecosystem(pip_lock_world(seed))
    opening = Snapshot.capture(eco)
    wallet = eco.wallets['consumer_wallet']
    merchant_account = eco.accounts['merchant_account']
    alias = eco.directory.alias_for(wallet)
    eco.pip(eco.core.wallet(wallet).managing_pip).honours_locks = honour_locks
    locks: List[FundsLock] = []

    def active() -> List[FundsLock]:
        return [lock for lock in locks if lock_state(eco, lock) == 'Active']

    for step in range(steps):
        action = int(rng.integers(0, 5))
        amount = Money(int(rng.integers(1, 6_000)))
        try:
            if action == 0:
                expiry = eco.clock.now + int(rng.integers(1, 20))
                option = WALLET_LOCK_OPTIONS[int(rng.integers(0, len(WALLET_LOCK_OPTIONS)))]
                request = request_to_lock(eco, 'D2', 'acquirer', 'merchant', alias, amount,
                                          f"order-{step}", expiry)
                locks.append(place_lock(eco, option, request, merchant_account))
            elif action == 1:
                option = CBDC_TO_CBM_OPTIONS[int(rng.integers(0, len(CBDC_TO_CBM_OPTIONS)))]
                settle_cbdc_to_cbm(eco, option, wallet, merchant_account, amount, acquirer='acquirer')
            elif action in (2, 3) and active():
                candidates = active()
                lock = candidates[int(rng.integers(0, len(candidates)))]
                if action == 3:
                    cancel_lock(eco, lock)
                elif lock.option == 'D1':
                    release_and_settle(eco, 'D1', lock, 'D1')
                else:
                    settlements = RELEASE_SETTLEMENT['D2']
                    release_and_settle(eco, 'D2', lock, settlements[int(rng.integers(0, len(settlements)))])
            else:
                eco.bus.advance(int(rng.integers(1, 5)))
        except USE_CASE_FAILURES as e:
            logger.debug("[REJECTED] Workload step %d: %s", step, e.kind)
            continue
    return eco, opening


def check_pip_lock_oracle(seed: int, workloads: int = 20, steps: int = 200) -> WorkloadVerdict:
    """No payment flow may take a wallet below the locks held on it"""
    violations = []
    for case in range(workloads):
        eco, opening = run_pip_lock_workload(seed + case, steps)
        verdict = check_locks(eco, opening)
        if not verdict.passed:
            violations.append(f"workload {case}: {verdict.detail}")
    return WorkloadVerdict('min_available', workloads, len(violations), violations[0] if violations else '')


def run_all(seed: int) -> List[WorkloadVerdict]:
    verdicts = [check_netting(seed), check_pip_lock_oracle(seed)]
    for verdict in verdicts:
        tag = 'OK' if verdict.passed else 'ERROR'
        logger.info("[%s] Workload %s: %d cases, %d violations", tag, verdict.name, verdict.cases, verdict.violations)
    return verdicts
