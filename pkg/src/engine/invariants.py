"""
Invariant Checks
Conservation, lock coherence, escrow and role admissibility over a finished run
"""

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Tuple

from src.domain.model import ParticipantRole
from src.ledger.journal import JournalEntry

logger = logging.getLogger(__name__)

# Roles whose own books must come out of every run unchanged
INTERMEDIARY_ROLES = {
    ParticipantRole.COMMERCIAL_BANK, ParticipantRole.PIP, ParticipantRole.PIP_LITE,
    ParticipantRole.FMI, ParticipantRole.ACQUIRER,
}
CENTRAL_ROLES = {
    ParticipantRole.CENTRAL_BANK_CBDC_SYSTEM, ParticipantRole.CENTRAL_BANK_RTGS, ParticipantRole.FPS_SCHEME,
}

_CORE_LOCKS = {
    'LockPlaced': ('lock', 1), 'LockReleased': ('lock', -1), 'LockCancelled': ('lock', -1),
    'LockExpired': ('lock', -1), 'Reserved': ('reservation', 1),
    'ReservationReleased': ('reservation', -1), 'ReservationCancelled': ('reservation', -1),
}


def balance_effects(entry: JournalEntry) -> List[Tuple[str, int]]:
    """Signed balance changes (position id, pence) a journal entry stands for"""
    amount = entry.amount.minor_units
    if entry.ledger == 'CBDC':
        if entry.kind == 'Mint':
            return [(entry.ref, amount)]
        if entry.kind == 'Burn':
            return [(entry.ref, -amount)]
        if entry.kind == 'Transfer':
            return [(entry.ref, -amount), (entry.counterparty, amount)]
        return []
    if entry.ledger == 'RTGS':
        if entry.kind == 'Transfer':
            return [(entry.ref, -amount), (entry.counterparty, amount)]
        if entry.kind in ('Debit', 'NetDebit'):
            return [(entry.ref, -amount)]
        if entry.kind in ('Credit', 'NetCredit'):
            return [(entry.ref, amount)]
        return []
    if entry.ledger == 'BANK':
        return [(entry.ref, -amount if entry.kind == 'Debit' else amount)]
    return []


def apply_entries(balances: Dict[str, int], entries: Iterable[JournalEntry]) -> Dict[str, int]:
    result = dict(balances)
    for entry in entries:
        for position, delta in balance_effects(entry):
            result[position] = result.get(position, 0) + delta
    return result


@dataclass
class Snapshot:
    """Balances of every wallet and account at one instant"""

    tick: int
    balances: Dict[str, int]
    cursor: int

    @classmethod
    def capture(cls, eco) -> 'Snapshot':
        balances = {wid: w.ledger_balance.minor_units for wid, w in eco.core.wallets.items()}
        balances.update({aid: a.balance.minor_units for aid, a in eco.rail.settlement_accounts.items()})
        balances.update({aid: a.balance.minor_units for aid, a in eco.rail.customer_accounts.items()})
        return cls(eco.clock.now, dict(sorted(balances.items())), eco.journal.cursor)

    def ledger_of(self, eco, position: str) -> str:
        if position in eco.core.wallets:
            return 'CBDC'
        if position in eco.rail.settlement_accounts:
            return 'RTGS'
        return 'BANK'


@dataclass
class InvariantVerdict:
    name: str
    passed: bool
    detail: str = ''


def user_position(eco, balances: Dict[str, int], user: str) -> int:
    """Deposits plus wallets held by one end user"""
    total = sum(balances.get(aid, 0) for aid, a in eco.rail.customer_accounts.items() if a.owner == user)
    total += sum(balances.get(wid, 0) for wid, w in eco.core.wallets.items() if w.owner == user)
    return total


def central_bank_money(eco, balances: Dict[str, int]) -> int:
    total = sum(balances.get(aid, 0) for aid in eco.rail.settlement_accounts)
    return total + sum(balances.get(wid, 0) for wid in eco.core.wallets)


def institution_books(eco, balances: Dict[str, int], include_batches: bool = True) -> Dict[str, int]:
    """Net value each intermediary institution holds across both ledgers"""
    members: Dict[str, set] = defaultdict(set)
    for pid in eco.participants:
        members[eco.institution_of(pid)].add(eco.roles[pid])
    tracked = {inst for inst, roles in members.items() if roles & INTERMEDIARY_ROLES and not roles & CENTRAL_ROLES}

    values: Dict[str, int] = defaultdict(int)
    for aid, account in eco.rail.settlement_accounts.items():
        values[eco.institution_of(account.holder)] += balances.get(aid, 0)
    for aid, account in eco.rail.customer_accounts.items():
        values[eco.institution_of(account.bank)] -= balances.get(aid, 0)
        values[eco.institution_of(account.owner)] += balances.get(aid, 0)
    for wid, wallet in eco.core.wallets.items():
        values[eco.institution_of(wallet.owner)] += balances.get(wid, 0)
    if include_batches and eco.eps is not None:
        for batch in eco.eps.unsettled_batches():
            for participant, net in batch.net_positions().items():
                values[eco.institution_of(participant)] += net
    return {inst: values[inst] for inst in sorted(tracked)}


def check_conservation(eco, opening: Snapshot) -> InvariantVerdict:
    """Central bank money is constant after every recorded step"""
    expected = central_bank_money(eco, opening.balances)
    balances = dict(opening.balances)
    for record in eco.bus.records:
        balances = apply_entries(balances, record.deltas)
        total = central_bank_money(eco, balances)
        if total != expected:
            return InvariantVerdict('conservation', False,
                                    f"tick {record.tick} {record.handler}: {total} != {expected}")
    closing = Snapshot.capture(eco)
    if central_bank_money(eco, closing.balances) != expected:
        return InvariantVerdict('conservation', False, "closing balances drifted from the journal")
    return InvariantVerdict('conservation', True, f"{expected} pence")


def check_issuance(eco) -> InvariantVerdict:
    ok = eco.core.issuance_conserved()
    return InvariantVerdict('issuance', ok, f"issued {eco.core.issued()} vs wallets {eco.core.total_balance()}")


def check_books(eco, opening: Snapshot) -> InvariantVerdict:
    before = institution_books(eco, opening.balances, include_batches=False)
    after = institution_books(eco, Snapshot.capture(eco).balances)
    moved = {inst: after[inst] - before.get(inst, 0) for inst in after if after[inst] != before.get(inst, 0)}
    if moved:
        return InvariantVerdict('books', False, ', '.join(f"{k}:{v:+d}" for k, v in sorted(moved.items())))
    return InvariantVerdict('books', True)


def check_locks(eco, opening: Snapshot) -> InvariantVerdict:
    """
    Brute-force replay of every delta since opening

    After each entry no wallet may hold less than its active core locks
    plus the PIP-side locks its PIP has placed on it.
    """
    balances = dict(opening.balances)
    core_locks: Dict[Tuple[str, str, str, int], int] = defaultdict(int)
    pip_locks: Dict[str, Tuple[str, int]] = {}

    for record in eco.bus.records:
        for entry in record.deltas:
            for position, delta in balance_effects(entry):
                balances[position] = balances.get(position, 0) + delta
            touched = entry.ref
            if entry.ledger == 'CBDC' and entry.kind in _CORE_LOCKS:
                family, sign = _CORE_LOCKS[entry.kind]
                key = (family, entry.ref, entry.counterparty, entry.amount.minor_units)
                core_locks[key] += sign
                if core_locks[key] < 0:
                    return InvariantVerdict('locks', False, f"{entry.kind} without a live lock on {entry.ref}")
            elif entry.ledger == 'PIP':
                if entry.kind == 'LockPlaced':
                    pip_locks[entry.counterparty] = (entry.ref, entry.amount.minor_units)
                else:
                    pip_locks.pop(entry.counterparty, None)
            if touched not in eco.core.wallets:
                continue
            held = sum(n * k[3] for k, n in core_locks.items() if k[1] == touched)
            held += sum(amount for wallet, amount in pip_locks.values() if wallet == touched)
            if balances[touched] < held:
                return InvariantVerdict('locks', False,
                                        f"tick {entry.tick}: {touched} holds {balances[touched]} under {held} locked")
    return InvariantVerdict('locks', True)


def check_escrow(eco) -> InvariantVerdict:
    if 'fmi' not in eco.world.services:
        return InvariantVerdict('escrow', True, 'no FMI')
    fmi = eco.fmi()
    wallet = fmi.wired('wallet')
    escrowed = fmi.escrowed().minor_units
    if wallet is None:
        return InvariantVerdict('escrow', escrowed == 0)
    balance = eco.core.wallet(eco.wallets[wallet]).ledger_balance.minor_units
    return InvariantVerdict('escrow', balance >= escrowed, f"wallet {balance} vs escrowed {escrowed}")


def check_roles(eco) -> InvariantVerdict:
    for record in eco.bus.records:
        env = record.envelope
        if env is None or record.error == 'RoutingError':
            continue
        if not eco.participant(env.receiver).admits(env.kind):
            return InvariantVerdict('roles', False, f"{env.receiver} handled {env.kind}")
    return InvariantVerdict('roles', True)


def check_all(eco, opening: Snapshot) -> List[InvariantVerdict]:
    verdicts = [
        check_conservation(eco, opening),
        check_issuance(eco),
        check_books(eco, opening),
        check_locks(eco, opening),
        check_escrow(eco),
        check_roles(eco),
    ]
    for verdict in verdicts:
        if not verdict.passed:
            logger.error("[ERROR] Invariant %s failed: %s", verdict.name, verdict.detail)
    return verdicts
