"""
Enhanced Payment System
Clears transfers between the two ledgers and defers interbank settlement into netted batches
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Protocol, Set

from src.domain.clock import SimClock
from src.domain.errors import (
    CoreDebitFailed,
    InsufficientSettlementFunds,
    LedgerError,
    NotOnboarded,
    RtgsClosed,
)
from src.domain.ids import IdKind, IdSource
from src.domain.money import Money
from src.ledger.core_ledger import BurnOutcome, CoreLedger, CreditOutcome, FundingSource
from src.rail.netting import BatchState, NetSettlementBatch, Obligation, settle_batch
from src.rail.settlement_rail import SettlementRail

logger = logging.getLogger(__name__)


class EpsDirection(Enum):
    CBM_TO_CBDC = 'CbmToCbdc'
    CBDC_TO_CBM = 'CbdcToCbm'


@dataclass
class EpsRecord:
    """Orchestration record of one enhanced-payment-system transfer"""

    id: str
    direction: EpsDirection
    payer_ref: str
    payee_ref: str
    amount: Money
    obligation: Obligation
    batch_id: str
    credit: Optional[CreditOutcome] = None
    reversed: bool = False


class LedgerGateway(Protocol):
    """How the EPS instructs the core ledger and the payee bank"""

    def burn(self, wallet: str, amount: Money, target_account: str, by_pip: str,
             min_available_balance: Money) -> BurnOutcome:
        ...

    def mint(self, wallet: str, amount: Money, funding: FundingSource,
             envelope_ref: Optional[str]) -> CreditOutcome:
        ...

    def credit_account(self, account: str, amount: Money, ref: str) -> None:
        ...


class DirectGateway:
    """Calls the ledgers in-process"""

    def __init__(self, core: CoreLedger, rail: SettlementRail):
        self.core = core
        self.rail = rail

    def burn(self, wallet, amount, target_account, by_pip, min_available_balance):
        return self.core.burn_from(wallet, amount, target_account, by_pip, min_available_balance)

    def mint(self, wallet, amount, funding, envelope_ref):
        return self.core.mint_to(wallet, amount, funding, envelope_ref)

    def credit_account(self, account, amount, ref):
        self.rail.credit_customer(account, amount, ref)


class EnhancedPaymentSystem:
    """Payment system bridging bank accounts and wallets with deferred net settlement"""

    def __init__(self, rail: SettlementRail, core: CoreLedger, ids: IdSource, clock: SimClock,
                 central_bank: str, backing_account: str, batch_window: int = 50,
                 gateway: Optional[LedgerGateway] = None):
        self.rail = rail
        self.core = core
        self.ids = ids
        self.clock = clock
        self.central_bank = central_bank
        self.backing_account = backing_account
        self.batch_window = batch_window
        self.gateway = gateway or DirectGateway(core, rail)

        self.onboarded: Set[str] = set()
        self.batches: Dict[int, NetSettlementBatch] = {}
        self.records: List[EpsRecord] = []

    def onboard(self, participant: str):
        """Join the system (includes the key exchange done by the privacy layer)"""
        self.onboarded.add(participant)

    def eps_transfer(self, direction: EpsDirection, payer_ref: str, payee_ref: str, amount: Money,
                     envelope_ref: Optional[str] = None, by_pip: Optional[str] = None,
                     min_available_balance: Money = Money(0)) -> EpsRecord:
        """
        Move funds across the ledgers, deferring interbank settlement

        Args:
            direction: CbdcToCbm (wallet -> bank account) or CbmToCbdc
            payer_ref: Paying wallet or customer account
            payee_ref: Receiving customer account or wallet
            amount: Transfer amount
            envelope_ref: Message carrying the instruction
            by_pip: PIP authorising a wallet debit
            min_available_balance: PIP-side lock floor for wallet debits

        Returns:
            Orchestration record with the appended obligation
        """
        amount = Money.of(amount)
        if direction is EpsDirection.CBDC_TO_CBM:
            wallet = self.core.wallet(payer_ref)
            bank = self.rail.account(payee_ref).bank
            self._require_onboarded(wallet.managing_pip, bank)
            try:
                self.gateway.burn(payer_ref, amount, self.backing_account, by_pip or wallet.managing_pip,
                                  Money.of(min_available_balance))
            except LedgerError as e:
                raise CoreDebitFailed(f"Core debit of {amount} from {payer_ref} failed: {e}") from e
            obligation = self._obligation(self.central_bank, self._settler(bank), amount)
            self.gateway.credit_account(payee_ref, amount, obligation.id)
            record = self._record(direction, payer_ref, payee_ref, amount, obligation)
        else:
            bank = self.rail.account(payer_ref).bank
            wallet = self.core.wallet(payee_ref)
            self._require_onboarded(bank, wallet.managing_pip)
            self.rail.debit_customer(payer_ref, amount, envelope_ref or 'eps')
            obligation = self._obligation(self._settler(bank), self.central_bank, amount)
            record = self._record(direction, payer_ref, payee_ref, amount, obligation)
            record.credit = self.gateway.mint(
                payee_ref, amount, FundingSource('rail', self.backing_account, payer_ref), envelope_ref)

        logger.info("[OK] EPS %s %s: %s -> %s (batch %s)", direction.value, amount,
                    payer_ref, payee_ref, record.batch_id)
        return record

    def reverse(self, record: EpsRecord, reason: str) -> EpsRecord:
        """Compensate a transfer whose credit leg was rejected"""
        if record.reversed:
            return record
        original = record.obligation
        self._obligation(original.creditor, original.debtor, original.amount)
        if record.direction is EpsDirection.CBM_TO_CBDC:
            self.rail.credit_customer(record.payer_ref, record.amount, f"return:{original.id}")
        record.reversed = True
        logger.info("[REJECTED] EPS transfer %s reversed: %s", record.id, reason)
        return record

    def current_batch(self) -> NetSettlementBatch:
        index = self.clock.now // self.batch_window
        batch = self.batches.get(index)
        if batch is None:
            start = index * self.batch_window
            batch = NetSettlementBatch(self.ids.next_id(IdKind.BATCH), (start, start + self.batch_window))
            self.batches[index] = batch
        return batch

    def close_due(self, now: Optional[int] = None) -> List[NetSettlementBatch]:
        """Settle every batch whose window has closed"""
        now = self.clock.now if now is None else now
        return self._settle([b for _, b in sorted(self.batches.items()) if b.window[1] <= now])

    def flush(self) -> List[NetSettlementBatch]:
        """Close and settle every batch, used at scenario end"""
        return self._settle([b for _, b in sorted(self.batches.items())])

    def unsettled_batches(self) -> List[NetSettlementBatch]:
        return [b for _, b in sorted(self.batches.items()) if b.unsettled]

    def _settle(self, batches: List[NetSettlementBatch]) -> List[NetSettlementBatch]:
        settled = []
        for batch in batches:
            if batch.state is BatchState.SETTLED:
                continue
            try:
                settle_batch(batch, self.rail)
                settled.append(batch)
            except (InsufficientSettlementFunds, RtgsClosed):
                continue
        return settled

    def _require_onboarded(self, *participants: str):
        for participant in participants:
            if participant not in self.onboarded:
                raise NotOnboarded(f"{participant} is not onboarded to the enhanced payment system", participant)

    def _settler(self, bank: str) -> str:
        return self.rail.settlement_account_of(bank).holder

    def _obligation(self, debtor: str, creditor: str, amount: Money) -> Obligation:
        obligation = Obligation(self.ids.next_id(IdKind.OBLIGATION), debtor, creditor, amount)
        self.current_batch().append(obligation)
        return obligation

    def _record(self, direction: EpsDirection, payer_ref: str, payee_ref: str, amount: Money,
                obligation: Obligation) -> EpsRecord:
        record = EpsRecord(
            id=self.ids.next_id(IdKind.INSTRUCTION),
            direction=direction,
            payer_ref=payer_ref,
            payee_ref=payee_ref,
            amount=amount,
            obligation=obligation,
            batch_id=self.current_batch().id,
        )
        self.records.append(record)
        return record
