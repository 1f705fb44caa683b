"""
CBDC Core Ledger
Wallets, issuance, two-phase transfers, funds locks and holding limits
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Mapping, Optional, Protocol

from src.domain.clock import SimClock
from src.domain.errors import (
    AlreadyDecided,
    HoldingLimitExceeded,
    InsufficientAvailable,
    InvalidAmount,
    LockNotActive,
    NoLinkedAccount,
    TechnicalWithLimit,
    Unauthorised,
    UnknownParticipant,
    UnknownPendingCredit,
    UnknownWallet,
    WrongPip,
)
from src.domain.ids import IdKind, IdSource
from src.domain.model import WALLET_MANAGER_ROLES, ParticipantRole
from src.domain.money import Money, money_sum
from src.ledger.journal import Journal

logger = logging.getLogger(__name__)


class LockState(Enum):
    ACTIVE = 'Active'
    RELEASED = 'Released'
    EXPIRED = 'Expired'
    CANCELLED = 'Cancelled'


class LockPurpose(Enum):
    FUNDS_LOCK = 'lock'
    RESERVATION = 'reservation'


class CreditState(Enum):
    AWAITING = 'AwaitingPipConfirmation'
    COMPLETED = 'Completed'
    REJECTED = 'Rejected'


class HoldingLimitMode(Enum):
    REJECT = 'reject'
    WATERFALL = 'waterfall'


class LimitOutcome(Enum):
    FULL_CREDIT = 'FullCredit'
    PARTIAL_WITH_WATERFALL = 'PartialWithWaterfall'
    REJECTED = 'Rejected'


@dataclass
class Wallet:
    """Digital pound wallet held on the core ledger"""

    id: str
    owner: str
    managing_pip: str
    ledger_balance: Money = Money(0)
    holding_limit: Optional[Money] = None
    technical: bool = False
    linked_bank_account: Optional[str] = None
    requires_confirmation: bool = True


@dataclass
class LedgerLock:
    """Amount reserved on a wallet for a bound beneficiary"""

    id: str
    wallet: str
    amount: Money
    beneficiary: str
    expiry: int
    state: LockState = LockState.ACTIVE
    purpose: LockPurpose = LockPurpose.FUNDS_LOCK


@dataclass(frozen=True)
class FundingSource:
    """Where an incoming credit came from and where to send it back"""

    kind: str                       # 'rail' or 'wallet'
    ref: str
    return_to: Optional[str] = None


@dataclass
class PendingCredit:
    id: str
    target_wallet: str
    amount: Money
    source: FundingSource
    envelope_ref: Optional[str]
    created_tick: int
    state: CreditState = CreditState.AWAITING
    reservation: Optional[str] = None
    reason: str = ''


@dataclass(frozen=True)
class HoldingLimitDecision:
    outcome: LimitOutcome
    credit: Money
    excess: Money


@dataclass(frozen=True)
class WaterfallInstruction:
    wallet: str
    linked_account: str
    amount: Money


@dataclass(frozen=True)
class ReturnInstruction:
    source: FundingSource
    amount: Money
    reason: str


@dataclass
class CreditOutcome:
    """Result of a mint, transfer or PIP decision"""

    wallet: str
    amount: Money
    state: CreditState
    pending_id: Optional[str] = None
    credited: Money = Money(0)
    waterfall: Optional[WaterfallInstruction] = None
    compensation: Optional[ReturnInstruction] = None
    notify_owner: bool = False

    @property
    def completed(self) -> bool:
        return self.state is CreditState.COMPLETED


@dataclass(frozen=True)
class SettlementInstruction:
    """Emitted when locked funds leave the wallet toward their beneficiary"""

    lock_id: str
    source_wallet: str
    beneficiary: str
    amount: Money
    via_wallet: Optional[str] = None


@dataclass(frozen=True)
class BurnOutcome:
    wallet: str
    amount: Money
    target_settlement_account: str


class IssuanceBridge(Protocol):
    """Rail-side counterpart of every mint and burn"""

    def mirror_mint(self, amount: Money, wallet_id: str) -> None:
        ...

    def mirror_burn(self, amount: Money, wallet_id: str) -> None:
        ...

    def waterfall_payout(self, amount: Money, linked_account: str, wallet_id: str) -> None:
        ...


class CoreLedger:
    """Central bank operated record of digital pound wallets"""

    def __init__(
        self,
        roles: Mapping[str, ParticipantRole],
        clock: SimClock,
        ids: IdSource,
        journal: Optional[Journal] = None,
        pending_credit_timeout: int = 100,
        waterfall_mode: str = 'waterfall',
        bridge: Optional[IssuanceBridge] = None,
    ):
        self.roles = roles
        self.clock = clock
        self.ids = ids
        self.journal = journal if journal is not None else Journal()
        self.pending_credit_timeout = pending_credit_timeout
        self.mode = HoldingLimitMode(waterfall_mode)
        self.bridge = bridge

        self.wallets: Dict[str, Wallet] = {}
        self.locks: Dict[str, LedgerLock] = {}
        self.pending: Dict[str, PendingCredit] = {}

    # Wallets

    def open_wallet(
        self,
        owner: str,
        managing_pip: str,
        holding_limit: Optional[Money] = None,
        technical: bool = False,
        linked_bank_account: Optional[str] = None,
    ) -> str:
        """
        Open an empty wallet

        Args:
            owner: Participant holding the funds
            managing_pip: PIP (or PIP lite / FMI) servicing the wallet
            holding_limit: Cap on resting balance, never set on technical wallets
            technical: Intermediary clearing wallet
            linked_bank_account: Account used by waterfall transfers

        Returns:
            New WalletId
        """
        if owner not in self.roles:
            raise UnknownParticipant(f"Unknown wallet owner {owner}")
        if self.roles.get(managing_pip) not in WALLET_MANAGER_ROLES:
            raise UnknownParticipant(f"{managing_pip} cannot manage wallets", managing_pip)
        if technical and holding_limit is not None:
            raise TechnicalWithLimit(f"Technical wallet for {owner} cannot carry a holding limit")

        wallet_id = self.ids.next_id(IdKind.WALLET)
        self.wallets[wallet_id] = Wallet(
            id=wallet_id,
            owner=owner,
            managing_pip=managing_pip,
            holding_limit=Money.of(holding_limit) if holding_limit is not None else None,
            technical=technical,
            linked_bank_account=linked_bank_account,
            requires_confirmation=not technical and self.roles[owner] == ParticipantRole.USER,
        )
        logger.debug("[OK] Opened wallet %s for %s via %s", wallet_id, owner, managing_pip)
        return wallet_id

    def genesis_credit(self, wallet_id: str, amount: Money):
        """Initial issuance recorded when a world is built"""
        wallet = self._wallet(wallet_id)
        amount = Money.of(amount)
        if not amount:
            return
        wallet.ledger_balance = wallet.ledger_balance + amount
        self.journal.record(self.clock.now, 'Mint', wallet_id, amount, 'genesis')

    def wallet(self, wallet_id: str) -> Wallet:
        return self._wallet(wallet_id)

    def lock_sum(self, wallet_id: str) -> Money:
        return money_sum(
            lock.amount for lock in self.locks.values()
            if lock.wallet == wallet_id and lock.state is LockState.ACTIVE
        )

    def available(self, wallet_id: str) -> Money:
        wallet = self._wallet(wallet_id)
        return wallet.ledger_balance - self.lock_sum(wallet_id)

    # Holding limits

    def enforce_holding_limit(self, wallet_id: str, incoming: Money,
                              mode: Optional[str] = None) -> HoldingLimitDecision:
        """
        Decide how much of an incoming credit a wallet may keep

        Returns:
            FullCredit, PartialWithWaterfall(excess) or Rejected
        """
        wallet = self._wallet(wallet_id)
        incoming = Money.of(incoming)
        limit_mode = HoldingLimitMode(mode) if mode else self.mode

        if wallet.technical or wallet.holding_limit is None:
            return HoldingLimitDecision(LimitOutcome.FULL_CREDIT, incoming, Money.zero())

        if wallet.holding_limit > wallet.ledger_balance:
            headroom = wallet.holding_limit - wallet.ledger_balance
        else:
            headroom = Money.zero()

        if incoming <= headroom:
            return HoldingLimitDecision(LimitOutcome.FULL_CREDIT, incoming, Money.zero())
        if limit_mode is HoldingLimitMode.REJECT:
            return HoldingLimitDecision(LimitOutcome.REJECTED, Money.zero(), incoming)
        if wallet.linked_bank_account is None:
            raise NoLinkedAccount(f"Wallet {wallet_id} has no linked account for waterfall")
        return HoldingLimitDecision(LimitOutcome.PARTIAL_WITH_WATERFALL, headroom, incoming - headroom)

    # Issuance and transfers

    def mint_to(self, wallet_id: str, amount: Money, funding_source: FundingSource,
                envelope_ref: Optional[str] = None) -> CreditOutcome:
        """
        Issue digital pounds funded by a rail-side payment

        User wallets get a pending credit awaiting their PIP; intermediary
        wallets are credited at once and their owner is notified.
        """
        wallet = self._wallet(wallet_id)
        amount = self._positive(amount)

        if wallet.requires_confirmation:
            pending = self._new_pending(wallet, amount, funding_source, envelope_ref)
            return CreditOutcome(wallet_id, amount, CreditState.AWAITING, pending_id=pending.id)

        outcome = self._complete_credit(wallet, amount, funding_source, None)
        outcome.notify_owner = True
        return outcome

    def transfer(
        self,
        from_wallet: str,
        to_wallet: str,
        amount: Money,
        by_pip: str,
        min_available_balance: Money = Money(0),
        envelope_ref: Optional[str] = None,
        return_to: Optional[str] = None,
    ) -> CreditOutcome:
        """
        Move funds between wallets

        The debit is reserved until the payee PIP confirms when the payee
        wallet belongs to a user; intermediary payees are credited at once.

        Args:
            from_wallet: Paying wallet
            to_wallet: Receiving wallet
            amount: Amount to move
            by_pip: PIP authorising the debit, must manage from_wallet
            min_available_balance: Floor the available balance must keep after the debit
            envelope_ref: Message carrying the instruction
            return_to: Rail account to refund if the credit is rejected
        """
        source = self._wallet(from_wallet)
        target = self._wallet(to_wallet)
        amount = self._positive(amount)
        if by_pip != source.managing_pip:
            raise Unauthorised(f"{by_pip} does not manage {from_wallet}", by_pip)
        self._check_debit(source, amount, Money.of(min_available_balance))

        funding = FundingSource('wallet', source.id, return_to)
        if target.requires_confirmation:
            lock_id = self.ids.next_id(IdKind.LOCK)
            self.locks[lock_id] = LedgerLock(
                id=lock_id,
                wallet=source.id,
                amount=amount,
                beneficiary=target.id,
                expiry=self.clock.now + self.pending_credit_timeout,
                purpose=LockPurpose.RESERVATION,
            )
            self.journal.record(self.clock.now, 'Reserved', source.id, amount, target.id)
            pending = self._new_pending(target, amount, funding, envelope_ref, reservation=lock_id)
            return CreditOutcome(to_wallet, amount, CreditState.AWAITING, pending_id=pending.id)

        outcome = self._complete_credit(target, amount, funding, None)
        outcome.notify_owner = True
        return outcome

    def confirm_credit(self, pending_id: str, by_pip: str, approve: bool = True,
                       reason: str = '') -> CreditOutcome:
        """
        Record the payee PIP's decision on a pending credit

        Args:
            pending_id: Pending credit awaiting confirmation
            by_pip: Deciding PIP, must manage the target wallet
            approve: Approve or reject
            reason: Rejection reason carried on the compensating return
        """
        pending = self.pending.get(pending_id)
        if pending is None:
            raise UnknownPendingCredit(f"No pending credit {pending_id}")
        target = self._wallet(pending.target_wallet)
        if by_pip != target.managing_pip:
            raise WrongPip(f"{by_pip} does not manage {target.id}", by_pip)
        if pending.state is not CreditState.AWAITING:
            raise AlreadyDecided(f"Pending credit {pending_id} is {pending.state.value}")

        if approve:
            return self._complete_credit(target, pending.amount, pending.source, pending)
        return self._reject(pending, reason or 'rejected by payee PIP')

    def expire_pending(self, now: Optional[int] = None) -> List[CreditOutcome]:
        """Reject credits whose PIP did not answer within the timeout"""
        now = self.clock.now if now is None else now
        outcomes = []
        for pending in list(self.pending.values()):
            if pending.state is not CreditState.AWAITING:
                continue
            if pending.created_tick + self.pending_credit_timeout < now:
                logger.warning("[WARN] Pending credit %s timed out", pending.id)
                outcomes.append(self._reject(pending, 'confirmation timeout'))
        return outcomes

    def burn_from(self, wallet_id: str, amount: Money, target_settlement_account: str,
                  by_pip: str, min_available_balance: Money = Money(0)) -> BurnOutcome:
        """Redeem digital pounds toward a settlement account on the rail"""
        wallet = self._wallet(wallet_id)
        amount = self._positive(amount)
        if by_pip != wallet.managing_pip:
            raise Unauthorised(f"{by_pip} does not manage {wallet_id}", by_pip)
        self._check_debit(wallet, amount, Money.of(min_available_balance))

        wallet.ledger_balance = wallet.ledger_balance - amount
        self.journal.record(self.clock.now, 'Burn', wallet_id, amount, target_settlement_account)
        if self.bridge is not None:
            self.bridge.mirror_burn(amount, wallet_id)
        return BurnOutcome(wallet_id, amount, target_settlement_account)

    # Funds locks

    def lock_funds(self, wallet_id: str, amount: Money, beneficiary: str, expiry: int,
                   by_pip: str, min_available_balance: Money = Money(0)) -> str:
        """
        Reserve funds for a beneficiary, leaving the ledger balance unchanged

        Returns:
            New LockId
        """
        wallet = self._wallet(wallet_id)
        amount = self._positive(amount)
        if by_pip != wallet.managing_pip:
            raise Unauthorised(f"{by_pip} does not manage {wallet_id}", by_pip)
        available = self.available(wallet_id).minor_units - Money.of(min_available_balance).minor_units
        if available < amount.minor_units:
            raise InsufficientAvailable(
                f"Lock of {amount} exceeds available {Money(max(available, 0))} on {wallet_id}",
                needed=amount.minor_units, available=max(available, 0),
            )

        lock_id = self.ids.next_id(IdKind.LOCK)
        self.locks[lock_id] = LedgerLock(lock_id, wallet_id, amount, beneficiary, expiry)
        self.journal.record(self.clock.now, 'LockPlaced', wallet_id, amount, beneficiary)
        logger.debug("[OK] Lock %s placed on %s for %s", lock_id, wallet_id, amount)
        return lock_id

    def release_and_pay(self, lock_id: str, by_pip: str,
                        via_wallet: Optional[str] = None) -> SettlementInstruction:
        """
        Release a lock and pay its amount toward the bound beneficiary

        The ledger balance drops by the lock amount while the available
        balance stays where it was. Funds go to via_wallet when given,
        otherwise they are burned toward the rail.
        """
        lock = self._active_lock(lock_id)
        wallet = self._wallet(lock.wallet)
        if by_pip != wallet.managing_pip:
            raise WrongPip(f"{by_pip} does not manage {wallet.id}", by_pip)
        via = self._wallet(via_wallet) if via_wallet else None

        lock.state = LockState.RELEASED
        self.journal.record(self.clock.now, 'LockReleased', wallet.id, lock.amount, lock.beneficiary)
        wallet.ledger_balance = wallet.ledger_balance - lock.amount
        if via is not None:
            via.ledger_balance = via.ledger_balance + lock.amount
            self.journal.record(self.clock.now, 'Transfer', wallet.id, lock.amount, via.id)
        else:
            self.journal.record(self.clock.now, 'Burn', wallet.id, lock.amount, lock.beneficiary)
            if self.bridge is not None:
                self.bridge.mirror_burn(lock.amount, wallet.id)

        return SettlementInstruction(lock.id, wallet.id, lock.beneficiary, lock.amount, via_wallet)

    def cancel_lock(self, lock_id: str, by_pip: str) -> LedgerLock:
        """Unlock funds when the order is abandoned"""
        lock = self._active_lock(lock_id)
        wallet = self._wallet(lock.wallet)
        if by_pip != wallet.managing_pip:
            raise WrongPip(f"{by_pip} does not manage {wallet.id}", by_pip)
        lock.state = LockState.CANCELLED
        self.journal.record(self.clock.now, 'LockCancelled', wallet.id, lock.amount, lock.beneficiary)
        return lock

    def expire_locks(self, now: Optional[int] = None) -> List[str]:
        """Expire every active lock whose expiry tick has passed (exclusive)"""
        now = self.clock.now if now is None else now
        expired = []
        for lock in self.locks.values():
            if lock.purpose is not LockPurpose.FUNDS_LOCK or lock.state is not LockState.ACTIVE:
                continue
            if lock.expiry < now:
                self._expire(lock)
                expired.append(lock.id)
        return expired

    # Audit

    def total_balance(self) -> Money:
        return money_sum(wallet.ledger_balance for wallet in self.wallets.values())

    def issued(self) -> int:
        """Mint minus burn over the journal, in pence"""
        minted = sum(e.amount.minor_units for e in self.journal if e.ledger == 'CBDC' and e.kind == 'Mint')
        burned = sum(e.amount.minor_units for e in self.journal if e.ledger == 'CBDC' and e.kind == 'Burn')
        return minted - burned

    def issuance_conserved(self) -> bool:
        return self.issued() == self.total_balance().minor_units

    # Internals

    def _wallet(self, wallet_id: Optional[str]) -> Wallet:
        wallet = self.wallets.get(wallet_id) if wallet_id else None
        if wallet is None:
            raise UnknownWallet(f"Unknown wallet {wallet_id}")
        return wallet

    @staticmethod
    def _positive(amount: Money) -> Money:
        amount = Money.of(amount)
        if not amount:
            raise InvalidAmount("Amount must be greater than zero")
        return amount

    def _check_debit(self, wallet: Wallet, amount: Money, min_available: Money):
        # ledger - amount - locks >= min_available
        needed = amount + self.lock_sum(wallet.id) + min_available
        if wallet.ledger_balance < needed:
            raise InsufficientAvailable(
                f"Debit of {amount} from {wallet.id} breaches available balance "
                f"(ledger {wallet.ledger_balance}, locks {self.lock_sum(wallet.id)}, min {min_available})",
                needed=needed.minor_units,
                available=wallet.ledger_balance.minor_units,
            )

    def _active_lock(self, lock_id: str) -> LedgerLock:
        lock = self.locks.get(lock_id)
        if lock is None or lock.purpose is not LockPurpose.FUNDS_LOCK:
            raise LockNotActive(f"No funds lock {lock_id}")
        if lock.state is LockState.ACTIVE and lock.expiry < self.clock.now:
            self._expire(lock)
        if lock.state is not LockState.ACTIVE:
            raise LockNotActive(f"Lock {lock_id} is {lock.state.value}")
        return lock

    def _expire(self, lock: LedgerLock):
        lock.state = LockState.EXPIRED
        self.journal.record(self.clock.now, 'LockExpired', lock.wallet, lock.amount, lock.beneficiary)
        logger.info("[WARN] Lock %s on %s expired", lock.id, lock.wallet)

    def _new_pending(self, wallet: Wallet, amount: Money, source: FundingSource,
                     envelope_ref: Optional[str], reservation: Optional[str] = None) -> PendingCredit:
        pending_id = self.ids.next_id(IdKind.PENDING_CREDIT)
        pending = PendingCredit(
            id=pending_id,
            target_wallet=wallet.id,
            amount=amount,
            source=source,
            envelope_ref=envelope_ref,
            created_tick=self.clock.now,
            reservation=reservation,
        )
        self.pending[pending_id] = pending
        return pending

    def _complete_credit(self, target: Wallet, amount: Money, source: FundingSource,
                         pending: Optional[PendingCredit]) -> CreditOutcome:
        decision = self.enforce_holding_limit(target.id, amount)
        if decision.outcome is LimitOutcome.REJECTED:
            if pending is None:
                raise HoldingLimitExceeded(f"Credit of {amount} breaches limit on {target.id}")
            return self._reject(pending, 'holding limit')

        credited, excess = decision.credit, decision.excess
        if source.kind == 'wallet':
            payer = self._wallet(source.ref)
            if pending is not None and pending.reservation:
                reservation = self.locks[pending.reservation]
                reservation.state = LockState.RELEASED
                self.journal.record(self.clock.now, 'ReservationReleased', payer.id, amount, target.id)
            payer.ledger_balance = payer.ledger_balance - amount
            target.ledger_balance = target.ledger_balance + credited
            if credited:
                self.journal.record(self.clock.now, 'Transfer', payer.id, credited, target.id)
            if excess:
                self.journal.record(self.clock.now, 'Burn', payer.id, excess, target.linked_bank_account)
                if self.bridge is not None:
                    self.bridge.mirror_burn(excess, payer.id)
        elif credited:
            if self.bridge is not None:
                self.bridge.mirror_mint(credited, target.id)
            target.ledger_balance = target.ledger_balance + credited
            self.journal.record(self.clock.now, 'Mint', target.id, credited, source.ref)

        waterfall = None
        if excess:
            waterfall = WaterfallInstruction(target.id, target.linked_bank_account, excess)
            logger.info("[OK] Waterfall %s from %s to %s", excess, target.id, target.linked_bank_account)
            if self.bridge is not None:
                self.bridge.waterfall_payout(excess, target.linked_bank_account, target.id)

        if pending is not None:
            pending.state = CreditState.COMPLETED
        return CreditOutcome(
            wallet=target.id,
            amount=amount,
            state=CreditState.COMPLETED,
            pending_id=pending.id if pending else None,
            credited=credited,
            waterfall=waterfall,
        )

    def _reject(self, pending: PendingCredit, reason: str) -> CreditOutcome:
        if pending.reservation:
            reservation = self.locks[pending.reservation]
            reservation.state = LockState.CANCELLED
            self.journal.record(self.clock.now, 'ReservationCancelled', reservation.wallet,
                                reservation.amount, pending.target_wallet)
        pending.state = CreditState.REJECTED
        pending.reason = reason
        logger.info("[REJECTED] Credit %s to %s: %s", pending.id, pending.target_wallet, reason)
        return CreditOutcome(
            wallet=pending.target_wallet,
            amount=pending.amount,
            state=CreditState.REJECTED,
            pending_id=pending.id,
            compensation=ReturnInstruction(pending.source, pending.amount, reason),
        )
