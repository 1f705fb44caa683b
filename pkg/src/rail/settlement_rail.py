"""
Settlement Rail
RTGS settlement accounts, bank customer accounts and an FPS-like instant payment scheme
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Set, Union

from src.domain.clock import SimClock
from src.domain.errors import (
    DuplicateInstruction,
    InsufficientFunds,
    InsufficientSettlementFunds,
    RtgsClosed,
    SchemeFailure,
    SponsorNotDcsp,
    UnknownAccount,
    UnknownDestination,
)
from src.domain.ids import IdKind, IdSource
from src.domain.money import Money, money_sum
from src.ledger.journal import Journal

logger = logging.getLogger(__name__)


class FpsParticipation(Enum):
    DCSP = 'DCSP'
    DCNSP = 'DCNSP'


@dataclass
class SettlementAccount:
    """Reserve/settlement account on the RTGS ledger"""

    id: str
    holder: str
    sort_code: str
    number: str
    balance: Money = Money(0)
    fps_reachable: bool = True

    @property
    def address(self) -> str:
        return f"{self.sort_code}-{self.number}"


@dataclass
class BankCustomerAccount:
    """Commercial bank money held by a customer"""

    id: str
    bank: str
    owner: str
    sort_code: str
    number: str
    balance: Money = Money(0)

    @property
    def address(self) -> str:
        return f"{self.sort_code}-{self.number}"


Account = Union[SettlementAccount, BankCustomerAccount]


@dataclass(frozen=True)
class FpsRegistration:
    participant: str
    kind: FpsParticipation
    sort_code: str
    sponsor: Optional[str] = None


@dataclass(frozen=True)
class FpsInstruction:
    """Instant payment instruction; remittance may carry a wallet identifier"""

    id: str
    from_account: str
    to_sort_code_account: str
    amount: Money
    remittance: Optional[str] = None


@dataclass(frozen=True)
class FpsResult:
    instruction_id: str
    cleared: bool
    credited_account: Optional[str] = None
    notify: Optional[str] = None
    reason: str = ''


class SettlementRail:
    """RTGS ledger plus the FPS scheme that settles across it"""

    def __init__(self, clock: SimClock, ids: IdSource, journal: Optional[Journal] = None,
                 rtgs_open: bool = True):
        self.clock = clock
        self.ids = ids
        self.journal = journal if journal is not None else Journal('RTGS')
        self.rtgs_open = rtgs_open

        self.settlement_accounts: Dict[str, SettlementAccount] = {}
        self.customer_accounts: Dict[str, BankCustomerAccount] = {}
        self.registrations: Dict[str, FpsRegistration] = {}
        self._sort_codes: Dict[str, FpsRegistration] = {}
        self._addresses: Dict[str, str] = {}
        self._submitted: Set[str] = set()
        self.fail_next_payment = False

    # Accounts

    def open_settlement_account(self, holder: str, sort_code: str, number: str,
                                balance: Money = Money(0), fps_reachable: bool = True) -> str:
        account_id = self.ids.next_id(IdKind.ACCOUNT)
        account = SettlementAccount(account_id, holder, sort_code, number, Money.of(balance), fps_reachable)
        self.settlement_accounts[account_id] = account
        self._addresses[account.address] = account_id
        if account.balance:
            self.journal.record(self.clock.now, 'Open', account_id, account.balance, holder, 'RTGS')
        return account_id

    def open_customer_account(self, bank: str, owner: str, sort_code: str, number: str,
                              balance: Money = Money(0)) -> str:
        account_id = self.ids.next_id(IdKind.ACCOUNT)
        account = BankCustomerAccount(account_id, bank, owner, sort_code, number, Money.of(balance))
        self.customer_accounts[account_id] = account
        self._addresses[account.address] = account_id
        if account.balance:
            self.journal.record(self.clock.now, 'Open', account_id, account.balance, owner, 'BANK')
        return account_id

    def account(self, account_id: str) -> Account:
        account = self.settlement_accounts.get(account_id) or self.customer_accounts.get(account_id)
        if account is None:
            raise UnknownAccount(f"Unknown account {account_id}")
        return account

    def address_of(self, account_id: str) -> str:
        return self.account(account_id).address

    def resolve_address(self, address: str) -> Optional[str]:
        return self._addresses.get(address)

    def settlement_account_of(self, participant: str) -> SettlementAccount:
        """Settlement account a participant settles through (sponsor's for a DCNSP)"""
        registration = self.registrations.get(participant)
        if registration is not None and registration.kind is FpsParticipation.DCNSP:
            participant = registration.sponsor
        for account in self.settlement_accounts.values():
            if account.holder == participant:
                return account
        raise UnknownAccount(f"{participant} has no settlement account")

    def balance(self, account_id: str) -> Money:
        return self.account(account_id).balance

    # FPS scheme

    def register_fps_participant(self, participant: str, kind: FpsParticipation, sort_code: str,
                                 sponsor: Optional[str] = None) -> FpsRegistration:
        """
        Make a participant reachable by sort code

        Args:
            participant: Joining participant
            kind: DCSP settles on its own account, DCNSP through a sponsor
            sort_code: Six-digit sort code
            sponsor: DCSP sponsoring a DCNSP
        """
        if kind is FpsParticipation.DCNSP:
            sponsor_registration = self.registrations.get(sponsor) if sponsor else None
            if sponsor_registration is None or sponsor_registration.kind is not FpsParticipation.DCSP:
                raise SponsorNotDcsp(f"Sponsor {sponsor} of {participant} is not a DCSP", participant)
        registration = FpsRegistration(participant, kind, sort_code, sponsor)
        self.registrations[participant] = registration
        self._sort_codes[sort_code] = registration
        logger.debug("[OK] %s registered with FPS as %s (%s)", participant, kind.value, sort_code)
        return registration

    def fps_pay(self, instr: FpsInstruction) -> FpsResult:
        """
        Clear an instant payment and settle it gross across RTGS

        Only cleared instructions count as submitted, a rejected one may be sent again.

        Raises:
            DuplicateInstruction, UnknownDestination, InsufficientFunds, SchemeFailure
        """
        if instr.id in self._submitted:
            raise DuplicateInstruction(f"Instruction {instr.id} already submitted")
        amount = Money.of(instr.amount)

        source = self.account(instr.from_account)
        dest_id = self._addresses.get(instr.to_sort_code_account)
        registration = self._sort_codes.get(instr.to_sort_code_account[:6])
        if dest_id is None or registration is None:
            raise UnknownDestination(f"No FPS destination {instr.to_sort_code_account}")
        dest = self.account(dest_id)

        if self.fail_next_payment:
            self.fail_next_payment = False
            logger.warning("[ERROR] FPS rejected instruction %s", instr.id)
            raise SchemeFailure(f"Payment scheme rejected {instr.id}")

        source_settlement = self._settles_through(source)
        dest_settlement = self._settles_through(dest)
        if source.balance < amount:
            raise InsufficientFunds(f"Account {source.id} holds {source.balance}, needs {amount}")
        if source_settlement is not source and source_settlement is not dest_settlement \
                and source_settlement.balance < amount:
            raise InsufficientFunds(f"Settlement account {source_settlement.id} short of {amount}")

        self._submitted.add(instr.id)
        now = self.clock.now
        self.journal.record(now, 'Cleared', instr.id, amount, instr.to_sort_code_account, 'FPS')
        if isinstance(source, BankCustomerAccount):
            source.balance = source.balance - amount
            self.journal.record(now, 'Debit', source.id, amount, instr.id, 'BANK')
        if source_settlement is not dest_settlement:
            source_settlement.balance = source_settlement.balance - amount
            dest_settlement.balance = dest_settlement.balance + amount
            self.journal.record(now, 'Transfer', source_settlement.id, amount, dest_settlement.id, 'RTGS')
        if isinstance(dest, BankCustomerAccount):
            dest.balance = dest.balance + amount
            self.journal.record(now, 'Credit', dest.id, amount, instr.id, 'BANK')

        logger.debug("[OK] FPS %s cleared %s to %s", instr.id, amount, dest.id)
        return FpsResult(instr.id, True, credited_account=dest.id, notify=registration.participant)

    def new_instruction(self, from_account: str, to_account: str, amount: Money,
                        remittance: Optional[str] = None) -> FpsInstruction:
        """Build an instruction addressed to an account id"""
        return FpsInstruction(
            id=self.ids.next_id(IdKind.INSTRUCTION),
            from_account=from_account,
            to_sort_code_account=self.address_of(to_account),
            amount=Money.of(amount),
            remittance=remittance,
        )

    # RTGS

    def rtgs_transfer(self, from_account: str, to_account: str, amount: Money) -> bool:
        """Immediate gross transfer between settlement accounts"""
        amount = Money.of(amount)
        source = self.settlement_accounts.get(from_account)
        dest = self.settlement_accounts.get(to_account)
        if source is None or dest is None:
            raise UnknownAccount(f"RTGS transfer needs settlement accounts: {from_account} -> {to_account}")
        if not amount:
            return True
        if not self.rtgs_open:
            raise RtgsClosed("RTGS is closed")
        if source.balance < amount:
            raise InsufficientFunds(f"Settlement account {from_account} holds {source.balance}, needs {amount}")
        source.balance = source.balance - amount
        dest.balance = dest.balance + amount
        self.journal.record(self.clock.now, 'Transfer', from_account, amount, to_account, 'RTGS')
        return True

    def apply_net_positions(self, positions: Dict[str, int], batch_id: str):
        """
        Apply signed net positions (participant -> pence) in one step

        Raises:
            RtgsClosed, InsufficientSettlementFunds: nothing is applied
        """
        if not self.rtgs_open:
            raise RtgsClosed("RTGS is closed; batch stays unsettled")
        accounts = {p: self.settlement_account_of(p) for p in positions}
        for participant, net in sorted(positions.items()):
            if net < 0 and accounts[participant].balance.minor_units < -net:
                raise InsufficientSettlementFunds(
                    f"{participant} short of {-net} for batch {batch_id}", participant)
        for participant, net in sorted(positions.items()):
            account = accounts[participant]
            if net < 0:
                account.balance = account.balance - Money(-net)
                self.journal.record(self.clock.now, 'NetDebit', account.id, Money(-net), batch_id, 'RTGS')
            elif net > 0:
                account.balance = account.balance + Money(net)
                self.journal.record(self.clock.now, 'NetCredit', account.id, Money(net), batch_id, 'RTGS')

    # Book entries used by deferred settlement

    def debit_customer(self, account_id: str, amount: Money, ref: str):
        account = self.customer_accounts.get(account_id)
        if account is None:
            raise UnknownAccount(f"Unknown customer account {account_id}")
        amount = Money.of(amount)
        if account.balance < amount:
            raise InsufficientFunds(f"Account {account_id} holds {account.balance}, needs {amount}")
        account.balance = account.balance - amount
        self.journal.record(self.clock.now, 'Debit', account_id, amount, ref, 'BANK')

    def credit_customer(self, account_id: str, amount: Money, ref: str):
        account = self.customer_accounts.get(account_id)
        if account is None:
            raise UnknownAccount(f"Unknown customer account {account_id}")
        account.balance = account.balance + Money.of(amount)
        self.journal.record(self.clock.now, 'Credit', account_id, Money.of(amount), ref, 'BANK')

    def debit_settlement(self, account_id: str, amount: Money, ref: str):
        account = self.settlement_accounts.get(account_id)
        if account is None:
            raise UnknownAccount(f"Unknown settlement account {account_id}")
        amount = Money.of(amount)
        if account.balance < amount:
            raise InsufficientSettlementFunds(
                f"Settlement account {account_id} holds {account.balance}, needs {amount}", account.holder)
        account.balance = account.balance - amount
        self.journal.record(self.clock.now, 'Debit', account_id, amount, ref, 'RTGS')

    def credit_settlement(self, account_id: str, amount: Money, ref: str):
        account = self.settlement_accounts.get(account_id)
        if account is None:
            raise UnknownAccount(f"Unknown settlement account {account_id}")
        account.balance = account.balance + Money.of(amount)
        self.journal.record(self.clock.now, 'Credit', account_id, Money.of(amount), ref, 'RTGS')

    # Audit

    def total_settlement(self) -> Money:
        return money_sum(a.balance for a in self.settlement_accounts.values())

    def total_customer(self) -> Money:
        return money_sum(a.balance for a in self.customer_accounts.values())

    def accounts_of(self, participant: str) -> List[str]:
        owned = [a.id for a in self.settlement_accounts.values() if a.holder == participant]
        owned += [a.id for a in self.customer_accounts.values() if a.owner == participant]
        return owned

    def _settles_through(self, account: Account) -> SettlementAccount:
        if isinstance(account, SettlementAccount):
            return account
        return self.settlement_account_of(account.bank)


class BackingAccountBridge:
    """Mirrors core-ledger issuance against the central bank's digital pound settlement account"""

    def __init__(self, rail: SettlementRail, backing_account: str):
        self.rail = rail
        self.backing_account = backing_account

    def mirror_mint(self, amount: Money, wallet_id: str):
        self.rail.debit_settlement(self.backing_account, amount, wallet_id)

    def mirror_burn(self, amount: Money, wallet_id: str):
        self.rail.credit_settlement(self.backing_account, amount, wallet_id)

    def waterfall_payout(self, amount: Money, linked_account: str, wallet_id: str):
        instruction = self.rail.new_instruction(self.backing_account, linked_account, amount, wallet_id)
        self.rail.fps_pay(instruction)
