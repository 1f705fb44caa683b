"""
Core ledger: wallets, two-phase credits, holding limits and funds locks
"""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.stateful import RuleBasedStateMachine, initialize, invariant, precondition, rule

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
    UnknownWallet,
    WrongPip,
)
from src.domain.ids import IdSource
from src.domain.money import Money
from src.domain.model import ParticipantRole
from src.ledger.core_ledger import CoreLedger, CreditState, FundingSource, LimitOutcome, LockState

ROLES = {
    'pip': ParticipantRole.PIP,
    'fmi': ParticipantRole.FMI,
    'alice': ParticipantRole.USER,
    'bob': ParticipantRole.USER,
}

RAIL = FundingSource('rail', 'A-0001', 'A-0002')


class TestWallets:

    def test_open_wallet(self, core):
        wid = core.open_wallet('alice', 'pip', holding_limit=Money(10_000))
        wallet = core.wallet(wid)
        assert wallet.owner == 'alice'
        assert wallet.ledger_balance == Money(0)
        assert wallet.requires_confirmation

    def test_intermediary_wallets_need_no_confirmation(self, core):
        wid = core.open_wallet('pip', 'pip', technical=True)
        assert not core.wallet(wid).requires_confirmation

    def test_unknown_owner(self, core):
        with pytest.raises(UnknownParticipant):
            core.open_wallet('mallory', 'pip')

    def test_banks_cannot_manage_wallets(self, core):
        with pytest.raises(UnknownParticipant):
            core.open_wallet('alice', 'bank')

    def test_technical_wallet_cannot_have_a_limit(self, core):
        with pytest.raises(TechnicalWithLimit):
            core.open_wallet('fmi', 'fmi', holding_limit=Money(100), technical=True)

    def test_unknown_wallet(self, core):
        with pytest.raises(UnknownWallet):
            core.wallet('W-9999')


class TestTransfers:

    @pytest.fixture
    def wallets(self, core):
        alice = core.open_wallet('alice', 'pip')
        bob = core.open_wallet('bob', 'other_pip', holding_limit=Money(10_000), linked_bank_account='A-0009')
        desk = core.open_wallet('pip', 'pip', technical=True)
        core.genesis_credit(alice, Money(5_000))
        return alice, bob, desk

    def test_transfer_to_user_waits_for_the_payee_pip(self, core, wallets):
        alice, bob, _ = wallets
        outcome = core.transfer(alice, bob, Money(1_000), by_pip='pip')
        assert outcome.state is CreditState.AWAITING
        # reserved, not yet debited
        assert core.wallet(alice).ledger_balance == Money(5_000)
        assert core.available(alice) == Money(4_000)

        done = core.confirm_credit(outcome.pending_id, by_pip='other_pip')
        assert done.state is CreditState.COMPLETED
        assert core.wallet(alice).ledger_balance == Money(4_000)
        assert core.wallet(bob).ledger_balance == Money(1_000)
        assert core.available(alice) == Money(4_000)
        assert core.issuance_conserved()

    def test_rejected_credit_cancels_the_reservation(self, core, wallets):
        alice, bob, _ = wallets
        outcome = core.transfer(alice, bob, Money(1_000), by_pip='pip')
        rejected = core.confirm_credit(outcome.pending_id, by_pip='other_pip', approve=False, reason='compliance')
        assert rejected.state is CreditState.REJECTED
        assert rejected.compensation.reason == 'compliance'
        assert core.available(alice) == Money(5_000)
        assert core.wallet(bob).ledger_balance == Money(0)

    def test_only_the_payee_pip_decides(self, core, wallets):
        alice, bob, _ = wallets
        outcome = core.transfer(alice, bob, Money(1_000), by_pip='pip')
        with pytest.raises(WrongPip):
            core.confirm_credit(outcome.pending_id, by_pip='pip')

    def test_a_decision_is_final(self, core, wallets):
        alice, bob, _ = wallets
        outcome = core.transfer(alice, bob, Money(1_000), by_pip='pip')
        core.confirm_credit(outcome.pending_id, by_pip='other_pip')
        with pytest.raises(AlreadyDecided):
            core.confirm_credit(outcome.pending_id, by_pip='other_pip', approve=False)

    def test_unanswered_credit_expires_after_the_timeout(self, core, wallets):
        alice, bob, _ = wallets
        outcome = core.transfer(alice, bob, Money(1_000), by_pip='pip')
        core.clock.advance_to(100)
        assert core.expire_pending() == []
        core.clock.advance_to(101)
        expired = core.expire_pending()
        assert [o.pending_id for o in expired] == [outcome.pending_id]
        assert core.pending[outcome.pending_id].state is CreditState.REJECTED
        assert core.available(alice) == Money(5_000)

    def test_debit_needs_the_managing_pip(self, core, wallets):
        alice, _, desk = wallets
        with pytest.raises(Unauthorised):
            core.transfer(alice, desk, Money(1), by_pip='other_pip')

    def test_min_available_balance_is_honoured(self, core, wallets):
        alice, _, desk = wallets
        with pytest.raises(InsufficientAvailable):
            core.transfer(alice, desk, Money(3_000), by_pip='pip', min_available_balance=Money(2_001))
        core.transfer(alice, desk, Money(3_000), by_pip='pip', min_available_balance=Money(2_000))
        assert core.wallet(alice).ledger_balance == Money(2_000)

    def test_zero_amount_is_rejected(self, core, wallets):
        alice, _, desk = wallets
        with pytest.raises(InvalidAmount):
            core.transfer(alice, desk, Money(0), by_pip='pip')

    def test_mint_to_a_user_wallet_is_pending(self, core, wallets):
        _, bob, _ = wallets
        outcome = core.mint_to(bob, Money(500), RAIL)
        assert outcome.state is CreditState.AWAITING
        core.confirm_credit(outcome.pending_id, by_pip='other_pip')
        assert core.wallet(bob).ledger_balance == Money(500)
        assert core.issued() == 5_500

    def test_burn(self, core, wallets):
        alice, _, _ = wallets
        core.burn_from(alice, Money(2_000), 'A-0001', by_pip='pip')
        assert core.wallet(alice).ledger_balance == Money(3_000)
        assert core.issuance_conserved()


class TestHoldingLimits:

    @pytest.fixture
    def capped(self, core):
        wid = core.open_wallet('bob', 'pip', holding_limit=Money(10_000), linked_bank_account='A-0009')
        core.genesis_credit(wid, Money(8_000))
        return wid

    def test_within_headroom(self, core, capped):
        decision = core.enforce_holding_limit(capped, Money(2_000))
        assert decision.outcome is LimitOutcome.FULL_CREDIT

    def test_waterfall_splits_the_excess(self, core, capped):
        decision = core.enforce_holding_limit(capped, Money(5_000))
        assert decision.outcome is LimitOutcome.PARTIAL_WITH_WATERFALL
        assert decision.credit == Money(2_000)
        assert decision.excess == Money(3_000)

    def test_reject_mode(self, core, capped):
        decision = core.enforce_holding_limit(capped, Money(5_000), mode='reject')
        assert decision.outcome is LimitOutcome.REJECTED
        assert decision.credit == Money(0)

    def test_waterfall_needs_a_linked_account(self, core):
        wid = core.open_wallet('alice', 'pip', holding_limit=Money(100))
        with pytest.raises(NoLinkedAccount):
            core.enforce_holding_limit(wid, Money(500))

    def test_waterfall_credit_keeps_the_wallet_at_its_limit(self, core, capped):
        outcome = core.mint_to(capped, Money(5_000), RAIL)
        done = core.confirm_credit(outcome.pending_id, by_pip='pip')
        assert done.credited == Money(2_000)
        assert done.waterfall.amount == Money(3_000)
        assert core.wallet(capped).ledger_balance == Money(10_000)

    def test_intermediary_credit_over_the_limit_raises_in_reject_mode(self):
        core = CoreLedger(ROLES, SimClock(), IdSource(), waterfall_mode='reject')
        source = core.open_wallet('pip', 'pip', technical=True)
        # a non-user capped wallet is credited immediately, so rejection surfaces as an error
        capped = core.open_wallet('fmi', 'fmi', holding_limit=Money(100))
        core.genesis_credit(source, Money(1_000))
        with pytest.raises(HoldingLimitExceeded):
            core.transfer(source, capped, Money(500), by_pip='pip')

    @settings(max_examples=300, deadline=None)
    @given(
        limit=st.integers(1, 50_000),
        opening=st.integers(0, 50_000),
        first=st.integers(1, 30_000),
        second=st.integers(1, 30_000),
        swap=st.booleans(),
        mode=st.sampled_from(['waterfall', 'reject']),
    )
    def test_two_credits_racing_for_headroom(self, limit, opening, first, second, swap, mode):
        core = CoreLedger(ROLES, SimClock(), IdSource(), waterfall_mode=mode)
        wid = core.open_wallet('bob', 'pip', holding_limit=Money(limit), linked_bank_account='A-0009')
        core.genesis_credit(wid, Money(opening))
        a = core.mint_to(wid, Money(first), RAIL)
        b = core.mint_to(wid, Money(second), RAIL)
        order = [b, a] if swap else [a, b]
        outcomes = [core.confirm_credit(o.pending_id, by_pip='pip') for o in order]

        balance = core.wallet(wid).ledger_balance.minor_units
        assert balance <= max(limit, opening)
        credited = sum(o.credited.minor_units for o in outcomes if o.state is CreditState.COMPLETED)
        assert balance == opening + credited
        if mode == 'waterfall':
            headroom = max(limit - opening, 0)
            # interleaving order never changes how much the wallet keeps
            assert credited == min(first + second, headroom)
            spilled = sum(o.waterfall.amount.minor_units for o in outcomes if o.waterfall)
            assert credited + spilled == first + second
        assert core.issuance_conserved()


class TestLocks:

    @pytest.fixture
    def funded(self, core):
        wid = core.open_wallet('alice', 'pip')
        core.genesis_credit(wid, Money(5_000))
        return wid

    def test_lock_reduces_available_not_ledger(self, core, funded):
        core.lock_funds(funded, Money(3_000), 'A-0005', expiry=10, by_pip='pip')
        assert core.wallet(funded).ledger_balance == Money(5_000)
        assert core.available(funded) == Money(2_000)

    def test_lock_beyond_available(self, core, funded):
        core.lock_funds(funded, Money(3_000), 'A-0005', expiry=10, by_pip='pip')
        with pytest.raises(InsufficientAvailable) as info:
            core.lock_funds(funded, Money(2_500), 'A-0005', expiry=10, by_pip='pip')
        assert info.value.available == 2_000

    def test_release_debits_ledger_and_leaves_available(self, core, funded):
        lock = core.lock_funds(funded, Money(3_000), 'A-0005', expiry=10, by_pip='pip')
        instruction = core.release_and_pay(lock, by_pip='pip')
        assert instruction.beneficiary == 'A-0005'
        assert core.wallet(funded).ledger_balance == Money(2_000)
        assert core.available(funded) == Money(2_000)
        assert core.locks[lock].state is LockState.RELEASED

    def test_cancel_restores_available(self, core, funded):
        lock = core.lock_funds(funded, Money(3_000), 'A-0005', expiry=10, by_pip='pip')
        core.cancel_lock(lock, by_pip='pip')
        assert core.available(funded) == Money(5_000)
        with pytest.raises(LockNotActive):
            core.release_and_pay(lock, by_pip='pip')

    def test_expiry_is_exclusive(self, core, funded):
        lock = core.lock_funds(funded, Money(3_000), 'A-0005', expiry=10, by_pip='pip')
        core.clock.advance_to(10)
        assert core.expire_locks() == []
        core.clock.advance_to(11)
        assert core.expire_locks() == [lock]
        assert core.available(funded) == Money(5_000)

    def test_stale_lock_cannot_be_released(self, core, funded):
        lock = core.lock_funds(funded, Money(3_000), 'A-0005', expiry=10, by_pip='pip')
        core.clock.advance_to(11)
        with pytest.raises(LockNotActive):
            core.release_and_pay(lock, by_pip='pip')
        assert core.locks[lock].state is LockState.EXPIRED

    def test_only_the_managing_pip_releases(self, core, funded):
        lock = core.lock_funds(funded, Money(3_000), 'A-0005', expiry=10, by_pip='pip')
        with pytest.raises(WrongPip):
            core.release_and_pay(lock, by_pip='other_pip')

    def test_payment_cannot_spend_locked_funds(self, core, funded):
        desk = core.open_wallet('pip', 'pip', technical=True)
        core.lock_funds(funded, Money(3_000), 'A-0005', expiry=10, by_pip='pip')
        with pytest.raises(InsufficientAvailable):
            core.transfer(funded, desk, Money(2_001), by_pip='pip')


OPENING = 10_000


class LockMachine(RuleBasedStateMachine):
    """Random lock, release, cancel, pay and expiry interleavings against a plain model"""

    @initialize()
    def setup(self):
        self.core = CoreLedger(ROLES, SimClock(), IdSource())
        self.wallet = self.core.open_wallet('alice', 'pip')
        self.desk = self.core.open_wallet('pip', 'pip', technical=True)
        self.core.genesis_credit(self.wallet, Money(OPENING))
        self.ledger = OPENING
        self.active = {}
        self.closed = []

    @property
    def model_available(self) -> int:
        return self.ledger - sum(self.active.values())

    @rule(amount=st.integers(1, 4_000), ttl=st.integers(0, 8))
    def place(self, amount, ttl):
        expiry = self.core.clock.now + ttl
        if amount > self.model_available:
            with pytest.raises(InsufficientAvailable):
                self.core.lock_funds(self.wallet, Money(amount), 'A-0005', expiry, by_pip='pip')
            return
        lock = self.core.lock_funds(self.wallet, Money(amount), 'A-0005', expiry, by_pip='pip')
        self.active[lock] = amount

    @precondition(lambda self: self.active)
    @rule(data=st.data(), to_desk=st.booleans())
    def release(self, data, to_desk):
        lock = data.draw(st.sampled_from(sorted(self.active)))
        before = self.core.available(self.wallet)
        self.core.release_and_pay(lock, by_pip='pip', via_wallet=self.desk if to_desk else None)
        assert self.core.available(self.wallet) == before
        self.ledger -= self.active.pop(lock)
        self.closed.append(lock)

    @precondition(lambda self: self.active)
    @rule(data=st.data())
    def cancel(self, data):
        lock = data.draw(st.sampled_from(sorted(self.active)))
        self.core.cancel_lock(lock, by_pip='pip')
        del self.active[lock]
        self.closed.append(lock)

    @precondition(lambda self: self.closed)
    @rule(data=st.data())
    def reuse_closed(self, data):
        lock = data.draw(st.sampled_from(self.closed))
        with pytest.raises(LockNotActive):
            self.core.release_and_pay(lock, by_pip='pip')

    @rule(amount=st.integers(1, 4_000))
    def pay(self, amount):
        if amount > self.model_available:
            with pytest.raises(InsufficientAvailable):
                self.core.transfer(self.wallet, self.desk, Money(amount), by_pip='pip')
            return
        self.core.transfer(self.wallet, self.desk, Money(amount), by_pip='pip')
        self.ledger -= amount

    @rule(ticks=st.integers(0, 5))
    def advance(self, ticks):
        now = self.core.clock.advance(ticks)
        expired = set(self.core.expire_locks())
        due = {lock for lock in self.active if self.core.locks[lock].expiry < now}
        assert expired == due
        for lock in due:
            del self.active[lock]
            self.closed.append(lock)

    @invariant()
    def available_is_ledger_minus_active_locks(self):
        assert self.core.wallet(self.wallet).ledger_balance.minor_units == self.ledger
        assert self.core.available(self.wallet).minor_units == self.model_available
        assert self.model_available >= 0

    @invariant()
    def closed_locks_stay_closed(self):
        for lock in self.closed:
            assert self.core.locks[lock].state is not LockState.ACTIVE

    @invariant()
    def value_is_conserved(self):
        assert self.core.issuance_conserved()


LockMachine.TestCase.settings = settings(max_examples=1000, stateful_step_count=20, deadline=None)
TestLockMachine = LockMachine.TestCase
