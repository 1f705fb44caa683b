"""
Participant operations on the standard world: confirmation of payee, requests and funds locks
"""

import pytest

from src.domain.errors import (
    ConsumerRejected,
    CoreDebitFailed,
    InsufficientAvailable,
    NotRegistered,
    RoutingError,
    ScenarioDeadlock,
    SchemeFailure,
    UnknownAlias,
)
from src.domain.model import Alias, DatumKind, ParticipantRole
from src.domain.money import Money
from src.engine.invariants import Snapshot, check_all, check_locks
from src.participants.confirmation_of_payee import COP_OPTIONS, confirm_payee
from src.participants.ecosystem import Ecosystem
from src.participants.funds_locking import bound_beneficiary, cancel_lock, lock_state, place_lock, release_and_settle
from src.participants.interop_settlement import settle_cbdc_to_cbm, settle_cbm_to_cbdc
from src.participants.payment_requests import request_to_lock, request_to_pay

CHILD = Alias.parse('07700900001')
CONSUMER = Alias.parse('07700900002')


def consumer_available(eco) -> int:
    wallet = eco.wallets['consumer_wallet']
    return eco.core.available(wallet).minor_units - eco.pip('consumer_pip').pip_lock_sum(wallet).minor_units


class TestDirectory:

    def test_alias_resolves_to_wallet_and_pip(self, eco):
        entry = eco.directory.alias_lookup(CHILD)
        assert entry.wallet == eco.wallets['child_wallet']
        assert entry.pip == 'payee_pip'

    def test_unknown_alias(self, eco):
        with pytest.raises(UnknownAlias):
            eco.directory.alias_lookup(Alias.parse('07700900999'))

    def test_registration_expires(self, eco):
        eco.registry.require('payer_bank', 'payee_pip', 500, 'cop')
        with pytest.raises(NotRegistered):
            eco.registry.require('payer_bank', 'payee_pip', 501, 'cop')

    def test_registration_is_directional(self, eco):
        with pytest.raises(NotRegistered):
            eco.registry.require('payee_pip', 'payer_bank', 0, 'cop')


class TestRouting:

    def test_receiver_must_admit_the_message_kind(self, eco):
        with pytest.raises(RoutingError):
            eco.send('consumer', 'alias_svc', 'CopRequest', 'U1.S1', {})


class TestConfirmationOfPayee:

    @pytest.mark.parametrize('option', COP_OPTIONS)
    def test_every_option_returns_the_payee_name(self, eco, option):
        result = confirm_payee(eco, option, 'payer_bank', CHILD)
        assert result.payee_name.value == 'Sam Child'
        assert result.wallet == eco.wallets['child_wallet']
        assert result.pip == 'payee_pip'

    def test_aggregator_never_reads_the_payee_name(self, eco):
        confirm_payee(eco, 'D2', 'payer_bank', CHILD)
        assert not eco.bus.exposures.exposed(ParticipantRole.TSP, DatumKind.NAME)

    def test_alias_provider_publishes_the_name(self, eco):
        confirm_payee(eco, 'D3', 'payer_bank', CHILD)
        assert eco.bus.exposures.exposed(ParticipantRole.TSP, DatumKind.NAME)

    def test_cbdc_route_is_sealed_by_default(self, eco):
        confirm_payee(eco, 'D4', 'payer_bank', CHILD)
        assert not eco.bus.exposures.central_bank_exposed()

    def test_cbdc_route_without_sealing_exposes_the_central_bank(self, world):
        eco = Ecosystem(world.with_settings(cbdc_sealing=False))
        confirm_payee(eco, 'D4', 'payer_bank', CHILD)
        assert eco.bus.exposures.central_bank_exposed('U1.S1')

    def test_direct_call_needs_a_registration(self, eco):
        with pytest.raises(NotRegistered):
            confirm_payee(eco, 'D1', 'consumer_bank', CHILD)

    def test_unknown_alias_fails_the_check(self, eco):
        with pytest.raises(UnknownAlias):
            confirm_payee(eco, 'D2', 'payer_bank', Alias.parse('07700900999'))


class TestRequests:

    @pytest.mark.parametrize('option', ['D1', 'D2', 'D3'])
    def test_request_to_pay_is_approved(self, eco, option):
        request = request_to_pay(eco, option, 'acquirer', 'merchant', CONSUMER, Money(4_000), 'order-1')
        assert request.consumer_wallet == eco.wallets['consumer_wallet']
        assert request.consumer_pip == 'consumer_pip'
        assert request.amount == Money(4_000)

    def test_consumer_can_decline(self, eco):
        eco.participant('consumer').decisions['authorise'] = False
        with pytest.raises(ConsumerRejected):
            request_to_pay(eco, 'D2', 'acquirer', 'merchant', CONSUMER, Money(4_000), 'order-1')

    def test_direct_request_after_registration_expiry(self, eco):
        eco.clock.advance_to(eco.settings.dcr_validity_ticks + 1)
        with pytest.raises(NotRegistered):
            request_to_pay(eco, 'D2', 'acquirer', 'merchant', CONSUMER, Money(4_000), 'order-1')

    def test_short_wallet_without_reverse_waterfall(self, world):
        eco = Ecosystem(world.with_settings(reverse_waterfall=False))
        with pytest.raises(InsufficientAvailable):
            request_to_pay(eco, 'D2', 'acquirer', 'merchant', CONSUMER, Money(30_000), 'order-1')


class TestSettlement:

    def test_payer_bank_arm_paying_its_own_customer(self, eco):
        wallet = eco.core.open_wallet('child', 'payer_bank_pip')
        outcome = settle_cbm_to_cbdc(eco, 'D2', eco.accounts['parent_account'], wallet, Money(1_000))
        assert outcome.completed
        assert eco.core.wallet(wallet).ledger_balance == Money(1_000)
        kinds = {record.envelope.kind for record in eco.bus.records if record.envelope is not None}
        assert 'PayerDetailsRequest' not in kinds

    @pytest.mark.parametrize('option', ['D2', 'D3', 'D4', 'D5'])
    def test_wallet_to_merchant_account(self, eco, option):
        opening = Snapshot.capture(eco)
        settle_cbdc_to_cbm(eco, option, eco.wallets['consumer_wallet'], eco.accounts['merchant_account'],
                           Money(4_000), acquirer='acquirer')
        assert eco.rail.balance(eco.accounts['merchant_account']) == Money(4_000)
        assert eco.core.wallet(eco.wallets['consumer_wallet']).ledger_balance == Money(16_000)
        eco.bus.record_step('eps.flush', eco.eps.flush)
        assert all(verdict.passed for verdict in check_all(eco, opening))

    @pytest.mark.parametrize('option', ['D1', 'D2', 'D3', 'D4'])
    def test_scheme_failure_refunds_the_consumer(self, eco, option):
        opening = Snapshot.capture(eco)
        eco.rail.fail_next_payment = True
        with pytest.raises(SchemeFailure):
            settle_cbdc_to_cbm(eco, option, eco.wallets['consumer_wallet'], eco.accounts['merchant_account'],
                               Money(4_000), acquirer='acquirer')
        assert eco.core.wallet(eco.wallets['consumer_wallet']).ledger_balance == Money(20_000)
        assert eco.rail.balance(eco.accounts['merchant_account']) == Money(0)
        assert all(verdict.passed for verdict in check_all(eco, opening))


class TestFundsLocks:

    @pytest.fixture
    def request_(self, eco):
        return request_to_lock(eco, 'D2', 'acquirer', 'merchant', CONSUMER, Money(3_000), 'order-1', expiry=200)

    @pytest.mark.parametrize('option', ['D1', 'D2', 'D3', 'D4', 'D5'])
    def test_lock_then_cancel_restores_the_consumer(self, eco, request_, option):
        opening = Snapshot.capture(eco)
        lock = place_lock(eco, option, request_, eco.accounts['merchant_account'])
        assert consumer_available(eco) == 17_000
        cancel_lock(eco, lock)
        assert consumer_available(eco) == 20_000
        assert lock_state(eco, lock) in ('Cancelled', 'Refunded')
        assert all(verdict.passed for verdict in check_all(eco, opening))

    def test_release_pays_the_merchant(self, eco, request_):
        merchant = eco.accounts['merchant_account']
        lock = place_lock(eco, 'D1', request_, merchant)
        release_and_settle(eco, 'D1', lock, 'D1')
        assert lock_state(eco, lock) == 'Released'
        assert eco.rail.balance(merchant) == Money(3_000)
        assert eco.core.wallet(eco.wallets['consumer_wallet']).ledger_balance == Money(17_000)

    def test_mismatched_release_and_settlement_deadlock(self, eco, request_):
        lock = place_lock(eco, 'D5', request_, eco.accounts['merchant_account'])
        with pytest.raises(ScenarioDeadlock):
            release_and_settle(eco, 'D2', lock, 'D4')

    @pytest.mark.parametrize('option', ['D1', 'D3', 'D5'])
    def test_beneficiary_is_bound_by_the_lock_holder(self, eco, request_, option):
        merchant = eco.accounts['merchant_account']
        lock = place_lock(eco, option, request_, merchant)
        # the acquirer-side copy is plain data and can be rewritten
        lock.beneficiary = eco.accounts['consumer_account']
        assert bound_beneficiary(eco, lock) == merchant

    def test_swapped_copy_does_not_divert_the_release(self, eco, request_):
        merchant, consumer = eco.accounts['merchant_account'], eco.accounts['consumer_account']
        lock = place_lock(eco, 'D1', request_, merchant)
        lock.beneficiary = consumer
        release_and_settle(eco, 'D1', lock, 'D1')
        assert eco.rail.balance(merchant) == Money(3_000)
        assert eco.rail.balance(consumer) == Money(200_000)

    @pytest.mark.parametrize('option', ['D1', 'D2', 'D3', 'D4', 'D5'])
    def test_pip_lock_holds_against_a_wallet_payment(self, eco, request_, option):
        opening = Snapshot.capture(eco)
        merchant = eco.accounts['merchant_account']
        place_lock(eco, 'D3', request_, merchant)
        with pytest.raises((InsufficientAvailable, CoreDebitFailed)):
            settle_cbdc_to_cbm(eco, option, eco.wallets['consumer_wallet'], merchant, Money(19_000),
                               acquirer='acquirer')
        assert eco.core.wallet(eco.wallets['consumer_wallet']).ledger_balance == Money(20_000)
        assert eco.rail.balance(merchant) == Money(0)
        assert consumer_available(eco) == 17_000
        assert check_locks(eco, opening).passed

    def test_payment_within_the_unlocked_balance_settles(self, eco, request_):
        opening = Snapshot.capture(eco)
        merchant = eco.accounts['merchant_account']
        place_lock(eco, 'D3', request_, merchant)
        settle_cbdc_to_cbm(eco, 'D4', eco.wallets['consumer_wallet'], merchant, Money(17_000), acquirer='acquirer')
        assert consumer_available(eco) == 0
        assert check_locks(eco, opening).passed
