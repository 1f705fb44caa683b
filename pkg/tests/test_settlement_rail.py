"""
Settlement rail: FPS clearing, RTGS, deferred net settlement and the enhanced payment system
"""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.domain.clock import SimClock
from src.domain.errors import (
    CoreDebitFailed,
    DuplicateInstruction,
    InsufficientFunds,
    InsufficientSettlementFunds,
    NotOnboarded,
    RtgsClosed,
    SchemeFailure,
    SponsorNotDcsp,
    UnknownDestination,
)
from src.domain.ids import IdSource
from src.domain.model import ParticipantRole
from src.domain.money import Money
from src.engine.workloads import check_netting, gross_oracle, settle_netted
from src.ledger.core_ledger import CoreLedger, CreditState
from src.rail.enhanced_payments import EnhancedPaymentSystem, EpsDirection
from src.rail.netting import BatchState, NetSettlementBatch, Obligation, settle_batch
from src.rail.settlement_rail import BackingAccountBridge, FpsParticipation, SettlementRail


@pytest.fixture
def network():
    rail = SettlementRail(SimClock(), IdSource())
    acc = {
        'a_settle': rail.open_settlement_account('bank_a', '200000', '00000001', Money(10_000)),
        'b_settle': rail.open_settlement_account('bank_b', '300000', '00000001', Money(10_000)),
        'alice': rail.open_customer_account('bank_a', 'alice', '200000', '10000001', Money(5_000)),
        'bob': rail.open_customer_account('bank_b', 'bob', '300000', '10000002'),
        'pip_x': rail.open_customer_account('bank_b', 'pip_x', '310000', '00000001'),
    }
    rail.register_fps_participant('bank_a', FpsParticipation.DCSP, '200000')
    rail.register_fps_participant('bank_b', FpsParticipation.DCSP, '300000')
    rail.register_fps_participant('pip_x', FpsParticipation.DCNSP, '310000', sponsor='bank_b')
    return rail, acc


def balances(rail, acc):
    return {name: rail.balance(aid).minor_units for name, aid in acc.items()}


class TestFps:

    def test_payment_between_banks(self, network):
        rail, acc = network
        result = rail.fps_pay(rail.new_instruction(acc['alice'], acc['bob'], Money(1_500)))
        assert result.cleared
        assert result.credited_account == acc['bob']
        assert result.notify == 'bank_b'
        assert balances(rail, acc) == {
            'a_settle': 8_500, 'b_settle': 11_500, 'alice': 3_500, 'bob': 1_500, 'pip_x': 0,
        }

    def test_dcnsp_settles_through_its_sponsor(self, network):
        rail, acc = network
        result = rail.fps_pay(rail.new_instruction(acc['alice'], acc['pip_x'], Money(1_000)))
        assert result.notify == 'pip_x'
        assert rail.settlement_account_of('pip_x').id == acc['b_settle']
        assert balances(rail, acc)['b_settle'] == 11_000
        assert balances(rail, acc)['pip_x'] == 1_000

    def test_sponsor_must_be_direct(self, network):
        rail, acc = network
        with pytest.raises(SponsorNotDcsp):
            rail.register_fps_participant('pip_y', FpsParticipation.DCNSP, '320000', sponsor='pip_x')

    def test_instruction_is_not_settled_twice(self, network):
        rail, acc = network
        instruction = rail.new_instruction(acc['alice'], acc['bob'], Money(100))
        rail.fps_pay(instruction)
        with pytest.raises(DuplicateInstruction):
            rail.fps_pay(instruction)
        assert balances(rail, acc)['bob'] == 100

    def test_unknown_destination(self, network):
        rail, acc = network
        unreachable = rail.open_customer_account('bank_z', 'zed', '900000', '00000001')
        with pytest.raises(UnknownDestination):
            rail.fps_pay(rail.new_instruction(acc['alice'], unreachable, Money(100)))

    def test_scheme_failure_moves_nothing(self, network):
        rail, acc = network
        before = balances(rail, acc)
        rail.fail_next_payment = True
        with pytest.raises(SchemeFailure):
            rail.fps_pay(rail.new_instruction(acc['alice'], acc['bob'], Money(100)))
        assert balances(rail, acc) == before
        assert not rail.fail_next_payment

    def test_rejected_instruction_can_be_resubmitted(self, network):
        rail, acc = network
        instruction = rail.new_instruction(acc['alice'], acc['bob'], Money(100))
        rail.fail_next_payment = True
        with pytest.raises(SchemeFailure):
            rail.fps_pay(instruction)
        assert rail.fps_pay(instruction).cleared
        assert balances(rail, acc)['bob'] == 100
        with pytest.raises(DuplicateInstruction):
            rail.fps_pay(instruction)

    def test_short_payer_can_retry_after_funding(self, network):
        rail, acc = network
        instruction = rail.new_instruction(acc['alice'], acc['bob'], Money(6_000))
        with pytest.raises(InsufficientFunds):
            rail.fps_pay(instruction)
        carol = rail.open_customer_account('bank_b', 'carol', '300000', '10000003', Money(2_000))
        rail.fps_pay(rail.new_instruction(carol, acc['alice'], Money(1_000)))
        assert rail.fps_pay(instruction).cleared
        assert balances(rail, acc)['bob'] == 6_000

    def test_customer_cannot_overdraw(self, network):
        rail, acc = network
        with pytest.raises(InsufficientFunds):
            rail.fps_pay(rail.new_instruction(acc['alice'], acc['bob'], Money(5_001)))


class TestRtgs:

    def test_gross_transfer(self, network):
        rail, acc = network
        rail.rtgs_transfer(acc['a_settle'], acc['b_settle'], Money(4_000))
        assert balances(rail, acc)['a_settle'] == 6_000
        assert rail.total_settlement() == Money(20_000)

    def test_closed_rtgs_refuses_transfers(self, network):
        rail, acc = network
        rail.rtgs_open = False
        with pytest.raises(RtgsClosed):
            rail.rtgs_transfer(acc['a_settle'], acc['b_settle'], Money(1))

    def test_net_positions_are_all_or_nothing(self, network):
        rail, acc = network
        before = balances(rail, acc)
        with pytest.raises(InsufficientSettlementFunds):
            rail.apply_net_positions({'bank_a': -20_000, 'bank_b': 20_000}, 'B-0001')
        assert balances(rail, acc) == before


class TestNetting:

    def test_positions_sum_to_zero(self):
        batch = NetSettlementBatch('B-0001', (0, 50))
        batch.append(Obligation('O-1', 'a', 'b', Money(700)))
        batch.append(Obligation('O-2', 'b', 'a', Money(200)))
        batch.append(Obligation('O-3', 'b', 'c', Money(100)))
        assert batch.pairwise_net() == {('a', 'b'): Money(500), ('b', 'c'): Money(100)}
        assert batch.net_positions() == {'a': -500, 'b': 400, 'c': 100}
        assert sum(batch.net_positions().values()) == 0

    def test_short_debtor_leaves_the_batch_netted(self, network):
        rail, acc = network
        batch = NetSettlementBatch('B-0001', (0, 50))
        batch.append(Obligation('O-1', 'bank_a', 'bank_b', Money(50_000)))
        with pytest.raises(InsufficientSettlementFunds):
            settle_batch(batch, rail)
        assert batch.state is BatchState.NETTED
        assert batch.unsettled
        assert batch.failure

    def test_netted_matches_gross_on_seeded_batches(self):
        verdict = check_netting(seed=11, batches=500)
        assert verdict.passed, verdict.detail

    @settings(max_examples=200, deadline=None)
    @given(
        opening=st.lists(st.integers(0, 20_000), min_size=2, max_size=5),
        flows=st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4), st.integers(1, 9_000)), max_size=15),
    )
    def test_netted_matches_gross(self, opening, flows):
        banks = [f"bank{i}" for i in range(len(opening))]
        start = dict(zip(banks, opening))
        obligations = [(banks[d % len(banks)], banks[c % len(banks)], amount)
                       for d, c, amount in flows if d % len(banks) != c % len(banks)]
        assert settle_netted(start, obligations) == gross_oracle(start, obligations)


class TestEnhancedPayments:

    @pytest.fixture
    def system(self):
        clock, ids = SimClock(), IdSource()
        rail = SettlementRail(clock, ids)
        backing = rail.open_settlement_account('cb', '100000', '00000001', Money(1_000_000))
        bank_settle = rail.open_settlement_account('bank', '200000', '00000001', Money(50_000))
        account = rail.open_customer_account('bank', 'alice', '200000', '10000001', Money(20_000))
        rail.register_fps_participant('bank', FpsParticipation.DCSP, '200000')
        roles = {
            'cb': ParticipantRole.CENTRAL_BANK_CBDC_SYSTEM, 'bank': ParticipantRole.COMMERCIAL_BANK,
            'pip': ParticipantRole.PIP, 'alice': ParticipantRole.USER,
        }
        core = CoreLedger(roles, clock, ids, bridge=BackingAccountBridge(rail, backing))
        desk = core.open_wallet('pip', 'pip', technical=True)
        wallet = core.open_wallet('alice', 'pip')
        core.genesis_credit(wallet, Money(10_000))
        eps = EnhancedPaymentSystem(rail, core, ids, clock, central_bank='cb', backing_account=backing,
                                    batch_window=50)
        eps.onboard('bank')
        eps.onboard('pip')
        return eps, {'backing': backing, 'bank': bank_settle, 'account': account, 'desk': desk, 'wallet': wallet}

    def test_bank_money_into_a_wallet_settles_in_the_batch(self, system):
        eps, ref = system
        rail, core = eps.rail, eps.core
        record = eps.eps_transfer(EpsDirection.CBM_TO_CBDC, ref['account'], ref['desk'], Money(3_000))
        assert record.credit.state is CreditState.COMPLETED
        assert rail.balance(ref['account']) == Money(17_000)
        assert core.wallet(ref['desk']).ledger_balance == Money(3_000)
        # interbank leg is deferred
        assert rail.balance(ref['bank']) == Money(50_000)
        assert len(eps.unsettled_batches()) == 1

        eps.flush()
        assert eps.unsettled_batches() == []
        assert rail.balance(ref['bank']) == Money(47_000)
        assert rail.balance(ref['backing']) == Money(1_000_000)
        assert core.issuance_conserved()

    def test_wallet_to_bank_money(self, system):
        eps, ref = system
        rail, core = eps.rail, eps.core
        eps.eps_transfer(EpsDirection.CBDC_TO_CBM, ref['wallet'], ref['account'], Money(4_000), by_pip='pip')
        assert core.wallet(ref['wallet']).ledger_balance == Money(6_000)
        assert rail.balance(ref['account']) == Money(24_000)
        eps.flush()
        assert rail.balance(ref['bank']) == Money(54_000)
        assert rail.balance(ref['backing']) == Money(1_000_000)

    def test_short_wallet_is_a_core_debit_failure(self, system):
        eps, ref = system
        with pytest.raises(CoreDebitFailed):
            eps.eps_transfer(EpsDirection.CBDC_TO_CBM, ref['wallet'], ref['account'], Money(10_001), by_pip='pip')
        assert eps.unsettled_batches() == []

    def test_participants_must_be_onboarded(self, system):
        eps, ref = system
        eps.onboarded.discard('bank')
        with pytest.raises(NotOnboarded):
            eps.eps_transfer(EpsDirection.CBM_TO_CBDC, ref['account'], ref['desk'], Money(1))

    def test_closed_rtgs_keeps_the_batch_open_as_settlement_risk(self, system):
        eps, ref = system
        eps.eps_transfer(EpsDirection.CBM_TO_CBDC, ref['account'], ref['desk'], Money(3_000))
        eps.rail.rtgs_open = False
        assert eps.flush() == []
        assert len(eps.unsettled_batches()) == 1

    def test_reversal_nets_to_nothing(self, system):
        eps, ref = system
        record = eps.eps_transfer(EpsDirection.CBM_TO_CBDC, ref['account'], ref['desk'], Money(3_000))
        eps.reverse(record, 'test')
        assert eps.current_batch().net_positions() == {'bank': 0, 'cb': 0}
        assert eps.rail.balance(ref['account']) == Money(20_000)
