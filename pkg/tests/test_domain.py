"""
Money, identifiers, the simulation clock, aliases and settings
"""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.domain.clock import SimClock
from src.domain.errors import (
    ConfigInvalid,
    DigitalPoundError,
    EngineError,
    InsufficientAvailable,
    InvalidAmount,
    MoneyOverflow,
    MoneyUnderflow,
)
from src.domain.ids import IdKind, IdSource
from src.domain.model import Alias, AliasKind, ParticipantRole, WALLET_MANAGER_ROLES
from src.domain.money import MAX_MINOR_UNITS, Money, money_sum
from src.domain.settings import SimulationSettings
from src.participants.ecosystem import Ecosystem

pence = st.integers(min_value=0, max_value=MAX_MINOR_UNITS)


class TestMoney:

    def test_rejects_negative_and_non_integer_amounts(self):
        with pytest.raises(InvalidAmount):
            Money(-1)
        with pytest.raises(InvalidAmount):
            Money(1.5)
        with pytest.raises(InvalidAmount):
            Money(True)

    def test_rejects_amounts_above_the_ceiling(self):
        with pytest.raises(MoneyOverflow):
            Money(MAX_MINOR_UNITS + 1)

    def test_addition_overflow_is_an_error_not_a_wrap(self):
        with pytest.raises(MoneyOverflow):
            Money(MAX_MINOR_UNITS) + Money(1)

    def test_subtraction_below_zero_is_an_error(self):
        with pytest.raises(MoneyUnderflow):
            Money(5) - Money(6)

    def test_renders_as_pounds(self):
        assert str(Money(123456)) == '£1,234.56'
        assert str(Money(7)) == '£0.07'

    def test_zero_is_falsy(self):
        assert not Money.zero()
        assert Money(1)

    def test_sum(self):
        assert money_sum([Money(1), Money(2), Money(3)]) == Money(6)
        assert money_sum([]) == Money.zero()

    @given(pence, pence)
    def test_add_then_subtract_is_identity(self, a, b):
        if a + b > MAX_MINOR_UNITS:
            with pytest.raises(MoneyOverflow):
                Money(a) + Money(b)
            return
        assert (Money(a) + Money(b)) - Money(b) == Money(a)

    @given(pence, pence)
    def test_ordering_follows_pence(self, a, b):
        assert (Money(a) < Money(b)) == (a < b)


class TestIds:

    def test_ids_are_sequential_per_kind(self):
        ids = IdSource()
        assert ids.next_id(IdKind.WALLET) == 'W-0001'
        assert ids.next_id(IdKind.WALLET) == 'W-0002'
        assert ids.next_id(IdKind.LOCK) == 'L-0001'
        assert ids.issued(IdKind.WALLET) == 2

    def test_two_sources_issue_the_same_sequence(self):
        a, b = IdSource(), IdSource()
        kinds = [IdKind.WALLET, IdKind.ACCOUNT, IdKind.WALLET, IdKind.MESSAGE]
        assert [a.next_id(k) for k in kinds] == [b.next_id(k) for k in kinds]

    def test_identifiers_do_not_depend_on_the_run_seed(self, world):
        first = Ecosystem(world.with_settings(seed=7))
        second = Ecosystem(world.with_settings(seed=11))
        for kind in IdKind:
            assert first.ids.issued(kind) == second.ids.issued(kind)
        assert first.ids.next_id(IdKind.LOCK) == second.ids.next_id(IdKind.LOCK)


class TestClock:

    def test_advances_forward(self):
        clock = SimClock()
        clock.advance(3)
        clock.advance_to(10)
        assert clock.now == 10

    def test_never_moves_backwards(self):
        clock = SimClock(5)
        with pytest.raises(EngineError):
            clock.advance_to(4)
        with pytest.raises(EngineError):
            clock.advance(-1)


class TestAlias:

    def test_mobile_number(self):
        alias = Alias.parse('07700900001')
        assert alias.kind is AliasKind.MOBILE_NUMBER

    def test_sort_code_account_is_normalised(self):
        alias = Alias.parse('12345612345678')
        assert alias.kind is AliasKind.SORT_CODE_ACCOUNT_NUMBER
        assert alias.value == '123456-12345678'
        assert alias == Alias.parse('123456-12345678')

    @pytest.mark.parametrize('text', ['0770090000', '08700900001', '123-456', 'abc'])
    def test_malformed_aliases_are_rejected(self, text):
        with pytest.raises(ValueError):
            Alias.parse(text)


class TestRoles:

    def test_parse_accepts_value_and_name(self):
        assert ParticipantRole.parse('Pip') is ParticipantRole.PIP
        assert ParticipantRole.parse('COMMERCIAL_BANK') is ParticipantRole.COMMERCIAL_BANK

    def test_only_pips_and_fmis_manage_wallets(self):
        assert ParticipantRole.COMMERCIAL_BANK not in WALLET_MANAGER_ROLES
        assert ParticipantRole.FMI in WALLET_MANAGER_ROLES


class TestErrors:

    def test_kind_is_the_class_name(self):
        error = InsufficientAvailable('short', 'pip', needed=10, available=4)
        assert isinstance(error, DigitalPoundError)
        assert error.kind == 'InsufficientAvailable'
        assert error.participant == 'pip'


class TestSettings:

    def test_loads_the_shipped_file(self):
        settings = SimulationSettings.from_yaml('config/settings.yaml')
        assert settings.seed == 7
        assert settings.waterfall_mode == 'waterfall'

    def test_unknown_toggle_is_rejected(self):
        with pytest.raises(ConfigInvalid):
            SimulationSettings().with_toggles({'warp_speed': True})

    def test_invalid_mode_is_rejected(self):
        with pytest.raises(ConfigInvalid):
            SimulationSettings().with_toggles({'waterfall_mode': 'overflow'})

    def test_toggles_copy(self):
        base = SimulationSettings()
        changed = base.with_toggles({'cbdc_sealing': False})
        assert base.cbdc_sealing and not changed.cbdc_sealing
