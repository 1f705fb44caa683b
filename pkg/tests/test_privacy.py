"""
Sealed sections, key directory and exposure taint scanning
"""

import pytest

from src.domain.errors import NotRecipient, PrivacyError, UnknownRecipientKey, UnknownSection
from src.domain.model import DatumKind, ParticipantRole, PersonalDatum
from src.engine.bus import TraceRecord
from src.privacy.envelope import Envelope, KeyDirectory
from src.privacy.taint import ExposureChannel, taint_scan

PAYER = PersonalDatum('parent', DatumKind.NAME, 'Alex Parent')
PURPOSE = PersonalDatum('parent', DatumKind.TRANSACTION_PURPOSE, 'pocket money')

ROLES = {
    'bank': ParticipantRole.COMMERCIAL_BANK,
    'cbdc': ParticipantRole.CENTRAL_BANK_CBDC_SYSTEM,
    'pip': ParticipantRole.PIP,
}


@pytest.fixture
def keys():
    keys = KeyDirectory(seed=7)
    keys.exchange('bank', 'pip')
    return keys


class TestSealing:

    def test_recipient_opens_its_section(self, keys):
        section = keys.seal({'payer_name': PAYER}, 'pip')
        env = Envelope('M-0001', 'bank', 'cbdc', 'FundsTransferRequest', {'amount': 5}, [section])
        assert keys.open_section(env, 0, 'pip') == {'payer_name': PAYER}
        assert keys.key_metric() == {'seals': 1, 'opens': 1, 'directory_entries': 2}

    def test_relay_cannot_open(self, keys):
        keys.register('cbdc')
        sealed = [keys.seal({'payer_name': PAYER}, 'pip')]
        env = Envelope('M-0001', 'bank', 'cbdc', 'FundsTransferRequest', {}, sealed)
        with pytest.raises(NotRecipient):
            keys.open_section(env, 0, 'cbdc')
        assert keys.open_all(env, 'cbdc') == {}

    def test_sealing_for_an_unknown_key(self, keys):
        with pytest.raises(UnknownRecipientKey):
            keys.seal({'payer_name': PAYER}, 'stranger')

    def test_revoked_key_can_no_longer_open(self, keys):
        env = Envelope('M-0001', 'bank', 'pip', 'CopRequest', {}, [keys.seal({'payer_name': PAYER}, 'pip')])
        keys.revoke('pip')
        with pytest.raises(NotRecipient):
            keys.open_section(env, 0, 'pip')

    @pytest.mark.parametrize("index", [1, -1])
    def test_missing_section_index_is_a_privacy_error(self, keys, index):
        env = Envelope('M-0001', 'bank', 'pip', 'CopRequest', {}, [keys.seal({'payer_name': PAYER}, 'pip')])
        with pytest.raises(UnknownSection) as excinfo:
            keys.open_section(env, index, 'pip')
        assert isinstance(excinfo.value, PrivacyError)
        assert keys.open_count == 0

    def test_sealed_fields_do_not_leak_through_repr(self, keys):
        section = keys.seal({'payer_name': PAYER}, 'pip')
        assert 'Alex' not in repr(section)

    def test_capabilities_are_deterministic(self):
        assert KeyDirectory(7).register('pip') == KeyDirectory(7).register('pip')
        assert KeyDirectory(7).register('pip') != KeyDirectory(8).register('pip')


class TestTaint:

    def test_plaintext_exposes_both_ends(self):
        env = Envelope('M-0001', 'bank', 'cbdc', 'FundsTransferRequest', {'payer_name': PAYER}, slot='U1.S2')
        report = taint_scan([TraceRecord(0, env, 'cbdc')], ROLES)
        assert report.exposed(ParticipantRole.CENTRAL_BANK_CBDC_SYSTEM, DatumKind.NAME)
        assert report.exposed_participant('bank')
        assert report.central_bank_exposed('U1.S2')
        assert not report.central_bank_exposed('U1.S1')

    def test_sealed_data_is_exposed_only_to_the_opener(self, keys):
        env = Envelope('M-0001', 'bank', 'cbdc', 'FundsTransferRequest', {'amount': 5},
                       [keys.seal({'payer_name': PAYER, 'purpose': PURPOSE}, 'pip')], slot='U1.S2')
        keys.open_section(env, 0, 'pip')
        record = TraceRecord(0, env, 'pip', opened=list(keys.openings))
        report = taint_scan([record], ROLES)
        assert not report.central_bank_exposed()
        assert report.exposed(ParticipantRole.PIP, DatumKind.TRANSACTION_PURPOSE)
        assert {row.channel for row in report.rows} == {ExposureChannel.OPENED}
        assert report.lines() == [
            'Pip|Name|M-0001|OpenedSection',
            'Pip|TransactionPurpose|M-0001|OpenedSection',
        ]

    def test_engine_steps_without_envelopes_expose_nothing(self):
        assert len(taint_scan([TraceRecord(0, None, 'eps.flush')], ROLES)) == 0
