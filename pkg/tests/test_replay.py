"""
Trace replay: identical re-execution, seed drift and hand-edited deltas
"""

import pytest

from src.domain.errors import InvariantViolation, TraceMismatch
from src.engine.replay import check_trace, parse_delta, replay
from src.engine.scenario_engine import ScenarioEngine, Trace, write_artifacts

BALANCE_KINDS = ('Mint', 'Burn', 'Transfer', 'RTGS:Transfer', 'BANK:Debit', 'BANK:Credit')


@pytest.fixture
def trace_file(world, load_scenario, tmp_path):
    def write(name: str) -> str:
        result = ScenarioEngine(world, load_scenario(name)).run()
        return write_artifacts(result, str(tmp_path))['trace']
    return write


def corrupt_first_delta(path: str):
    trace = Trace.read(path)
    for index, line in enumerate(trace.lines):
        parts = line.split('|')
        if len(parts) == 5 and parts[1] in BALANCE_KINDS:
            parts[3] = str(int(parts[3]) + 1)
            trace.lines[index] = '|'.join(parts)
            break
    else:
        pytest.fail(f"{path} has no balance delta to corrupt")
    trace.write(path)


class TestReplay:

    @pytest.mark.parametrize('name', ['u1_standard', 'u2_standard', 'u3_standard', 'u3_failed_delivery'])
    def test_written_trace_replays_identically(self, trace_file, settings, name):
        verdict = replay(trace_file(name), settings=settings)
        assert verdict.identical
        assert verdict.passed
        assert {check.name for check in verdict.checks} >= {'reconciliation', 'conservation'}

    def test_other_seed_is_a_mismatch(self, trace_file, settings):
        path = trace_file('u1_standard')
        with pytest.raises(TraceMismatch):
            replay(path, seed=settings.seed + 1, settings=settings)

    def test_edited_delta_breaks_reconciliation(self, trace_file, settings):
        path = trace_file('u1_standard')
        corrupt_first_delta(path)
        with pytest.raises(InvariantViolation):
            replay(path, settings=settings)

    def test_header_without_scenario(self, trace_file, settings, tmp_path):
        trace = Trace.read(trace_file('u2_standard'))
        del trace.header['scenario']
        path = str(tmp_path / 'headless.trace')
        trace.write(path)
        with pytest.raises(TraceMismatch):
            replay(path, settings=settings)


class TestTraceChecks:

    def test_clean_trace_reconciles(self, trace_file):
        checks = check_trace(Trace.read(trace_file('u2_reverse_waterfall')))
        assert all(check.passed for check in checks)

    def test_message_and_checkpoint_lines_carry_no_delta(self):
        assert parse_delta('3|msg|CommercialBank|Pip|CopRequest|1') is None
        assert parse_delta('0|Opening|W-0001|2000|CBDC') is None

    def test_ledger_prefix_selects_the_ledger(self):
        entry = parse_delta('4|RTGS:Transfer|A-0001|500|A-0002')
        assert entry.ledger == 'RTGS'
        assert entry.kind == 'Transfer'
        assert entry.amount.minor_units == 500

    def test_unreadable_amount(self):
        with pytest.raises(TraceMismatch):
            parse_delta('4|Transfer|W-0001|lots|W-0002')
