"""
End-to-end scenario runs: shipped scripts, postconditions, determinism and artifacts
"""

import os
from dataclasses import replace

import pytest

from src.domain.errors import ConfigInvalid, ScenarioDeadlock
from src.engine.scenario import Scenario
from src.engine.scenario_engine import ScenarioEngine, write_artifacts

SCENARIOS = sorted(name[:-5] for name in os.listdir(os.path.join(os.path.dirname(__file__), '..', 'config',
                                                                      'scenarios')) if name.endswith('.yaml'))


class TestShippedScenarios:

    @pytest.mark.parametrize('name', SCENARIOS)
    def test_scenario_meets_its_expectations(self, world, load_scenario, name):
        result = ScenarioEngine(world, load_scenario(name)).run()
        assert result.passed, result.report.failures()

    def test_standard_payment_moves_money_across_ledgers(self, world, load_scenario):
        result = ScenarioEngine(world, load_scenario('u1_standard')).run()
        eco = result.eco
        assert result.report.outcome == 'success'
        assert eco.core.wallet(eco.wallets['child_wallet']).ledger_balance.minor_units == 7_000
        assert eco.rail.balance(eco.accounts['parent_account']).minor_units == 495_000

    def test_waterfall_sweeps_the_excess(self, world, load_scenario):
        result = ScenarioEngine(world, load_scenario('u1_waterfall')).run()
        eco = result.eco
        assert result.passed
        assert eco.core.wallet(eco.wallets['child_wallet']).ledger_balance.minor_units == 10_000
        assert eco.rail.balance(eco.accounts['child_account']).minor_units == 4_000

    def test_failed_delivery_leaves_the_consumer_whole(self, world, load_scenario):
        result = ScenarioEngine(world, load_scenario('u3_failed_delivery')).run()
        eco = result.eco
        assert result.report.outcome == 'failure'
        assert result.report.failure_mode == 'DeliveryFailed'
        assert eco.core.wallet(eco.wallets['consumer_wallet']).ledger_balance.minor_units == 20_000

    @pytest.mark.parametrize('option', ['D1', 'D2', 'D3', 'D4'])
    def test_refused_payout_returns_the_consumer_funds(self, world, load_scenario, option):
        bound = replace(world, bindings={**world.bindings, 'U2.S2': option})
        result = ScenarioEngine(bound, load_scenario('u2_scheme_failure')).run()
        assert result.passed, result.report.failures()
        assert result.report.failure_mode == 'SchemeFailure'
        eco = result.eco
        assert eco.core.wallet(eco.wallets['consumer_wallet']).ledger_balance.minor_units == 20_000
        assert all(verdict.passed for verdict in result.report.invariants)

    def test_invariants_hold_on_every_run(self, world, load_scenario):
        result = ScenarioEngine(world, load_scenario('u2_standard')).run()
        assert all(verdict.passed for verdict in result.report.invariants)
        assert result.report.unsettled == []


class TestBindings:

    def test_missing_binding_is_a_configuration_error(self, world, load_scenario):
        bindings = dict(world.bindings)
        del bindings['U1.S1']
        with pytest.raises(ConfigInvalid):
            ScenarioEngine(replace(world, bindings=bindings), load_scenario('u1_standard'))

    def test_release_that_cannot_reach_settlement_deadlocks(self, world, load_scenario):
        bindings = {**world.bindings, 'U3.S2': 'D5', 'U3.S3': 'D3', 'U2.S2': 'D1'}
        with pytest.raises(ScenarioDeadlock):
            ScenarioEngine(world.with_bindings(bindings), load_scenario('u3_standard')).run()

    def test_unknown_actor_is_rejected(self, world):
        scenario = Scenario.from_dict({
            'use_case': 'U1', 'name': 'ghost', 'amount': 100,
            'actors': {'payer': 'nobody', 'payee': 'child'},
            'events': [{'initiate': 'nobody'}],
            'expect': {'outcome': 'success'},
        })
        with pytest.raises(ConfigInvalid):
            ScenarioEngine(world, scenario)


class TestDeterminism:

    @pytest.mark.parametrize('name', ['u1_standard', 'u2_reverse_waterfall', 'u3_standard'])
    def test_same_seed_same_trace(self, world, load_scenario, name):
        first = ScenarioEngine(world, load_scenario(name)).run()
        second = ScenarioEngine(world, load_scenario(name)).run()
        assert first.trace.text() == second.trace.text()
        assert first.exposure_text() == second.exposure_text()
        assert first.report.text() == second.report.text()

    def test_trace_opens_and_closes_with_balances(self, world, load_scenario):
        trace = ScenarioEngine(world, load_scenario('u1_standard')).run().trace
        assert trace.header['scenario'] == 'config/scenarios/u1_standard.yaml'
        assert trace.checkpoints('Opening')
        assert [p for p, _, _ in trace.checkpoints('Opening')] == [p for p, _, _ in trace.checkpoints('Balance')]


class TestArtifacts:

    def test_writes_trace_report_and_exposure(self, world, load_scenario, tmp_path):
        result = ScenarioEngine(world, load_scenario('u1_standard')).run()
        paths = write_artifacts(result, str(tmp_path))
        assert sorted(paths) == ['exposure', 'report', 'trace']
        assert all(os.path.exists(path) for path in paths.values())
        with open(paths['exposure']) as f:
            assert f.readline().strip() == 'component_role|datum_kind|message|channel'
        with open(paths['trace']) as f:
            assert f.read() == result.trace.text()
