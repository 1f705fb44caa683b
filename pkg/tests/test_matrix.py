"""
Design option matrix against the transcribed privacy verdicts and golden topologies
"""

import os

import pytest

from src.domain.settings import SimulationSettings
from src.engine.matrix import (
    COLUMNS,
    COMBINATION_COLUMNS,
    MatrixResult,
    binding_combinations,
    cli_matrix_render,
    combination_frame,
    combination_label,
    compare_expectations,
    compare_topology,
    compatible_bindings,
    evaluate_matrix,
    is_compatible,
    load_expectations,
    load_suitability,
    load_topology,
    summarise,
    write_combinations,
    write_matrix,
)
from src.engine.scenario import Scenario
from src.engine.world import SLOT_OPTIONS, USE_CASE_SLOTS, WorldConfig
from src.participants.funds_locking import RELEASE_SETTLEMENT

ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))


def repo_path(*parts: str) -> str:
    return os.path.join(ROOT, *parts)


RATINGS = load_suitability(repo_path('config', 'suitability.yaml'))


def combination_ids():
    return [combination_label(bindings)
            for use_case in ('U1', 'U2', 'U3') for bindings in binding_combinations(use_case, RATINGS)]


@pytest.fixture(scope='module')
def matrix() -> MatrixResult:
    world = WorldConfig.load(repo_path('config', 'worlds', 'standard.yaml'), SimulationSettings())
    scenarios = {use_case: Scenario.load(repo_path('config', 'scenarios', f"{use_case.lower()}_standard.yaml"))
                 for use_case in ('U1', 'U2', 'U3')}
    return evaluate_matrix(world, scenarios, RATINGS)


class TestCompatibleBindings:

    def test_other_use_cases_keep_the_world_bindings(self, world):
        bindings = compatible_bindings(world, 'U1.S2', 'D3')
        assert bindings == {**world.bindings, 'U1.S2': 'D3'}

    def test_escrow_lock_pulls_in_the_fmi_release_and_settlement(self, world):
        bindings = compatible_bindings(world, 'U3.S2', 'D5')
        assert bindings['U3.S3'] == 'D3'
        assert bindings['U2.S2'] == 'D4'

    def test_ledger_release_pulls_in_a_ledger_lock(self, world):
        bindings = compatible_bindings(world, 'U3.S3', 'D1')
        assert bindings['U3.S2'] == 'D1'
        assert bindings['U2.S2'] == 'D1'


class TestCombinations:

    def test_cross_product_of_runnable_options(self):
        combinations = binding_combinations('U2', RATINGS)
        assert len(combinations) == 3 * 4
        assert {'U2.S1': 'D1', 'U2.S2': 'D5'} in combinations
        for bindings in combinations:
            assert set(bindings) == set(USE_CASE_SLOTS['U2'])
            assert all(RATINGS[f"{slot}.{option}"] in ('suitable', 'partial') for slot, option in bindings.items())

    def test_pay_on_delivery_keeps_only_compatible_releases(self):
        combinations = binding_combinations('U3', RATINGS)
        assert len(combinations) == 3 * (3 * 4 + 1)
        assert all(is_compatible(bindings) for bindings in combinations)
        escrowed = [b for b in combinations if b['U3.S3'] == 'D3']
        assert {b['U2.S2'] for b in escrowed} == set(RELEASE_SETTLEMENT['D3'])
        assert {b['U3.S2'] for b in escrowed} == {'D5'}

    def test_mismatched_release_is_incompatible(self):
        assert not is_compatible({'U3.S2': 'D5', 'U3.S3': 'D2', 'U2.S2': 'D4'})
        assert is_compatible({'U1.S1': 'D2', 'U1.S2': 'D5'})

    def test_unrated_options_never_run(self):
        assert binding_combinations('U1', {}) == []

    def test_matrix_runs_every_combination(self, matrix):
        assert [combo.label for combo in matrix.combinations] == combination_ids()
        assert len(matrix.combinations) == 12 + 12 + 39

    @pytest.mark.parametrize('label', combination_ids())
    def test_combination_completes_end_to_end(self, matrix, label):
        combo = next(c for c in matrix.combinations if c.label == label)
        assert combo.passed, f"{label} ended {combo.outcome} ({combo.failure_mode})"
        assert combo.outcome == 'success'

    def test_combinations_file(self, matrix, tmp_path):
        path = write_combinations(matrix, str(tmp_path))
        with open(path) as f:
            assert f.readline().strip() == ','.join(COMBINATION_COLUMNS)
        assert len(combination_frame(matrix.combinations)) == len(matrix.combinations)


class TestMatrix:

    def test_one_row_per_option(self, matrix):
        expected = sorted(f"{slot}.{option}" for slot, options in SLOT_OPTIONS.items() for option in options)
        assert list(matrix.frame['option']) == expected
        assert list(matrix.frame.columns) == COLUMNS

    def test_matches_transcribed_privacy_verdicts(self, matrix):
        assert compare_expectations(matrix, load_expectations(repo_path('config', 'expectations',
                                                                        'privacy_matrix.yaml'))) == []

    def test_matches_golden_topology(self, matrix):
        assert compare_topology(matrix, load_topology(repo_path('config', 'expectations', 'topology.yaml'))) == []

    def test_suitable_and_partial_options_complete(self, matrix):
        rated = matrix.frame[matrix.frame['rating'].isin(['suitable', 'partial'])]
        assert not rated.empty
        assert rated['standard_passed'].all(), list(rated.loc[~rated['standard_passed'], 'option'])

    def test_central_bank_routes_are_flagged(self, matrix):
        flagged = matrix.flagged()
        assert 'U1.S2.D1' in flagged
        assert 'U1.S2.D5' not in flagged

    def test_sealing_is_what_keeps_cbdc_routed_cop_private(self, matrix):
        row = matrix.row('U1.S1.D4')
        assert row['privacy_ok']
        assert row['sealing_required']
        assert matrix.cell('U1.S1.D4', 'unsealed').central_bank_exposed

    def test_prefunded_routes_fail_without_liquidity(self, matrix):
        stressed = [cell for cell in matrix.cells if cell.battery == 'liquidity']
        assert stressed
        assert any(not cell.passed for cell in stressed)

    def test_unknown_option_row(self, matrix):
        with pytest.raises(KeyError):
            matrix.row('U9.S1.D1')


class TestRendering:

    def test_empty_matrix_renders_the_header(self):
        result = MatrixResult([], summarise([], {}))
        assert cli_matrix_render(result) == '  '.join(COLUMNS) + '\n'

    def test_written_files_are_stable(self, matrix, tmp_path):
        csv_path, text_path = write_matrix(matrix, str(tmp_path / 'first'))
        again_csv, again_text = write_matrix(matrix, str(tmp_path / 'second'))
        with open(csv_path) as a, open(again_csv) as b:
            assert a.read() == b.read()
        with open(text_path) as f:
            assert f.read() == cli_matrix_render(matrix)
