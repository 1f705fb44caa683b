"""
Command line: subcommands, exit codes and output locations
"""

import os

import pytest

from src.main import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, exit_code, main


class TestExitCodes:

    @pytest.mark.parametrize('verdicts, code', [
        ([], EXIT_OK),
        ([True, True], EXIT_OK),
        ([True, False], EXIT_FAILED),
    ])
    def test_exit_code(self, verdicts, code):
        assert exit_code(verdicts) == code

    def test_unknown_flag_is_a_configuration_error(self):
        assert main(['run', '--scenario', 'config/scenarios/u1_standard.yaml', '--warp']) == EXIT_CONFIG

    def test_missing_subcommand(self):
        assert main([]) == EXIT_CONFIG


class TestRun:

    def test_writes_three_artifacts(self, tmp_path, capsys):
        code = main(['run', '--scenario', 'config/scenarios/u1_standard.yaml', '--out', str(tmp_path)])
        assert code == EXIT_OK
        assert sorted(os.listdir(tmp_path)) == [
            'u1_standard.exposure.txt', 'u1_standard.report.txt', 'u1_standard.trace',
        ]
        assert 'u1_standard' in capsys.readouterr().out

    def test_sandbox_variable_sets_the_output_directory(self, tmp_path, monkeypatch):
        monkeypatch.setenv('DPOUND_SANDBOX_OUT', str(tmp_path))
        assert main(['run', '--scenario', 'config/scenarios/u2_standard.yaml']) == EXIT_OK
        assert os.path.exists(tmp_path / 'u2_standard.trace')

    def test_missing_scenario_file(self, tmp_path):
        code = main(['run', '--scenario', str(tmp_path / 'absent.yaml'), '--out', str(tmp_path)])
        assert code == EXIT_CONFIG

    def test_unbound_slot(self, tmp_path):
        world = tmp_path / 'unbound.yaml'
        with open('config/worlds/standard.yaml') as f:
            text = f.read()
        world.write_text(text.replace('  U1.S1: D2', '', 1))
        code = main(['run', '--world', str(world), '--scenario', 'config/scenarios/u1_standard.yaml',
                     '--out', str(tmp_path)])
        assert code == EXIT_CONFIG

    def test_replay_of_a_fresh_trace(self, tmp_path):
        assert main(['run', '--scenario', 'config/scenarios/u3_standard.yaml', '--out', str(tmp_path)]) == EXIT_OK
        assert main(['replay', str(tmp_path / 'u3_standard.trace')]) == EXIT_OK


class TestValidate:

    def test_shipped_world_and_scenarios(self, capsys):
        code = main(['validate', '--scenario', 'config/scenarios/u1_standard.yaml',
                     '--scenario', 'config/scenarios/u3_failed_delivery.yaml'])
        assert code == EXIT_OK
        assert '[OK]' in capsys.readouterr().out

    def test_world_that_does_not_parse(self, tmp_path):
        world = tmp_path / 'broken.yaml'
        world.write_text('participants: [unclosed\n')
        assert main(['validate', '--world', str(world)]) == EXIT_CONFIG
