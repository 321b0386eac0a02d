# -*- coding: utf-8 -*-
"""
命令行接口端到端测试
"""

import json

import numpy as np
import pandas as pd
import pytest

from cli import SimulationCLI


def run_cli(*args):
    return SimulationCLI().run(list(args))


def read_summary(directory):
    return json.loads((directory / 'summary.json').read_text(encoding='utf-8'))


class TestSimulate:

    def test_rest_stays_zero(self, tmp_path):
        code = run_cli('simulate', '--k-max', '1', '--t-final', '0.01', '--dt', '0.001',
                       '--output-dir', str(tmp_path))
        assert code == 0
        frame = pd.read_csv(tmp_path / 'trajectory.csv')
        assert list(frame.columns[:4]) == ['t', 'kinetic', 'stress_energy', 'viscous_rate']
        assert (frame.drop(columns='t').to_numpy() == 0.0).all()
        summary = read_summary(tmp_path)
        assert summary['checks']['finite_state'] == 'pass'
        assert summary['checks']['energy_equation'] == 'skipped'
        assert summary['command'] == 'simulate'

    def test_isotropic_relaxation(self, tmp_path):
        code = run_cli('simulate', '--preset', 'relaxation', '--t-final', '1.0', '--dt', '0.001',
                       '--stride', '10', '--output-dir', str(tmp_path))
        assert code == 0
        frame = pd.read_csv(tmp_path / 'trajectory.csv')
        assert len(frame) == 101
        stress_energy = frame['stress_energy'].to_numpy()
        expected = stress_energy[0] * np.exp(-2.0 * frame['t'].to_numpy())
        np.testing.assert_allclose(stress_energy, expected, rtol=1e-5)
        assert np.max(np.abs(frame['kinetic'])) <= 1e-12

    def test_csv_uses_unix_newlines(self, tmp_path):
        run_cli('simulate', '--k-max', '1', '--t-final', '0.01', '--dt', '0.001', '--output-dir', str(tmp_path))
        assert b'\r' not in (tmp_path / 'trajectory.csv').read_bytes()

    def test_config_file_and_environment(self, tmp_path, monkeypatch):
        config = tmp_path / 'run.toml'
        config.write_text('[domain]\nk_max = 1\n[solver]\nt_final = 0.01\ndt = 0.005\n', encoding='utf-8')
        monkeypatch.setenv('GALERKIN_OUTPUT_DIR', str(tmp_path / 'env_out'))
        assert run_cli('simulate', '--config', str(config)) == 0
        assert (tmp_path / 'env_out' / 'trajectory.csv').exists()
        assert read_summary(tmp_path / 'env_out')['config']['domain']['k_max'] == 1


class TestConfigErrors:

    def test_invalid_retardation(self, tmp_path):
        assert run_cli('simulate', '--retardation', '1.5', '--output-dir', str(tmp_path)) == 2
        assert not (tmp_path / 'summary.json').exists()

    def test_invalid_time_step(self, tmp_path):
        assert run_cli('simulate', '--dt', '0', '--output-dir', str(tmp_path)) == 2

    def test_syntax_error_in_file(self, tmp_path):
        config = tmp_path / 'broken.toml'
        config.write_text('[fluid\nreynolds = 1.0\n', encoding='utf-8')
        assert run_cli('simulate', '--config', str(config), '--output-dir', str(tmp_path)) == 2

    def test_unknown_scheme(self, tmp_path):
        assert run_cli('simulate', '--scheme', 'euler', '--output-dir', str(tmp_path)) == 2

    def test_show_config(self, tmp_path, capsys):
        assert run_cli('simulate', '--show-config', '--reynolds', '7.5', '--output-dir', str(tmp_path)) == 0
        out = capsys.readouterr().out
        assert 'reynolds = 7.5' in out
        assert not (tmp_path / 'summary.json').exists()


class TestInstability:

    def test_oversized_step_exits_with_instability(self, tmp_path):
        with np.errstate(all='ignore'):
            code = run_cli('simulate', '--preset', 'stability', '--k-max', '4', '--dt', '0.5',
                           '--t-final', '200', '--output-dir', str(tmp_path))
        assert code == 3
        summary = read_summary(tmp_path)
        assert summary['checks']['finite_state'] == 'fail'
        assert summary['details']['last_finite_time'] < 200


class TestChecks:

    def test_energy_check(self, tmp_path):
        code = run_cli('energy-check', '--preset', 'energy', '--k-max', '2', '--t-final', '0.2',
                       '--output-dir', str(tmp_path))
        assert code == 0
        frame = pd.read_csv(tmp_path / 'energy.csv')
        assert 'residual' in frame.columns
        summary = read_summary(tmp_path)
        assert summary['checks']['energy_equation'] == 'pass'
        assert summary['details']['apriori_bound_holds'] is True
        assert 3.5 <= summary['details']['stride_halving_ratio'] <= 4.5

    def test_stability(self, tmp_path):
        code = run_cli('stability', '--preset', 'stability', '--t-final', '0.2', '--stride', '10',
                       '--output-dir', str(tmp_path))
        assert code == 0
        frame = pd.read_csv(tmp_path / 'stability.csv')
        assert len(frame) == 21
        summary = read_summary(tmp_path)
        assert summary['checks']['gronwall_bound'] == 'pass'
        assert summary['details']['epsilon'] == 1e-6
        assert summary['details']['rate_violations'] == 0
        assert summary['details']['rate_holds'] is True

    def test_ladyzhenskaya(self, tmp_path):
        code = run_cli('ladyzhenskaya', '--k-max', '3', '--n-samples', '50', '--output-dir', str(tmp_path))
        assert code == 0
        frame = pd.read_csv(tmp_path / 'ratios.csv')
        assert len(frame) == 50
        summary = read_summary(tmp_path)
        assert summary['checks']['ladyzhenskaya'] == 'pass'
        assert summary['details']['analytic_ratio'] == pytest.approx(0.488603, abs=1e-5)

    def test_ladyzhenskaya_velocity_field(self, tmp_path):
        code = run_cli('ladyzhenskaya', '--field', 'velocity', '--k-max', '2', '--n-samples', '20',
                       '--output-dir', str(tmp_path))
        assert code == 0
        assert len(pd.read_csv(tmp_path / 'ratios.csv')) == 40

    def test_ladyzhenskaya_skipped_on_torus(self, tmp_path):
        config = tmp_path / 'torus.toml'
        config.write_text('[domain]\nmode = "periodic_torus"\nk_max = 1\n', encoding='utf-8')
        code = run_cli('ladyzhenskaya', '--config', str(config), '--n-samples', '5', '--output-dir', str(tmp_path))
        assert code == 0
        assert read_summary(tmp_path)['checks']['ladyzhenskaya'] == 'skipped'

    def test_converge(self, tmp_path):
        code = run_cli('converge', '--reynolds', '5', '--k-list', '1', '2', '--dt-list', '0.01', '0.005', '0.0025',
                       '--t-final', '0.2', '--output-dir', str(tmp_path))
        assert code == 0
        frame = pd.read_csv(tmp_path / 'convergence.csv')
        assert set(frame['study']) >= {'manufactured_galerkin', 'transient_dt', 'transient_k_max', 'projection'}
        summary = read_summary(tmp_path)
        assert summary['checks']['convergence'] == 'pass'
        assert summary['details']['order_target'] == 4.0
        assert len(summary['details']['transient_k_errors']) == 1
