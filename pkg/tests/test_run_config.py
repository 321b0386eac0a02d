# -*- coding: utf-8 -*-
"""
运行配置解析与摘要测试
"""

import json

import numpy as np
import pytest

from run_config import (
    CHECK_NAMES,
    ConfigError,
    RunSummary,
    emit_config,
    initial_data_for,
    layered_config,
    modal_forcing_for,
    parse_config,
)

MINIMAL = """
[fluid]
reynolds = 2.0
weissenberg = 0.5
retardation = 0.3

[domain]
k_max = 1

[solver]
t_final = 0.5
dt = 0.01
"""


class TestParseConfig:

    def test_minimal_config(self):
        config = parse_config(MINIMAL)
        assert config.params.reynolds == 2.0
        assert config.params.retardation == 0.3
        assert config.k_max == 1
        assert config.solver.dt == 0.01
        assert config.solver.params == config.params
        assert config.initial.preset == 'rest'
        assert config.effective_quad_order == 10

    def test_empty_text_uses_preset(self):
        config = parse_config('', preset='relaxation')
        assert config.initial.preset == 'isotropic_stress'
        assert parse_config('').initial.preset == 'rest'

    def test_retardation_out_of_range(self):
        with pytest.raises(ConfigError, match='0 < a < 1'):
            parse_config('[fluid]\nretardation = 1.5\n')

    def test_zero_time_step(self):
        with pytest.raises(ConfigError):
            parse_config('[solver]\ndt = 0.0\n')

    def test_all_errors_reported(self):
        with pytest.raises(ConfigError) as info:
            parse_config('[fluid]\nretardation = 1.5\nreynolds = -1.0\n[solver]\ndt = 0.0\n')
        assert len(info.value.errors) >= 3

    def test_unknown_section_and_key(self):
        with pytest.raises(ConfigError) as info:
            parse_config('[pressure]\nvalue = 1\n[fluid]\nviscosity = 2.0\n')
        assert len(info.value.errors) == 2

    def test_syntax_error_location(self):
        with pytest.raises(ConfigError) as info:
            parse_config('[fluid]\nreynolds = \n')
        assert info.value.line == 2

    def test_mode_beyond_basis(self):
        with pytest.raises(ConfigError):
            parse_config('[domain]\nk_max = 2\n[initial]\npreset = "single_mode"\nmode = 5\n')

    def test_torus_mode_count(self):
        config = parse_config('[domain]\nmode = "periodic_torus"\nk_max = 1\n'
                              '[initial]\npreset = "single_mode"\nmode = 8\n')
        assert config.domain.mode == 'periodic_torus'

    def test_lists_must_be_monotone(self):
        with pytest.raises(ConfigError):
            parse_config('[checks]\nk_list = [2, 1]\n')
        with pytest.raises(ConfigError):
            parse_config('[checks]\ndt_list = [0.01, 0.02]\n')

    def test_quad_order_must_be_usable(self):
        with pytest.raises(ConfigError):
            parse_config('[domain]\nquad_order = 1\n')


class TestEmitConfig:

    @pytest.mark.parametrize('preset', ['default', 'relaxation', 'converge'])
    def test_round_trip(self, preset):
        config = parse_config('', preset=preset)
        assert parse_config(emit_config(config)) == config

    def test_round_trip_custom(self):
        config = parse_config(MINIMAL + '\n[checks]\ndt_list = [0.1, 0.03]\n')
        assert parse_config(emit_config(config)) == config


class TestLayeredConfig:

    def test_file_over_preset(self, tmp_path):
        path = tmp_path / 'run.toml'
        path.write_text('[domain]\nk_max = 3\n', encoding='utf-8')
        layered = layered_config(str(path), 'energy')
        assert layered['domain']['k_max'] == 3
        assert layered['forcing']['preset'] == 'manufactured'

    def test_environment_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv('GALERKIN_OUTPUT_DIR', str(tmp_path / 'env'))
        assert layered_config()['output']['directory'] == str(tmp_path / 'env')

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            layered_config(str(tmp_path / 'missing.toml'))


class TestRunSummary:

    def test_checks_default_to_skipped(self):
        summary = RunSummary(command='simulate', config={}, seed=1)
        assert set(summary.checks) == set(CHECK_NAMES)
        assert set(summary.checks.values()) == {'skipped'}
        assert summary.exit_code == 0

    def test_failed_check_sets_exit_code(self):
        summary = RunSummary(command='simulate', config={}, seed=1)
        summary.set_check('energy_equation', True)
        summary.set_check('gronwall_bound', False)
        assert summary.checks['energy_equation'] == 'pass'
        assert summary.exit_code == 1

    def test_unknown_check(self):
        with pytest.raises(ValueError):
            RunSummary(command='simulate', config={}, seed=1).set_check('pressure', True)

    def test_write(self, tmp_path):
        summary = RunSummary(command='simulate', config={'fluid': {'reynolds': 1.0}}, seed=7,
                             details={'ratio': np.float64(0.5), 'bound': float('inf')})
        path = summary.write(tmp_path / 'summary.json')
        data = json.loads(path.read_text(encoding='utf-8'))
        assert data['seed'] == 7
        assert data['details']['ratio'] == 0.5
        assert data['details']['bound'] == 'inf'


class TestInitialData:

    def test_isotropic_stress(self, system_k1):
        config = parse_config('[initial]\npreset = "isotropic_stress"\nvalue = 2.5\n')
        data = initial_data_for(config, system_k1)
        tau = data.tau0(np.array([[0.2, 0.3], [0.5, 0.5]]))
        np.testing.assert_array_equal(tau, np.broadcast_to(2.5 * np.eye(2), (2, 2, 2)))
        assert data.v0 is None and data.f is None

    def test_single_mode(self, system_k2):
        config = parse_config('[initial]\npreset = "single_mode"\nmode = 2\namplitude = 3.0\n')
        data = initial_data_for(config, system_k2)
        points = np.array([[0.2, 0.7]])
        np.testing.assert_allclose(data.v0(points), 3.0 * system_k2.velocity_basis.values(points)[1])

    def test_manufactured(self, system_k2):
        config = parse_config('', preset='steady')
        data = initial_data_for(config, system_k2)
        assert data.v0 is not None and data.tau0 is not None and data.f is not None
        assert data.steady_forcing

    def test_shear_forcing_is_steady(self, system_k2):
        config = parse_config('[forcing]\npreset = "shear"\namplitude = 2.0\n')
        data = initial_data_for(config, system_k2)
        forcing = modal_forcing_for(system_k2, data)
        np.testing.assert_array_equal(forcing(0.0), forcing(0.7))
        assert np.any(forcing(0.0) != 0.0)

    def test_oscillating_forcing_changes_sign(self, system_k2):
        config = parse_config('[forcing]\npreset = "oscillating"\n')
        data = initial_data_for(config, system_k2)
        assert not data.steady_forcing
        forcing = modal_forcing_for(system_k2, data)
        np.testing.assert_allclose(forcing(0.5), -forcing(0.0), atol=1e-14)
