# -*- coding: utf-8 -*-
"""
能量方程核算测试
"""

import numpy as np
import pytest

from analysis.energy import LEDGER_COLUMNS, apriori_bound, continuity_diagnostic, energy_ledger
from analysis.manufactured import manufactured_solution
from dynamics import SolverConfig, simulate
from operators import make_modal_forcing, project_stress


def isotropic_run(system, params, t_final=1.0, dt=1e-3):
    b0 = project_stress(lambda p: np.broadcast_to(np.eye(2), (p.shape[0], 2, 2)),
                        system.stress_basis, system.quad)
    config = SolverConfig(params, t_final=t_final, dt=dt)
    return simulate(config, system.operators, (np.zeros(system.n_modes), b0)), b0


class TestEnergyLedger:

    def test_zero_trajectory(self, system_k2, params):
        config = SolverConfig(params, t_final=0.1, dt=0.01)
        traj = simulate(config, system_k2.operators, (np.zeros(4), np.zeros(12)))
        ledger = energy_ledger(traj, system_k2.operators)
        assert np.all(ledger.residual == 0.0)
        assert ledger.max_relative_residual == 0.0

    def test_isotropic_relaxation_balances(self, system_k2, params):
        traj, b0 = isotropic_run(system_k2, params)
        ledger = energy_ledger(traj, system_k2.operators, params)
        assert ledger.max_abs_residual <= 1e-6 * (b0 @ b0)
        assert np.all(apriori_bound(ledger))

    def test_frame_columns(self, system_k1, params):
        traj, _ = isotropic_run(system_k1, params, t_final=0.01)
        frame = energy_ledger(traj, system_k1.operators).to_frame()
        assert list(frame.columns) == LEDGER_COLUMNS
        assert len(frame) == len(traj)

    def test_explicit_forcing_matches_recorded_work(self, system_k2, params):
        solution = manufactured_solution(params, system_k2.velocity_basis, system_k2.stress_basis, system_k2.quad)
        forcing = make_modal_forcing(system_k2, solution.forcing, steady=True)
        config = SolverConfig(params, t_final=0.1, dt=1e-3)
        traj = simulate(config, system_k2.operators, (np.zeros(4), np.zeros(12)), forcing)
        recorded = energy_ledger(traj, system_k2.operators)
        recomputed = energy_ledger(traj, system_k2.operators, params, forcing)
        np.testing.assert_allclose(recorded.work_integral, recomputed.work_integral, rtol=1e-12)

    @pytest.mark.slow
    def test_forced_run_converges_with_sampling(self, system_k4, params):
        solution = manufactured_solution(params, system_k4.velocity_basis, system_k4.stress_basis, system_k4.quad)
        forcing = make_modal_forcing(system_k4, solution.forcing, steady=True)
        config = SolverConfig(params, t_final=1.0, dt=1e-3)
        traj = simulate(config, system_k4.operators, (np.zeros(16), np.zeros(48)), forcing)

        fine = energy_ledger(traj, system_k4.operators)
        coarse = energy_ledger(traj.subsampled(2), system_k4.operators)
        assert fine.max_relative_residual <= 1e-5
        assert 3.5 <= coarse.max_abs_residual / fine.max_abs_residual <= 4.5


class TestContinuity:

    def test_jumps_shrink_with_sampling(self, system_k2, params):
        traj, _ = isotropic_run(system_k2, params, t_final=0.5)
        fine = continuity_diagnostic(traj, system_k2.operators)
        coarse = continuity_diagnostic(traj.subsampled(2), system_k2.operators)
        assert fine['max_sample_gap'] == pytest.approx(1e-3)
        assert 1.8 <= coarse['max_stress_jump'] / fine['max_stress_jump'] <= 2.2

    def test_relaxation_keeps_velocity_still(self, system_k2, params):
        traj, _ = isotropic_run(system_k2, params, t_final=0.1)
        report = continuity_diagnostic(traj, system_k2.operators)
        assert report['max_velocity_jump'] <= 1e-12
