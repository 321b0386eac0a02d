# -*- coding: utf-8 -*-
"""
人造稳态解测试
"""

import numpy as np
import pytest

from analysis.manufactured import CONTINUOUS, GALERKIN, manufactured_solution, steady_residual
from dynamics import SolverConfig, simulate
from operators import FluidParams, build_galerkin_system, make_modal_forcing, project_initial


class TestConstruction:

    def test_galerkin_requires_stress_basis(self, system_k2, params):
        with pytest.raises(ValueError):
            manufactured_solution(params, system_k2.velocity_basis, variant=GALERKIN)

    def test_unknown_variant(self, system_k2, params):
        with pytest.raises(ValueError):
            manufactured_solution(params, system_k2.velocity_basis, system_k2.stress_basis, variant='exact')

    def test_stress_is_symmetric(self, system_k2, params, rng):
        solution = manufactured_solution(params, system_k2.velocity_basis, system_k2.stress_basis)
        tau = solution.stress(rng.uniform(0.0, 1.0, (20, 2)))
        np.testing.assert_allclose(tau, np.swapaxes(tau, 1, 2), atol=1e-14)

    def test_small_amplitude_gives_small_stress(self, system_k2, params, rng):
        solution = manufactured_solution(params, system_k2.velocity_basis, system_k2.stress_basis,
                                         amplitude=1e-12)
        assert np.max(np.abs(solution.stress(rng.uniform(0.0, 1.0, (20, 2))))) <= 1e-10

    def test_velocity_is_first_mode(self, system_k2, params):
        solution = manufactured_solution(params, system_k2.velocity_basis, system_k2.stress_basis, amplitude=2.0)
        a0, _ = project_initial(system_k2, solution.initial_data())
        np.testing.assert_allclose(a0, [2.0, 0.0, 0.0, 0.0], atol=1e-12)


class TestSteadyResidual:

    @pytest.mark.parametrize('reynolds', [1.0, 10.0])
    def test_galerkin_variant_is_discrete_steady_state(self, system_k2, reynolds):
        params = FluidParams(reynolds=reynolds)
        solution = manufactured_solution(params, system_k2.velocity_basis, system_k2.stress_basis, system_k2.quad)
        residual = steady_residual(solution, system_k2, params)
        assert residual.max_rate <= 1e-9

    @pytest.mark.parametrize('k_max', [1, 2, 3])
    def test_continuous_residual_bounded_by_projection(self, square, params, k_max):
        system = build_galerkin_system(square, k_max)
        solution = manufactured_solution(params, system.velocity_basis, system.stress_basis,
                                         system.quad, variant=CONTINUOUS)
        residual = steady_residual(solution, system, params)
        assert residual.residual_dual_norm <= residual.projection_error * (1 + 1e-8) + 1e-12
        assert np.max(np.abs(residual.stress_rate)) <= 1e-10

    def test_projection_error_decreases(self, square, params):
        errors = []
        for k_max in (1, 2, 4):
            system = build_galerkin_system(square, k_max)
            solution = manufactured_solution(params, system.velocity_basis, system.stress_basis,
                                             system.quad, variant=CONTINUOUS)
            errors.append(steady_residual(solution, system, params).projection_error)
        assert errors[0] > errors[1] > errors[2]


class TestSteadyRun:

    def test_trajectory_stays_on_manufactured_state(self, system_k4, params):
        solution = manufactured_solution(params, system_k4.velocity_basis, system_k4.stress_basis, system_k4.quad)
        data = solution.initial_data()
        a0, b0 = project_initial(system_k4, data)
        forcing = make_modal_forcing(system_k4, data.f, steady=True)
        config = SolverConfig(params, t_final=1.0, dt=1e-3, output_stride=100)
        traj = simulate(config, system_k4.operators, (a0, b0), forcing)
        assert np.max(np.abs(traj.a - solution.a_star)) <= 1e-6
        assert np.max(np.abs(traj.b - solution.b_star)) <= 1e-6
