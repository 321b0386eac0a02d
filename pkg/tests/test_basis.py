# -*- coding: utf-8 -*-
"""
基函数与求积规则测试
"""

import math

import numpy as np
import pytest

from basis import (
    DomainSpec,
    build_stress_basis,
    build_velocity_basis,
    default_quad_order,
    evaluate_field,
    quadrature_grid,
)
from operators import assemble_convection, assemble_mass, assemble_stiffness


def boundary_points(rng, n=100, length=1.0):
    s = rng.uniform(0.0, length, n)
    side = rng.integers(0, 4, n)
    points = np.empty((n, 2))
    points[side == 0] = np.column_stack([s, np.zeros(n)])[side == 0]
    points[side == 1] = np.column_stack([s, np.full(n, length)])[side == 1]
    points[side == 2] = np.column_stack([np.zeros(n), s])[side == 2]
    points[side == 3] = np.column_stack([np.full(n, length), s])[side == 3]
    return points


class TestDomainSpec:

    def test_default_side_lengths(self):
        assert DomainSpec().side_length == 1.0
        assert DomainSpec('periodic_torus').side_length == pytest.approx(2 * math.pi)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            DomainSpec('disk')
        with pytest.raises(ValueError):
            DomainSpec(side_length=-1.0)


class TestQuadrature:

    def test_weights_sum_to_area(self, square, torus):
        assert quadrature_grid(square, 2).weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert quadrature_grid(torus, 6).weights.sum() == pytest.approx(4 * math.pi ** 2, abs=1e-12)

    def test_polynomial_exactness(self, square):
        quad = quadrature_grid(square, 4)
        x, y = quad.nodes[:, 0], quad.nodes[:, 1]
        assert abs(quad.integrate(x ** 2 * y ** 2) - 1.0 / 9.0) < 1e-14

    def test_trig_product(self, square):
        quad = quadrature_grid(square, 24)
        x, y = quad.nodes[:, 0], quad.nodes[:, 1]
        value = quad.integrate(np.sin(np.pi * x) ** 2 * np.sin(np.pi * y) ** 2)
        assert abs(value - 0.25) < 1e-12

    def test_torus_trig_exactness(self, torus):
        quad = quadrature_grid(torus, 8)
        x, y = quad.nodes[:, 0], quad.nodes[:, 1]
        value = quad.integrate(np.cos(3 * x) ** 2 * np.sin(y) ** 2)
        assert value == pytest.approx(math.pi ** 2, abs=1e-12)

    def test_rejects_low_order(self, square):
        with pytest.raises(ValueError):
            quadrature_grid(square, 1)

    def test_nodes_are_read_only(self, square):
        quad = quadrature_grid(square, 4)
        with pytest.raises(ValueError):
            quad.nodes[0, 0] = 0.5

    def test_doubling_order_is_stable(self, square):
        basis = build_velocity_basis(square, 3)
        order = default_quad_order(3)
        for assemble in (assemble_mass, assemble_stiffness, assemble_convection):
            coarse = assemble(basis, quadrature_grid(square, order))
            fine = assemble(basis, quadrature_grid(square, 2 * order))
            assert np.max(np.abs(coarse - fine)) <= 1e-10 * np.max(np.abs(fine))


class TestVelocityBasis:

    def test_mode_counts(self, square, torus):
        assert build_velocity_basis(square, 2).n_modes == 4
        assert build_velocity_basis(square, 3).n_modes == 9
        assert build_velocity_basis(torus, 1).n_modes == 8

    def test_rejects_bad_k_max(self, square):
        with pytest.raises(ValueError):
            build_velocity_basis(square, 0)

    def test_noslip_on_boundary(self, square, rng):
        for k_max in (1, 3):
            basis = build_velocity_basis(square, k_max)
            values = basis.values(boundary_points(rng))
            assert np.max(np.abs(values)) <= 1e-12

    @pytest.mark.parametrize('mode', ['noslip_square', 'periodic_torus'])
    def test_pointwise_divergence_free(self, mode, rng):
        spec = DomainSpec(mode)
        basis = build_velocity_basis(spec, 3)
        points = rng.uniform(0.0, spec.side_length, (100, 2))
        assert np.max(np.abs(basis.divergences(points))) <= 1e-12

    def test_values_match_stream_function(self, square, rng):
        basis = build_velocity_basis(square, 2)
        points = rng.uniform(0.0, 1.0, (20, 2))
        grad_psi = basis.stream_gradients(points)
        values = basis.values(points)
        np.testing.assert_allclose(values[..., 0], grad_psi[..., 1], atol=1e-14)
        np.testing.assert_allclose(values[..., 1], -grad_psi[..., 0], atol=1e-14)

    def test_first_mode_closed_form(self, square):
        basis = build_velocity_basis(square, 1)
        points = np.array([[0.3, 0.7]])
        psi = basis.stream_values(points)[0, 0]
        expected = np.sin(np.pi * 0.3) ** 2 * np.sin(np.pi * 0.7) ** 2
        assert psi == pytest.approx(expected, abs=1e-14)

    def test_gradients_match_finite_differences(self, square, rng):
        basis = build_velocity_basis(square, 2)
        points = rng.uniform(0.1, 0.9, (10, 2))
        h = 1e-6
        grads = basis.gradients(points)
        for direction in range(2):
            shift = np.zeros(2)
            shift[direction] = h
            fd = (basis.values(points + shift) - basis.values(points - shift)) / (2 * h)
            np.testing.assert_allclose(grads[..., :, direction], fd, atol=1e-6)

    def test_laplacian_matches_finite_differences(self, square, rng):
        basis = build_velocity_basis(square, 2)
        points = rng.uniform(0.1, 0.9, (10, 2))
        h = 1e-5
        fd = np.zeros_like(basis.values(points))
        for direction in range(2):
            shift = np.zeros(2)
            shift[direction] = h
            fd += (basis.gradients(points + shift)[..., direction]
                   - basis.gradients(points - shift)[..., direction]) / (2 * h)
        np.testing.assert_allclose(basis.laplacians(points), fd, atol=1e-5)

    def test_symmetric_gradient_is_symmetric(self, square, rng):
        basis = build_velocity_basis(square, 2)
        strain = basis.symmetric_gradients(rng.uniform(0.0, 1.0, (15, 2)))
        np.testing.assert_array_equal(strain[..., 0, 1], strain[..., 1, 0])

    def test_permuted_rejects_non_permutation(self, square):
        basis = build_velocity_basis(square, 2)
        with pytest.raises(ValueError):
            basis.permuted([0, 0, 1, 2])


class TestStressBasis:

    def test_mode_counts(self, square):
        assert build_stress_basis(square, 3).m_modes == 27
        assert build_stress_basis(square, 2).m_modes == 12

    @staticmethod
    def gram(basis, quad):
        values = basis.values(quad.nodes).reshape(basis.m_modes, quad.n_points, 4)
        return np.einsum('iqc,jqc,q->ij', values, values, quad.weights)

    @pytest.mark.parametrize('mode', ['noslip_square', 'periodic_torus'])
    def test_gram_is_identity(self, mode):
        spec = DomainSpec(mode)
        basis = build_stress_basis(spec, 2)
        gram = self.gram(basis, quadrature_grid(spec, default_quad_order(2)))
        assert np.max(np.abs(gram - np.eye(basis.m_modes))) <= 1e-10

    @pytest.mark.parametrize('mode', ['noslip_square', 'periodic_torus'])
    @pytest.mark.parametrize('k_max', [1, 2, 3, 4])
    def test_gram_at_lowest_admissible_order(self, mode, k_max):
        spec = DomainSpec(mode)
        basis = build_stress_basis(spec, k_max)
        gram = self.gram(basis, quadrature_grid(spec, 2 * k_max + 6))
        assert np.max(np.abs(gram - np.eye(basis.m_modes))) <= 1e-10

    def test_default_order(self):
        assert default_quad_order(2) == 12
        assert quadrature_grid(DomainSpec(), default_quad_order(2)).n_points == 24 ** 2

    def test_values_symmetric(self, square, rng):
        basis = build_stress_basis(square, 2)
        values = basis.values(rng.uniform(0.0, 1.0, (30, 2)))
        np.testing.assert_array_equal(values, np.swapaxes(values, -1, -2))

    def test_family_ordering(self, square):
        basis = build_stress_basis(square, 2)
        assert [basis.family_of(i) for i in range(6)] == ['11', '12', '22', '11', '12', '22']
        np.testing.assert_array_equal(basis.family_indices('22'), [2, 5, 8, 11])

    def test_divergence_matches_finite_differences(self, square, rng):
        basis = build_stress_basis(square, 2)
        points = rng.uniform(0.1, 0.9, (10, 2))
        h = 1e-6
        fd = np.zeros(basis.divergences(points).shape)
        for direction in range(2):
            shift = np.zeros(2)
            shift[direction] = h
            fd += (basis.values(points + shift)[..., direction]
                   - basis.values(points - shift)[..., direction]) / (2 * h)
        np.testing.assert_allclose(basis.divergences(points), fd, atol=1e-6)

    def test_torus_contains_constant(self, torus):
        basis = build_stress_basis(torus, 1)
        points = np.array([[0.1, 0.2], [3.0, 5.0]])
        values = basis.values(points)
        np.testing.assert_allclose(values[0, 0], values[0, 1])
        assert values[0, 0, 0, 0] == pytest.approx(1.0 / (2 * math.pi))


class TestEvaluateField:

    def test_linearity(self, square, rng):
        basis = build_velocity_basis(square, 2)
        points = rng.uniform(0.0, 1.0, (25, 2))
        assert np.all(evaluate_field(np.zeros(4), basis, points) == 0.0)

        single = evaluate_field(np.eye(4)[2], basis, points)
        np.testing.assert_array_equal(single, basis.values(points)[2])

        total = evaluate_field(np.ones(4), basis, points)
        expected = sum(evaluate_field(np.eye(4)[j], basis, points) for j in range(4))
        np.testing.assert_allclose(total, expected, atol=1e-14)

    def test_stress_field(self, square, rng):
        basis = build_stress_basis(square, 1)
        points = rng.uniform(0.0, 1.0, (5, 2))
        field = evaluate_field(np.array([1.0, 0.0, 1.0]), basis, points)
        np.testing.assert_allclose(field[:, 0, 0], field[:, 1, 1])
        assert np.all(field[:, 0, 1] == 0.0)

    def test_length_mismatch(self, square):
        basis = build_velocity_basis(square, 2)
        with pytest.raises(ValueError):
            evaluate_field(np.ones(3), basis, np.zeros((1, 2)))
