# -*- coding: utf-8 -*-
"""
人造稳态解

取 v* 为第一个速度基模态（正方形上流函数 sin²(πx)·sin²(πy)），压力取零，
由稳态方程反推外力：
- continuous：τ* = 2a·E(v*)，f* = Re(v*·∇)v* − Δv*，是连续问题的精确稳态解；
  离散稳态残差由应力投影误差控制
- galerkin：τ*_h = Π(2a·E(v*))，f* = Re(v*·∇)v* − (1 − a)Δv* − ∇·τ*_h，
  是 Galerkin 系统的精确稳态
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from basis import QuadratureRule, StressBasis, VelocityBasis, default_quad_order, quadrature_grid
from dynamics import SimulationState, rhs
from log_config import get_logger
from operators import FluidParams, GalerkinSystem, InitialData, project_forcing, project_stress

logger = get_logger(__name__)

GALERKIN = 'galerkin'
CONTINUOUS = 'continuous'
VARIANTS = (GALERKIN, CONTINUOUS)


@dataclass(frozen=True, eq=False)
class ManufacturedSolution:
    """
    Attributes:
        variant: galerkin / continuous
        amplitude: v* 的幅值
        a_star: v* 的模态系数（v* 在速度基张成空间内）
        b_star: τ* 的应力投影系数
        velocity: v*(points) -> (P, 2)
        stress: τ*(points) -> (P, 2, 2)
        forcing: f*(points, t) -> (P, 2)，与时间无关
    """
    variant: str
    amplitude: float
    a_star: np.ndarray
    b_star: np.ndarray
    velocity: Callable[[np.ndarray], np.ndarray]
    stress: Callable[[np.ndarray], np.ndarray]
    forcing: Callable[[np.ndarray, float], np.ndarray]

    def initial_data(self) -> InitialData:
        return InitialData(v0=self.velocity, tau0=self.stress, f=self.forcing, steady_forcing=True)


@dataclass(frozen=True)
class SteadyResidual:
    """人造解在投影系数处的离散稳态残差"""
    velocity_rate: np.ndarray
    stress_rate: np.ndarray
    residual_dual_norm: float
    projection_error: float

    @property
    def max_rate(self) -> float:
        return float(max(np.max(np.abs(self.velocity_rate)), np.max(np.abs(self.stress_rate), initial=0.0)))


def manufactured_solution(params: FluidParams, vbasis: VelocityBasis, sbasis: Optional[StressBasis] = None,
                          quad: Optional[QuadratureRule] = None, variant: str = GALERKIN,
                          amplitude: float = 1.0) -> ManufacturedSolution:
    """
    构造人造稳态解

    Args:
        params: 流体参数
        vbasis: 速度基
        sbasis: 应力基，galerkin 变体必需，用于计算 b*
        quad: 求积规则，默认按 k_max 选取
        variant: galerkin / continuous
        amplitude: v* 的幅值

    Returns:
        ManufacturedSolution: 人造解
    """
    if variant not in VARIANTS:
        raise ValueError(f"未知的人造解变体: {variant}，可选: {', '.join(VARIANTS)}")
    if variant == GALERKIN and sbasis is None:
        raise ValueError("galerkin 变体需要应力基")
    quad = quad or quadrature_grid(vbasis.domain, default_quad_order(vbasis.k_max))

    re = params.reynolds
    alpha = params.retardation

    def velocity(points):
        return amplitude * vbasis.values(points)[0]

    def strain(points):
        return amplitude * vbasis.symmetric_gradients(points)[0]

    def stress(points):
        return 2.0 * alpha * strain(points)

    def convective(points):
        v = velocity(points)
        grad = amplitude * vbasis.gradients(points)[0]
        return np.einsum('Pml,Pl->Pm', grad, v)

    def laplacian(points):
        return amplitude * vbasis.laplacians(points)[0]

    a_star = np.zeros(vbasis.n_modes)
    a_star[0] = amplitude
    b_star = project_stress(stress, sbasis, quad) if sbasis is not None else np.zeros(0)

    if variant == CONTINUOUS:
        # ∇·(2a·E(v)) = a·Δv
        def forcing(points, t=0.0):
            return re * convective(points) - laplacian(points)
    else:
        def forcing(points, t=0.0):
            discrete_div = np.tensordot(b_star, sbasis.divergences(points), axes=(0, 0))
            return re * convective(points) - params.viscous_factor * laplacian(points) - discrete_div

    logger.debug(f"人造解构造完成: variant={variant}, amplitude={amplitude}, n_modes={vbasis.n_modes}")
    return ManufacturedSolution(variant, amplitude, a_star, b_star, velocity, stress, forcing)


def steady_residual(solution: ManufacturedSolution, system: GalerkinSystem,
                    params: FluidParams) -> SteadyResidual:
    """
    人造解投影系数处的 (da/dt, db/dt)，残差对偶范数 sqrt(2·RᵀK⁻¹R)
    与应力投影误差 ‖(I − Π)τ*‖

    Returns:
        SteadyResidual: 残差报告
    """
    ops = system.operators
    quad = system.quad
    a_star = solution.a_star
    b_star = project_stress(solution.stress, system.stress_basis, quad)
    F = project_forcing(solution.forcing, 0.0, system.velocity_basis, quad)

    da, db = rhs(SimulationState(0.0, a_star, b_star), ops, params, F)
    # 动量方程残差 R = Re·M·da
    residual = params.reynolds * (ops.mass @ da)
    dual_norm = float(np.sqrt(max(0.0, 2.0 * residual @ np.linalg.solve(ops.stiffness, residual))))

    projected = np.tensordot(b_star, system.stress_basis.values(quad.nodes), axes=(0, 0))
    difference = solution.stress(quad.nodes) - projected
    projection_error = float(np.sqrt(np.sum(difference ** 2, axis=(1, 2)) @ quad.weights))

    return SteadyResidual(da, db, dual_norm, projection_error)
