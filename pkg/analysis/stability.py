# -*- coding: utf-8 -*-
"""
两条轨迹的稳定性（唯一性）实验

对两组数据分别推进，记录差值
    delta(t) = ‖u(t)‖² + ‖σ(t)‖²，u = v1 − v2，σ = τ1 − τ2
并从本次运行中拟合常数 C，使逐段速率条件
    log delta(t_{i+1}) − log delta(t_i) ≤ C·∫_{t_i}^{t_{i+1}} ξ
在每个采样区间上成立；由此 Grönwall 型界 delta(t) ≤ delta(0)·exp(C·∫₀ᵗ ξ)
也在每个样本上成立。只满足积分界的最小常数另行报告。
ξ 同时给出 V 范数 (1 − a)‖∇v2‖² 与 L2 范数 ‖v2‖² 两种取法。
"""

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid

from dynamics import SolverConfig, Trajectory, simulate
from log_config import get_logger, log_performance
from operators import (
    FluidParams,
    GalerkinOperators,
    GalerkinSystem,
    InitialData,
    make_modal_forcing,
    project_initial,
)

logger = get_logger(__name__)

# 逐段速率检验的相对容差
RATE_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class StabilityReport:
    times: np.ndarray
    delta: np.ndarray
    xi: np.ndarray
    xi_integral: np.ndarray
    gronwall_bound: np.ndarray
    fitted_C: float
    fitted_C_integral: float
    xi_l2: np.ndarray
    xi_l2_integral: np.ndarray
    gronwall_bound_l2: np.ndarray
    fitted_C_l2: float
    rate_violations: int
    convection_constant: float

    @property
    def bound_holds(self) -> bool:
        """fitted_C 有限且每个样本都满足界"""
        if not np.isfinite(self.fitted_C):
            return False
        slack = 1e-10 * np.maximum(self.gronwall_bound, np.finfo(float).tiny)
        return bool(np.all(self.delta <= self.gronwall_bound + slack))

    @property
    def rate_holds(self) -> bool:
        """逐段速率条件在 fitted_C 下没有违反"""
        return bool(np.isfinite(self.fitted_C)) and self.rate_violations == 0

    @property
    def passed(self) -> bool:
        return self.bound_holds and self.rate_holds

    @property
    def identical(self) -> bool:
        return bool(np.all(self.delta == 0.0))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            't': self.times,
            'delta': self.delta,
            'gronwall_bound': self.gronwall_bound,
            'xi': self.xi,
            'xi_l2': self.xi_l2,
            'gronwall_bound_l2': self.gronwall_bound_l2,
        })

    def summary(self) -> dict:
        return {
            'fitted_C': self.fitted_C,
            'fitted_C_integral': self.fitted_C_integral,
            'fitted_C_l2': self.fitted_C_l2,
            'delta0': float(self.delta[0]),
            'max_delta': float(np.max(self.delta)),
            'xi_integral': float(self.xi_integral[-1]),
            'rate_violations': self.rate_violations,
            'convection_constant': self.convection_constant,
            'bound_holds': self.bound_holds,
            'rate_holds': self.rate_holds,
        }


def fit_gronwall_constant(delta: np.ndarray, xi_integral: np.ndarray) -> float:
    """
    使 delta(t) ≤ delta(0)·exp(C·Ξ(t)) 处处成立的最小 C ≥ 0

    delta(0) = 0 时：delta ≡ 0 则 C = 0，否则 C = ∞；
    Ξ(t) = 0 而 delta(t) > delta(0) 时 C = ∞。
    """
    delta0 = float(delta[0])
    if delta0 == 0.0:
        return 0.0 if np.all(delta == 0.0) else float('inf')

    growth = delta > delta0
    if np.any(growth & (xi_integral <= 0.0)):
        return float('inf')

    usable = growth & (xi_integral > 0.0)
    if not np.any(usable):
        return 0.0
    exponents = np.log(delta[usable] / delta0) / xi_integral[usable]
    return max(0.0, float(np.max(exponents)))


def fit_rate_constant(delta: np.ndarray, xi_integral: np.ndarray) -> float:
    """
    使每个采样区间都满足 Δlog delta ≤ C·ΔΞ 的最小 C ≥ 0

    delta 出现 0 而不恒为 0，或 ΔΞ = 0 的区间上 delta 增长时 C = ∞。
    """
    if np.all(delta == 0.0):
        return 0.0
    if np.any(delta <= 0.0):
        return float('inf')
    increments = np.diff(np.log(delta))
    xi_steps = np.diff(xi_integral)
    growth = increments > 0.0
    if np.any(growth & (xi_steps <= 0.0)):
        return float('inf')
    usable = growth & (xi_steps > 0.0)
    if not np.any(usable):
        return 0.0
    return float(np.max(increments[usable] / xi_steps[usable]))


def _fitted_constants(delta: np.ndarray, xi_integral: np.ndarray):
    """(逐段速率常数与积分界常数中的较大者, 积分界常数)"""
    integral = fit_gronwall_constant(delta, xi_integral)
    return max(fit_rate_constant(delta, xi_integral), integral), integral


def _bound(delta0: float, constant: float, xi_integral: np.ndarray) -> np.ndarray:
    if not np.isfinite(constant):
        return np.where(xi_integral > 0.0, np.inf, delta0)
    return delta0 * np.exp(constant * xi_integral)


def count_rate_violations(delta: np.ndarray, xi_integral: np.ndarray, constant: float) -> int:
    """逐段检验 log delta 的增量 ≤ C·ΔΞ"""
    if not np.isfinite(constant) or np.any(delta <= 0.0):
        return 0 if np.all(delta == 0.0) else int(np.sum(np.diff(delta) > 0.0))
    increments = np.diff(np.log(delta))
    allowed = constant * np.diff(xi_integral)
    return int(np.sum(increments > allowed + RATE_TOLERANCE * np.maximum(1.0, np.abs(allowed))))


def stability_from_trajectories(traj1: Trajectory, traj2: Trajectory, ops: GalerkinOperators,
                                params: FluidParams) -> StabilityReport:
    """由两条在相同时间网格上的轨迹构造报告"""
    if traj1.times.shape != traj2.times.shape or np.any(traj1.times != traj2.times):
        raise ValueError("两条轨迹的时间网格不一致")

    u = traj1.a - traj2.a
    sigma = traj1.b - traj2.b
    v2 = traj2.a
    times = traj1.times

    delta = np.einsum('ij,jk,ik->i', u, ops.mass, u) + np.einsum('ij,ij->i', sigma, sigma)
    xi = params.viscous_factor * np.einsum('ij,jk,ik->i', v2, ops.stiffness, v2)
    xi_l2 = np.einsum('ij,jk,ik->i', v2, ops.mass, v2)
    xi_integral = cumulative_trapezoid(xi, times, initial=0.0)
    xi_l2_integral = cumulative_trapezoid(xi_l2, times, initial=0.0)

    fitted, fitted_integral = _fitted_constants(delta, xi_integral)
    fitted_l2, _ = _fitted_constants(delta, xi_l2_integral)

    # Re|((u·∇)v2, u)| ≤ C5·‖u‖·‖u‖_V·‖v2‖_V
    u_l2 = np.sqrt(np.einsum('ij,jk,ik->i', u, ops.mass, u))
    u_v = np.sqrt(params.viscous_factor * np.einsum('ij,jk,ik->i', u, ops.stiffness, u))
    v2_v = np.sqrt(xi)
    convection = np.array([params.reynolds * abs(ops.trilinear(u_k, v_k, u_k)) for u_k, v_k in zip(u, v2)])
    denominator = u_l2 * u_v * v2_v
    positive = denominator > 0.0
    convection_constant = float(np.max(convection[positive] / denominator[positive])) if np.any(positive) else 0.0

    return StabilityReport(
        times=times,
        delta=delta,
        xi=xi,
        xi_integral=xi_integral,
        gronwall_bound=_bound(delta[0], fitted, xi_integral),
        fitted_C=fitted,
        fitted_C_integral=fitted_integral,
        xi_l2=xi_l2,
        xi_l2_integral=xi_l2_integral,
        gronwall_bound_l2=_bound(delta[0], fitted_l2, xi_l2_integral),
        fitted_C_l2=fitted_l2,
        rate_violations=count_rate_violations(delta, xi_integral, fitted),
        convection_constant=convection_constant,
    )


def stability_experiment(config: SolverConfig, system: GalerkinSystem, data1: InitialData,
                         data2: InitialData) -> StabilityReport:
    """
    在相同网格与步长上推进两组数据并比较

    Args:
        config: 时间推进配置
        system: 离散系统
        data1: 第一组初值与外力
        data2: 第二组初值与外力

    Returns:
        StabilityReport: 稳定性报告

    Raises:
        NumericalInstabilityError: 任一轨迹失稳
    """
    start_time = time.time()
    ops = system.operators

    trajectories = []
    for data in (data1, data2):
        initial = project_initial(system, data)
        forcing = make_modal_forcing(system, data.f, steady=data.steady_forcing)
        trajectories.append(simulate(config, ops, initial, forcing))

    report = stability_from_trajectories(trajectories[0], trajectories[1], ops, config.params)
    log_performance('stability_experiment', time.time() - start_time,
                    samples=len(report.times), fitted_C=f"{report.fitted_C:.4g}",
                    delta0=f"{report.delta[0]:.3e}")
    if report.passed:
        logger.info(f"✅ Grönwall 界与逐段速率条件在全部 {len(report.times)} 个样本上成立 (C={report.fitted_C:.4g})")
    else:
        logger.warning(f"❌ Grönwall 检验不成立 (C={report.fitted_C}, 速率违反 {report.rate_violations} 处)")
    return report


def perturb_initial_data(data: InitialData, system: GalerkinSystem, epsilon: float,
                         mode: int = 1) -> InitialData:
    """
    在初始速度上叠加 ε 倍的单个速度基模态

    Args:
        data: 原始数据
        system: 离散系统
        epsilon: 扰动幅值
        mode: 模态编号（从 1 开始）

    Returns:
        InitialData: 扰动后的数据，外力不变
    """
    if not 1 <= mode <= system.n_modes:
        raise ValueError(f"模态编号必须在 1..{system.n_modes} 之间，当前为 {mode}")
    basis = system.velocity_basis
    base_v0 = data.v0

    def perturbed_v0(points):
        values = epsilon * basis.values(points)[mode - 1]
        if base_v0 is not None:
            values = values + base_v0(points)
        return values

    return InitialData(v0=perturbed_v0, tau0=data.tau0, f=data.f, steady_forcing=data.steady_forcing)


def epsilon_scaling(config: SolverConfig, system: GalerkinSystem, data: InitialData, epsilon: float,
                    mode: int = 1) -> Optional[float]:
    """
    扰动幅值减半时 delta 曲线的最大相对偏离 max|4·delta(ε/2)/delta(ε) − 1|，
    线性化区域内应接近 0
    """
    full = stability_experiment(config, system, data, perturb_initial_data(data, system, epsilon, mode))
    half = stability_experiment(config, system, data, perturb_initial_data(data, system, 0.5 * epsilon, mode))
    positive = full.delta > 0.0
    if not np.any(positive):
        return None
    return float(np.max(np.abs(4.0 * half.delta[positive] / full.delta[positive] - 1.0)))
