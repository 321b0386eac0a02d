# -*- coding: utf-8 -*-
"""
能量方程核算

    Re‖v(t)‖² + 2(1 − a)∫‖∇v‖² + (1/a)∫‖τ‖² + (We/2a)‖τ(t)‖²
        = 2∫(f, v) + Re‖v0‖² + (We/2a)‖τ0‖²

时间积分在轨迹的采样网格上用复合梯形公式计算。
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid

from dynamics import Trajectory
from log_config import get_logger
from operators import FluidParams, GalerkinOperators

logger = get_logger(__name__)

LEDGER_COLUMNS = ['t', 'kinetic', 'viscous_integral', 'stress_integral', 'stress_energy',
                  'work_integral', 'initial_terms', 'residual']


@dataclass(frozen=True, eq=False)
class EnergyLedger:
    """能量方程各项的逐样本记录，residual = 左端 − 右端"""
    times: np.ndarray
    kinetic: np.ndarray
    viscous_integral: np.ndarray
    stress_integral: np.ndarray
    stress_energy: np.ndarray
    work_integral: np.ndarray
    initial_terms: np.ndarray
    residual: np.ndarray

    @property
    def scale(self) -> float:
        """相对残差的量纲尺度：各项绝对值的最大者"""
        terms = np.concatenate([
            np.abs(self.kinetic + self.stress_energy),
            np.abs(self.viscous_integral + self.stress_integral),
            np.abs(self.work_integral),
            np.abs(self.initial_terms),
        ])
        return float(np.max(terms))

    @property
    def max_abs_residual(self) -> float:
        return float(np.max(np.abs(self.residual)))

    @property
    def max_relative_residual(self) -> float:
        scale = self.scale
        if scale == 0.0:
            return 0.0
        return self.max_abs_residual / scale

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            't': self.times,
            'kinetic': self.kinetic,
            'viscous_integral': self.viscous_integral,
            'stress_integral': self.stress_integral,
            'stress_energy': self.stress_energy,
            'work_integral': self.work_integral,
            'initial_terms': self.initial_terms,
            'residual': self.residual,
        }, columns=LEDGER_COLUMNS)


def energy_ledger(traj: Trajectory, ops: GalerkinOperators, params: Optional[FluidParams] = None,
                  forcing: Optional[Callable[[float], np.ndarray]] = None) -> EnergyLedger:
    """
    沿轨迹核算能量方程

    Args:
        traj: 轨迹，至少一个样本
        ops: 装配好的算子，范数由 M、K 与单位 Gram 矩阵给出
        params: 流体参数，默认取轨迹记录的参数
        forcing: 模态外力 t -> F(t)，None 时使用轨迹记录的功率

    Returns:
        EnergyLedger: 各项与残差
    """
    if len(traj) == 0:
        raise ValueError("轨迹为空，无法核算能量")
    params = params or traj.params
    times = traj.times
    a, b = traj.a, traj.b

    velocity_sq = np.einsum('ij,jk,ik->i', a, ops.mass, a)
    gradient_sq = np.einsum('ij,jk,ik->i', a, ops.stiffness, a)
    stress_sq = np.einsum('ij,ij->i', b, b)

    if forcing is None:
        work_rate = traj.work_rate
    else:
        work_rate = 2.0 * np.array([a_k @ forcing(t) for t, a_k in zip(times, a)])

    kinetic = params.reynolds * velocity_sq
    stress_energy = params.stress_energy_factor * stress_sq
    viscous_integral = cumulative_trapezoid(2.0 * params.viscous_factor * gradient_sq, times, initial=0.0)
    stress_integral = cumulative_trapezoid(stress_sq / params.retardation, times, initial=0.0)
    work_integral = cumulative_trapezoid(work_rate, times, initial=0.0)
    initial_terms = np.full_like(times, kinetic[0] + stress_energy[0])

    residual = (kinetic + viscous_integral + stress_integral + stress_energy) - (work_integral + initial_terms)
    ledger = EnergyLedger(times, kinetic, viscous_integral, stress_integral, stress_energy,
                          work_integral, initial_terms, residual)
    logger.info(f"📊 能量核算: {len(times)}个样本, max|残差|={ledger.max_abs_residual:.3e}, "
                f"相对残差={ledger.max_relative_residual:.3e}")
    return ledger


def continuity_diagnostic(traj: Trajectory, ops: GalerkinOperators) -> dict:
    """
    相邻样本间 ‖v‖_L2 与 ‖τ‖_L2 的最大跳跃，随步长线性趋于零

    Returns:
        dict: max_velocity_jump, max_stress_jump, max_sample_gap
    """
    velocity_norm = np.sqrt(np.einsum('ij,jk,ik->i', traj.a, ops.mass, traj.a))
    stress_norm = np.linalg.norm(traj.b, axis=1)
    if len(traj) < 2:
        return {'max_velocity_jump': 0.0, 'max_stress_jump': 0.0, 'max_sample_gap': 0.0}
    return {
        'max_velocity_jump': float(np.max(np.abs(np.diff(velocity_norm)))),
        'max_stress_jump': float(np.max(np.abs(np.diff(stress_norm)))),
        'max_sample_gap': float(np.max(np.diff(traj.times))),
    }


def apriori_bound(ledger: EnergyLedger) -> np.ndarray:
    """
    去掉耗散项后的先验估计：Re‖v‖² + (We/2a)‖τ‖² ≤ 初始项 + 外力功，
    容差为该样本的能量残差

    Returns:
        np.ndarray: 逐样本布尔值
    """
    energy = ledger.kinetic + ledger.stress_energy
    bound = ledger.initial_terms + ledger.work_integral
    slack = np.abs(ledger.residual) + 1e-12 * max(ledger.scale, 1.0)
    return energy <= bound + slack
