# -*- coding: utf-8 -*-
"""
时间推进模块
对耦合的 Galerkin 常微分方程组

    Re·M·a' = −Re·N(a) − (1 − a)·K·a − Dᵀ·b + F(t)
    We·b'   = −b + 2a·D·a

做时间积分，提供 rk4、imex、exact_stress 三种格式
"""

import math
import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import linalg

from config import RK4_STABILITY_SAFETY
from log_config import LoggerMixin, get_logger, log_performance
from operators import FluidParams, GalerkinOperators
from utils import is_integer, is_real

logger = get_logger(__name__)

RK4 = 'rk4'
IMEX = 'imex'
EXACT_STRESS = 'exact_stress'
SCHEMES = (RK4, IMEX, EXACT_STRESS)

ModalForcing = Callable[[float], np.ndarray]


class NumericalInstabilityError(RuntimeError):
    """时间推进出现非有限系数，携带最后一个有限状态"""

    def __init__(self, message: str, last_state: 'SimulationState', time: float):
        super().__init__(message)
        self.last_state = last_state
        self.time = time


@dataclass(frozen=True, eq=False)
class SimulationState:
    """时刻 t 的速度系数 a 与应力系数 b"""
    t: float
    a: np.ndarray
    b: np.ndarray

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b)))


@dataclass(frozen=True)
class SolverConfig:
    """
    时间推进配置

    Attributes:
        params: 流体参数
        t_final: 终止时间 T
        dt: 时间步长，0 < dt ≤ T
        scheme: rk4 / imex / exact_stress
        output_stride: 每隔多少步记录一次，≥ 1
    """
    params: FluidParams
    t_final: float = 1.0
    dt: float = 1e-3
    scheme: str = RK4
    output_stride: int = 1

    def __post_init__(self):
        errors = self.validation_errors(self.t_final, self.dt, self.scheme, self.output_stride)
        if errors:
            raise ValueError('; '.join(errors))

    @staticmethod
    def validation_errors(t_final, dt, scheme, output_stride) -> list:
        errors = []
        if not (is_real(t_final) and math.isfinite(t_final) and t_final > 0):
            errors.append(f"终止时间必须为正数，当前为 {t_final}")
        if not (is_real(dt) and math.isfinite(dt) and dt > 0):
            errors.append(f"时间步长必须满足 dt > 0，当前为 {dt}")
        elif is_real(t_final) and dt > t_final:
            errors.append(f"时间步长必须满足 dt ≤ t_final，当前 dt={dt}, t_final={t_final}")
        if scheme not in SCHEMES:
            errors.append(f"未知的时间推进格式: {scheme}，可选: {', '.join(SCHEMES)}")
        if not (is_integer(output_stride) and output_stride >= 1):
            errors.append(f"输出间隔必须为 ≥ 1 的整数，当前为 {output_stride}")
        return errors

    @property
    def n_steps(self) -> int:
        # 容忍 T/dt 的舍入误差
        return max(1, int(math.ceil(self.t_final / self.dt - 1e-9)))

    def step_time(self, k: int) -> float:
        """第 k 步的时刻 t_k = min(k·dt, T)"""
        if k >= self.n_steps:
            return float(self.t_final)
        return min(k * self.dt, float(self.t_final))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    记录下来的时间序列及逐样本诊断量

    诊断量：
        kinetic = Re·aᵀMa
        stress_energy = (We/2a)·bᵀb
        viscous_rate = 2(1 − a)·aᵀKa
        relaxation_rate = (1/a)·bᵀb
        work_rate = 2·aᵀF(t)
    """
    times: np.ndarray
    a: np.ndarray
    b: np.ndarray
    kinetic: np.ndarray
    stress_energy: np.ndarray
    viscous_rate: np.ndarray
    relaxation_rate: np.ndarray
    work_rate: np.ndarray
    params: FluidParams
    scheme: str = RK4

    def __len__(self) -> int:
        return self.times.shape[0]

    @property
    def final_state(self) -> SimulationState:
        return SimulationState(float(self.times[-1]), self.a[-1], self.b[-1])

    @property
    def total_energy(self) -> np.ndarray:
        return self.kinetic + self.stress_energy

    def subsampled(self, step: int) -> 'Trajectory':
        """每隔 step 个样本取一个，始终保留最后一个样本"""
        if step < 1:
            raise ValueError(f"抽样间隔必须 ≥ 1，当前为 {step}")
        index = list(range(0, len(self), step))
        if index[-1] != len(self) - 1:
            index.append(len(self) - 1)
        return Trajectory(
            times=self.times[index],
            a=self.a[index],
            b=self.b[index],
            kinetic=self.kinetic[index],
            stress_energy=self.stress_energy[index],
            viscous_rate=self.viscous_rate[index],
            relaxation_rate=self.relaxation_rate[index],
            work_rate=self.work_rate[index],
            params=self.params,
            scheme=self.scheme,
        )

    def to_frame(self) -> pd.DataFrame:
        """列: t, kinetic, stress_energy, viscous_rate, a_1..a_n, b_1..b_m"""
        columns = {
            't': self.times,
            'kinetic': self.kinetic,
            'stress_energy': self.stress_energy,
            'viscous_rate': self.viscous_rate,
        }
        for j in range(self.a.shape[1]):
            columns[f'a_{j + 1}'] = self.a[:, j]
        for j in range(self.b.shape[1]):
            columns[f'b_{j + 1}'] = self.b[:, j]
        return pd.DataFrame(columns)


def _zero_forcing(n: int) -> ModalForcing:
    zero = np.zeros(n)
    return lambda t: zero


def _advanced(state: SimulationState, dt: float, a_new: np.ndarray, b_new: np.ndarray) -> SimulationState:
    """推进后的状态；出现非有限系数时抛出 NumericalInstabilityError，携带推进前的状态"""
    advanced = SimulationState(state.t + dt, a_new, b_new)
    if not advanced.is_finite():
        raise NumericalInstabilityError(
            f"数值失稳: t={advanced.t:.6g} 时出现非有限系数（最后有限时刻 t={state.t:.6g}）", state, state.t)
    return advanced


def _derivatives(a: np.ndarray, b: np.ndarray, ops: GalerkinOperators, params: FluidParams,
                 F: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    re = params.reynolds
    force = -re * ops.convective_action(a) - params.viscous_factor * (ops.stiffness @ a) - ops.coupling.T @ b + F
    da = ops.solve_mass(force) / re
    db = (-b + 2.0 * params.retardation * (ops.coupling @ a)) / params.weissenberg
    return da, db


def rhs(state: SimulationState, ops: GalerkinOperators, params: FluidParams,
        F: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Galerkin 方程组右端

    Args:
        state: 当前状态
        ops: 装配好的算子
        params: 流体参数
        F: 模态外力载荷，None 为零

    Returns:
        Tuple[np.ndarray, np.ndarray]: (da/dt, db/dt)
    """
    a = np.asarray(state.a, dtype=float)
    b = np.asarray(state.b, dtype=float)
    if a.shape != (ops.n_modes,) or b.shape != (ops.m_modes,):
        raise ValueError(f"状态维数 ({a.shape}, {b.shape}) 与算子维数 ({ops.n_modes}, {ops.m_modes}) 不一致")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError(f"t={state.t} 时的模态系数存在非有限值")
    if F is None:
        F = np.zeros(ops.n_modes)
    return _derivatives(a, b, ops, params, np.asarray(F, dtype=float))


def step_rk4(state: SimulationState, dt: float, ops: GalerkinOperators, params: FluidParams,
             forcing: Optional[ModalForcing] = None) -> SimulationState:
    """
    经典四阶 Runge-Kutta 推进一步，外力在各级的时刻取值

    Returns:
        SimulationState: t + dt 时刻的状态

    Raises:
        NumericalInstabilityError: 推进后出现非有限系数
    """
    if not dt > 0:
        raise ValueError(f"时间步长必须满足 dt > 0，当前为 {dt}")
    forcing = forcing or _zero_forcing(ops.n_modes)
    t, a, b = state.t, state.a, state.b

    f_start = forcing(t)
    f_mid = forcing(t + 0.5 * dt)
    f_end = forcing(t + dt)

    ka1, kb1 = _derivatives(a, b, ops, params, f_start)
    ka2, kb2 = _derivatives(a + 0.5 * dt * ka1, b + 0.5 * dt * kb1, ops, params, f_mid)
    ka3, kb3 = _derivatives(a + 0.5 * dt * ka2, b + 0.5 * dt * kb2, ops, params, f_mid)
    ka4, kb4 = _derivatives(a + dt * ka3, b + dt * kb3, ops, params, f_end)

    a_new = a + dt / 6.0 * (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4)
    b_new = b + dt / 6.0 * (kb1 + 2.0 * kb2 + 2.0 * kb3 + kb4)
    return _advanced(state, dt, a_new, b_new)


class ImplicitOperator:
    """
    IMEX 格式的隐式矩阵 Re·M + dt·(1 − a)·K，按步长缓存 Cholesky 分解
    """

    def __init__(self, ops: GalerkinOperators, params: FluidParams):
        self.ops = ops
        self.params = params
        self._factors = {}

    def factor(self, dt: float):
        if dt not in self._factors:
            matrix = self.params.reynolds * self.ops.mass + dt * self.params.viscous_factor * self.ops.stiffness
            try:
                self._factors[dt] = linalg.cho_factor(matrix)
            except linalg.LinAlgError as e:
                raise ValueError(f"IMEX 隐式矩阵分解失败 (dt={dt}): {e}") from e
            logger.debug(f"IMEX 隐式矩阵已分解: dt={dt}")
        return self._factors[dt]

    def solve(self, dt: float, rhs_vector: np.ndarray) -> np.ndarray:
        # 非有限值交给时间推进的失稳检查处理
        return linalg.cho_solve(self.factor(dt), rhs_vector, check_finite=False)


def step_imex(state: SimulationState, dt: float, ops: GalerkinOperators, params: FluidParams,
              forcing: Optional[ModalForcing] = None,
              implicit: Optional[ImplicitOperator] = None) -> SimulationState:
    """
    一阶 IMEX 推进一步：−(1 − a)K·a 与 −b/We 向后 Euler，
    对流、耦合与外力显式处理

    Returns:
        SimulationState: t + dt 时刻的状态

    Raises:
        NumericalInstabilityError: 推进后出现非有限系数
    """
    if not dt > 0:
        raise ValueError(f"时间步长必须满足 dt > 0，当前为 {dt}")
    forcing = forcing or _zero_forcing(ops.n_modes)
    implicit = implicit or ImplicitOperator(ops, params)
    t, a, b = state.t, state.a, state.b
    re, we = params.reynolds, params.weissenberg

    explicit = -re * ops.convective_action(a) - ops.coupling.T @ b + forcing(t)
    a_new = implicit.solve(dt, re * (ops.mass @ a) + dt * explicit)
    b_new = (b + dt * 2.0 * params.retardation * (ops.coupling @ a) / we) / (1.0 + dt / we)
    return _advanced(state, dt, a_new, b_new)


def exact_stress_substep(b: np.ndarray, a_mid: np.ndarray, dt: float, params: FluidParams,
                         coupling: np.ndarray) -> np.ndarray:
    """
    应变冻结时本构方程的精确解：
    b ← e^{−dt/We}·b + 2a·(1 − e^{−dt/We})·D·a_mid
    """
    if not dt > 0:
        raise ValueError(f"时间步长必须满足 dt > 0，当前为 {dt}")
    ratio = dt / params.weissenberg
    growth = -math.expm1(-ratio)
    return math.exp(-ratio) * b + 2.0 * params.retardation * growth * (coupling @ a_mid)


def step_exact_stress(state: SimulationState, dt: float, ops: GalerkinOperators, params: FluidParams,
                      forcing: Optional[ModalForcing] = None) -> SimulationState:
    """
    速度用 RK4（应力冻结在 b_n），应力用精确子步，应变取 ½(a_n + a_{n+1})
    """
    if not dt > 0:
        raise ValueError(f"时间步长必须满足 dt > 0，当前为 {dt}")
    forcing = forcing or _zero_forcing(ops.n_modes)
    t, a, b = state.t, state.a, state.b

    def velocity_rate(a_stage, f_stage):
        return _derivatives(a_stage, b, ops, params, f_stage)[0]

    f_mid = forcing(t + 0.5 * dt)
    k1 = velocity_rate(a, forcing(t))
    k2 = velocity_rate(a + 0.5 * dt * k1, f_mid)
    k3 = velocity_rate(a + 0.5 * dt * k2, f_mid)
    k4 = velocity_rate(a + dt * k3, forcing(t + dt))
    a_new = a + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    b_new = exact_stress_substep(b, 0.5 * (a + a_new), dt, params, ops.coupling)
    return _advanced(state, dt, a_new, b_new)


def stable_dt(system, params: FluidParams, safety: float = RK4_STABILITY_SAFETY) -> float:
    """
    RK4 的稳定步长估计：dt·λ_max((1 − a)M⁻¹K/Re) ≤ safety，且 dt ≤ safety·We

    Args:
        system: GalerkinSystem 或 GalerkinOperators
        params: 流体参数
        safety: 安全系数

    Returns:
        float: 建议的最大步长
    """
    ops = getattr(system, 'operators', system)
    lam_max = float(linalg.eigh(ops.stiffness, ops.mass, eigvals_only=True)[-1])
    rate = params.viscous_factor * lam_max / params.reynolds
    return min(safety / rate, safety * params.weissenberg)


def total_energy(state: SimulationState, ops: GalerkinOperators, params: FluidParams) -> float:
    """总能量 Re·aᵀMa + (We/2a)·bᵀb"""
    return float(params.reynolds * state.a @ ops.mass @ state.a
                 + params.stress_energy_factor * state.b @ state.b)


class TimeIntegrator(LoggerMixin):
    """
    时间推进驱动：按 SolverConfig 逐步推进并按输出间隔记录状态与诊断量
    """

    def __init__(self, config: SolverConfig, ops: GalerkinOperators,
                 forcing: Optional[ModalForcing] = None):
        self.config = config
        self.ops = ops
        self.params = config.params
        self.forcing = forcing or _zero_forcing(ops.n_modes)
        self._implicit = ImplicitOperator(ops, self.params) if config.scheme == IMEX else None

    def step(self, state: SimulationState, dt: float) -> SimulationState:
        scheme = self.config.scheme
        if scheme == RK4:
            return step_rk4(state, dt, self.ops, self.params, self.forcing)
        if scheme == IMEX:
            return step_imex(state, dt, self.ops, self.params, self.forcing, self._implicit)
        return step_exact_stress(state, dt, self.ops, self.params, self.forcing)

    def check_step_size(self):
        if self.config.scheme == IMEX:
            return
        limit = stable_dt(self.ops, self.params)
        if self.config.dt > limit:
            self.logger.warning(f"⚠️ 步长 dt={self.config.dt} 超过显式格式的稳定估计 {limit:.3e}，可能失稳")

    def run(self, a0: np.ndarray, b0: np.ndarray) -> Trajectory:
        config = self.config
        a0 = np.asarray(a0, dtype=float)
        b0 = np.asarray(b0, dtype=float)
        if a0.shape != (self.ops.n_modes,) or b0.shape != (self.ops.m_modes,):
            raise ValueError(f"初值维数 ({a0.shape}, {b0.shape}) 与算子维数 "
                             f"({self.ops.n_modes}, {self.ops.m_modes}) 不一致")

        start_time = time.time()
        self.log_method_call('run', scheme=config.scheme, dt=config.dt,
                             t_final=config.t_final, stride=config.output_stride)
        self.check_step_size()

        state = SimulationState(0.0, a0.copy(), b0.copy())
        if not state.is_finite():
            raise ValueError("初始模态系数存在非有限值")

        recorded = [state]
        n_steps = config.n_steps
        for k in range(1, n_steps + 1):
            t_next = config.step_time(k)
            try:
                candidate = self.step(state, t_next - state.t)
            except NumericalInstabilityError as e:
                self.logger.error(f"❌ {e}")
                raise
            state = SimulationState(t_next, candidate.a, candidate.b)
            if k % config.output_stride == 0 or k == n_steps:
                recorded.append(state)

        trajectory = self._build_trajectory(recorded)
        log_performance('simulate', time.time() - start_time, scheme=config.scheme,
                        steps=n_steps, samples=len(trajectory), n_modes=self.ops.n_modes)
        self.log_method_result('run', 'Trajectory', len(trajectory))
        return trajectory

    def _build_trajectory(self, recorded: List[SimulationState]) -> Trajectory:
        ops, params = self.ops, self.params
        times = np.array([s.t for s in recorded])
        a = np.vstack([s.a for s in recorded])
        b = np.vstack([s.b for s in recorded])
        forcing = np.vstack([self.forcing(t) for t in times])

        bb = np.einsum('ij,ij->i', b, b)
        return Trajectory(
            times=times,
            a=a,
            b=b,
            kinetic=params.reynolds * np.einsum('ij,jk,ik->i', a, ops.mass, a),
            stress_energy=params.stress_energy_factor * bb,
            viscous_rate=2.0 * params.viscous_factor * np.einsum('ij,jk,ik->i', a, ops.stiffness, a),
            relaxation_rate=bb / params.retardation,
            work_rate=2.0 * np.einsum('ij,ij->i', a, forcing),
            params=params,
            scheme=self.config.scheme,
        )


def simulate(config: SolverConfig, ops: GalerkinOperators, initial: Tuple[np.ndarray, np.ndarray],
             forcing: Optional[ModalForcing] = None) -> Trajectory:
    """
    从投影后的初值推进到 t_final

    Args:
        config: 时间推进配置
        ops: 装配好的算子
        initial: (a0, b0) 模态初值
        forcing: t -> F(t)，None 为零外力

    Returns:
        Trajectory: 每 output_stride 步（及最后一步）记录一次的轨迹

    Raises:
        NumericalInstabilityError: 出现非有限系数
    """
    a0, b0 = initial
    return TimeIntegrator(config, ops, forcing).run(a0, b0)
