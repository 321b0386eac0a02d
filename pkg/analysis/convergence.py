# -*- coding: utf-8 -*-
"""
收敛性研究

四部分：
1. 人造稳态解关于 k_max 的误差（galerkin 变体的轨迹偏离与 continuous 变体的稳态残差）
2. 固定 k_max 下瞬态解关于 dt 的自收敛，Richardson 三元组给出观测阶
3. 相同 T 与 dt 下瞬态解关于 k_max 的自收敛：粗解嵌入最细的基，以最细解为参考计算 L2 误差
4. 光滑非多项式目标场的 L2 投影误差关于 k_max 的谱衰减
各次运行互不共享可变状态，用线程池并发执行。
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from analysis.manufactured import CONTINUOUS, GALERKIN, manufactured_solution, steady_residual
from basis import DomainSpec, build_velocity_basis, default_quad_order, evaluate_field, quadrature_grid
from dynamics import RK4, SolverConfig, simulate
from log_config import get_logger, log_performance
from operators import (
    FluidParams,
    GalerkinSystem,
    InitialData,
    assemble_mass,
    build_galerkin_system,
    make_modal_forcing,
    project_initial,
    project_stress,
    project_velocity,
)

logger = get_logger(__name__)

CONVERGENCE_COLUMNS = ['study', 'k_max', 'dt', 'error', 'observed_order']
PROJECTION_K_LIST = (2, 4, 8)
TRANSIENT_K_MAX = 2
# k_max 扫描中初始速度的幅值
TRANSIENT_AMPLITUDE = 0.5


def richardson_order(coarse: float, medium: float, fine: float, refinement: float = 2.0) -> float:
    """
    由三个逐次加密的解（标量或数组）估计观测阶
    p = log(|u_c − u_m| / |u_m − u_f|) / log(r)
    """
    upper = float(np.linalg.norm(np.atleast_1d(np.asarray(coarse) - np.asarray(medium))))
    lower = float(np.linalg.norm(np.atleast_1d(np.asarray(medium) - np.asarray(fine))))
    if upper == 0.0 or lower == 0.0:
        return float('nan')
    return math.log(upper / lower) / math.log(refinement)


def observed_orders(errors: Sequence[float], sizes: Sequence[float]) -> List[float]:
    """相邻两次误差给出的观测阶，首项为 NaN"""
    orders = [float('nan')]
    for i in range(1, len(errors)):
        e0, e1 = errors[i - 1], errors[i]
        h0, h1 = sizes[i - 1], sizes[i]
        if e0 > 0 and e1 > 0 and h0 != h1:
            orders.append(math.log(e0 / e1) / math.log(h0 / h1))
        else:
            orders.append(float('nan'))
    return orders


def _manufactured_row(params: FluidParams, domain: DomainSpec, k_max: int, quad_order: Optional[int],
                      t_final: float, dt: float, amplitude: float) -> dict:
    system = build_galerkin_system(domain, k_max, quad_order)
    solution = manufactured_solution(params, system.velocity_basis, system.stress_basis, system.quad,
                                     GALERKIN, amplitude)
    data = solution.initial_data()
    config = SolverConfig(params, t_final=t_final, dt=dt, scheme=RK4, output_stride=1)
    traj = simulate(config, system.operators, project_initial(system, data),
                    make_modal_forcing(system, data.f, steady=True))
    error = float(np.max(np.abs(traj.a - solution.a_star)))

    continuous = manufactured_solution(params, system.velocity_basis, system.stress_basis, system.quad,
                                       CONTINUOUS, amplitude)
    residual = steady_residual(continuous, system, params)
    return {
        'k_max': k_max,
        'error': error,
        'residual': residual.residual_dual_norm,
        'projection_error': residual.projection_error,
    }


def _transient_run(params: FluidParams, domain: DomainSpec, k_max: int, quad_order: Optional[int],
                   t_final: float, dt: float, scheme: str) -> np.ndarray:
    system = build_galerkin_system(domain, k_max, quad_order)
    basis = system.velocity_basis

    def v0(points):
        values = basis.values(points)
        return values[0] + 0.5 * values[-1]

    a0, _ = project_initial(system, InitialData(v0=v0))
    b0 = np.full(system.m_modes, 0.1)
    config = SolverConfig(params, t_final=t_final, dt=dt, scheme=scheme, output_stride=1)
    traj = simulate(config, system.operators, (a0, b0))
    return np.concatenate([traj.a[-1], traj.b[-1]])


def target_stream_velocity(points: np.ndarray) -> np.ndarray:
    """流函数 ψ = sin²(πx)·e^x·sin²(πy) 生成的无散速度场 (∂ψ/∂y, −∂ψ/∂x)"""
    x, y = points[:, 0], points[:, 1]
    s = np.sin(np.pi * x) ** 2 * np.exp(x)
    ds = np.exp(x) * (np.sin(np.pi * x) ** 2 + np.pi * np.sin(2.0 * np.pi * x))
    t = np.sin(np.pi * y) ** 2
    dt = np.pi * np.sin(2.0 * np.pi * y)
    return np.column_stack([s * dt, -ds * t])


def projection_error(k_max: int, domain: DomainSpec, quad_order: Optional[int] = None) -> float:
    """目标场在 k_max 速度空间上的 L2 投影误差，只需质量矩阵"""
    quad = quadrature_grid(domain, quad_order or default_quad_order(k_max))
    basis = build_velocity_basis(domain, k_max)
    coeffs = project_velocity(target_stream_velocity, basis, quad, assemble_mass(basis, quad))
    approx = np.tensordot(coeffs, basis.values(quad.nodes), axes=(0, 0))
    difference = target_stream_velocity(quad.nodes) - approx
    return float(np.sqrt(np.sum(difference ** 2, axis=1) @ quad.weights))


def transient_initial_velocity(domain: DomainSpec):
    """
    与 k_max 无关的光滑无散初始速度

    正方形上取缩放后的目标场；环面上取流函数 ψ ∝ sin(sx)·sin(2sy)（s = 2π/L）生成的周期场。
    """
    if domain.is_noslip:
        return lambda points: TRANSIENT_AMPLITUDE * target_stream_velocity(points / domain.side_length)

    scale = 2.0 * np.pi / domain.side_length

    def periodic(points):
        x, y = scale * points[:, 0], scale * points[:, 1]
        return TRANSIENT_AMPLITUDE * np.column_stack([2.0 * np.sin(x) * np.cos(2.0 * y),
                                                      -np.cos(x) * np.sin(2.0 * y)])

    return periodic


def _transient_k_run(params: FluidParams, domain: DomainSpec, k_max: int, quad_order: Optional[int],
                     t_final: float, dt: float, scheme: str):
    system = build_galerkin_system(domain, k_max, quad_order)
    initial = project_initial(system, InitialData(v0=transient_initial_velocity(domain)))
    config = SolverConfig(params, t_final=t_final, dt=dt, scheme=scheme, output_stride=1)
    traj = simulate(config, system.operators, initial)
    return system, traj.a[-1], traj.b[-1]


def embedded_l2_error(coarse: GalerkinSystem, a: np.ndarray, b: np.ndarray,
                      fine: GalerkinSystem, a_ref: np.ndarray, b_ref: np.ndarray) -> float:
    """
    粗解 (a, b) 嵌入细基后与参考解的 L2 距离 sqrt(‖u‖² + ‖σ‖²)

    粗空间包含于细空间，嵌入取细基上的 L2 投影，结果是精确的系数映射。
    """
    a_embedded = project_velocity(lambda points: evaluate_field(a, coarse.velocity_basis, points),
                                  fine.velocity_basis, fine.quad, fine.operators)
    b_embedded = project_stress(lambda points: evaluate_field(b, coarse.stress_basis, points),
                                fine.stress_basis, fine.quad)
    u = a_ref - a_embedded
    sigma = b_ref - b_embedded
    return float(np.sqrt(max(u @ fine.operators.mass @ u, 0.0) + sigma @ sigma))


def transient_k_errors(params: FluidParams, domain: DomainSpec, k_list: Sequence[int], t_final: float,
                       dt: float, scheme: str = RK4, quad_order: Optional[int] = None,
                       max_workers: Optional[int] = None) -> List[float]:
    """
    以最大 k_max 的解为参考，其余 k_max 在 T 时刻的嵌入 L2 误差

    Returns:
        List[float]: 与 k_list[:-1] 对应的误差
    """
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = [executor.submit(_transient_k_run, params, domain, k, quad_order, t_final, dt, scheme)
                   for k in k_list]
        runs = [f.result() for f in futures]
    reference = runs[-1]
    return [embedded_l2_error(*run, *reference) for run in runs[:-1]]


def convergence_study(params: FluidParams, domain: DomainSpec, k_list: Iterable[int], dt_list: Iterable[float],
                      t_final: float, scheme: str = RK4, quad_order: Optional[int] = None,
                      amplitude: float = 1.0, transient_k_max: int = TRANSIENT_K_MAX,
                      max_workers: Optional[int] = None) -> pd.DataFrame:
    """
    收敛性研究

    Args:
        params: 流体参数
        domain: 计算区域
        k_list: 递增的 k_max 列表
        dt_list: 递减的步长列表
        t_final: 每次运行的终止时间
        scheme: 瞬态研究的时间推进格式
        quad_order: 求积阶数，None 为默认
        amplitude: 人造解幅值
        transient_k_max: dt 研究固定的 k_max
        max_workers: 线程数

    Returns:
        pd.DataFrame: 列 study, k_max, dt, error, observed_order
    """
    k_list = [int(k) for k in k_list]
    dt_list = [float(dt) for dt in dt_list]
    if not k_list or not dt_list:
        raise ValueError("k_max 列表与 dt 列表都不能为空")
    if any(k1 <= k0 for k0, k1 in zip(k_list, k_list[1:])):
        raise ValueError(f"k_max 列表必须严格递增: {k_list}")
    if any(d1 >= d0 for d0, d1 in zip(dt_list, dt_list[1:])):
        raise ValueError(f"dt 列表必须严格递减: {dt_list}")

    start_time = time.time()
    finest_dt = dt_list[-1]
    logger.info(f"🚀 收敛性研究: k_list={k_list}, dt_list={dt_list}, T={t_final}")

    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        manufactured_futures = [
            executor.submit(_manufactured_row, params, domain, k, quad_order, t_final, finest_dt, amplitude)
            for k in k_list
        ]
        transient_futures = [
            executor.submit(_transient_run, params, domain, transient_k_max, quad_order, t_final, dt, scheme)
            for dt in dt_list
        ]
        projection_futures = []
        if domain.is_noslip:
            projection_futures = [executor.submit(projection_error, k, domain) for k in PROJECTION_K_LIST]

        manufactured_rows = [f.result() for f in manufactured_futures]
        transient_states = [f.result() for f in transient_futures]
        projection_errors = [f.result() for f in projection_futures]

    k_errors = transient_k_errors(params, domain, k_list, t_final, finest_dt, scheme, quad_order, max_workers)

    rows = []
    for row in manufactured_rows:
        rows.append({'study': 'manufactured_galerkin', 'k_max': row['k_max'], 'dt': finest_dt,
                     'error': row['error'], 'observed_order': float('nan')})

    residuals = [row['residual'] for row in manufactured_rows]
    for row, order in zip(manufactured_rows, observed_orders(residuals, [1.0 / k for k in k_list])):
        rows.append({'study': 'manufactured_continuous', 'k_max': row['k_max'], 'dt': finest_dt,
                     'error': row['residual'], 'observed_order': order})

    stress_errors = [row['projection_error'] for row in manufactured_rows]
    for row, order in zip(manufactured_rows, observed_orders(stress_errors, [1.0 / k for k in k_list])):
        rows.append({'study': 'stress_projection', 'k_max': row['k_max'], 'dt': finest_dt,
                     'error': row['projection_error'], 'observed_order': order})

    # 相邻步长的解之差作为误差，Richardson 三元组给出观测阶
    differences = [float(np.linalg.norm(transient_states[i] - transient_states[i + 1]))
                   for i in range(len(dt_list) - 1)]
    for i, dt in enumerate(dt_list[:-1]):
        order = float('nan')
        if i >= 1:
            order = richardson_order(transient_states[i - 1], transient_states[i], transient_states[i + 1],
                                     dt_list[i - 1] / dt_list[i])
        rows.append({'study': 'transient_dt', 'k_max': transient_k_max, 'dt': dt,
                     'error': differences[i], 'observed_order': order})

    coarse_k = k_list[:-1]
    for k, error, order in zip(coarse_k, k_errors, observed_orders(k_errors, [1.0 / k for k in coarse_k])):
        rows.append({'study': 'transient_k_max', 'k_max': k, 'dt': finest_dt,
                     'error': error, 'observed_order': order})

    for k, error, order in zip(PROJECTION_K_LIST, projection_errors,
                               observed_orders(projection_errors, [1.0 / k for k in PROJECTION_K_LIST])):
        rows.append({'study': 'projection', 'k_max': k, 'dt': float('nan'),
                     'error': error, 'observed_order': order})

    table = pd.DataFrame(rows, columns=CONVERGENCE_COLUMNS)
    log_performance('convergence_study', time.time() - start_time, runs=2 * len(k_list) + len(dt_list),
                    rows=len(table))
    return table


def convergence_passed(table: pd.DataFrame, steady_tolerance: float = 1e-6, order_target: float = 4.0,
                       order_tolerance: float = 0.5) -> bool:
    """
    判定：galerkin 人造解偏离 ≤ 容差；应力投影误差、瞬态 k_max 误差与目标场投影误差随 k_max 不增；
    瞬态 dt 观测阶在目标 ± 容差之内（有观测阶时）
    """
    manufactured = table[table['study'] == 'manufactured_galerkin']
    if (manufactured['error'] > steady_tolerance).any():
        return False

    for study in ('stress_projection', 'transient_k_max', 'projection'):
        errors = table.loc[table['study'] == study, 'error'].to_numpy()
        if np.any(np.diff(errors) > 1e-12 * max(1.0, float(np.max(errors, initial=0.0)))):
            return False

    orders = table.loc[table['study'] == 'transient_dt', 'observed_order'].dropna().to_numpy()
    if orders.size and np.any(np.abs(orders - order_target) > order_tolerance):
        return False
    return True
