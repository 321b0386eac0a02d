# -*- coding: utf-8 -*-
"""
Galerkin 算子装配模块
把弱形式中的双线性/三线性型装配为稠密矩阵与张量，并把初值、外力投影到模态坐标

场函数约定：
- 速度场 v(points) -> (P, 2)
- 应力场 tau(points) -> (P, 2, 2)
- 外力 f(points, t) -> (P, 2)
None 表示零场。
"""

import time
from dataclasses import asdict, dataclass
from functools import cached_property
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import linalg

from basis import (
    DomainSpec,
    QuadratureRule,
    StressBasis,
    VelocityBasis,
    build_stress_basis,
    build_velocity_basis,
    default_quad_order,
    quadrature_grid,
)
from log_config import get_logger, log_performance
from utils import is_real

logger = get_logger(__name__)

VelocityField = Callable[[np.ndarray], np.ndarray]
StressField = Callable[[np.ndarray], np.ndarray]
ForcingField = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class FluidParams:
    """
    流体物理参数

    Attributes:
        reynolds: Re > 0
        weissenberg: We > 0
        retardation: a，须满足 0 < a < 1
    """
    reynolds: float = 1.0
    weissenberg: float = 1.0
    retardation: float = 0.5

    def __post_init__(self):
        errors = self.validation_errors(self.reynolds, self.weissenberg, self.retardation)
        if errors:
            raise ValueError('; '.join(errors))

    @staticmethod
    def validation_errors(reynolds, weissenberg, retardation) -> list:
        errors = []
        if not (is_real(reynolds) and np.isfinite(reynolds) and reynolds > 0):
            errors.append(f"Reynolds 数必须满足 Re > 0，当前为 {reynolds}")
        if not (is_real(weissenberg) and np.isfinite(weissenberg) and weissenberg > 0):
            errors.append(f"Weissenberg 数必须满足 We > 0，当前为 {weissenberg}")
        if not (is_real(retardation) and 0 < retardation < 1):
            errors.append(f"迟滞参数必须满足 0 < a < 1，当前为 a = {retardation}")
        return errors

    @property
    def viscous_factor(self) -> float:
        """Newton 粘性部分 1 − a"""
        return 1.0 - self.retardation

    @property
    def stress_energy_factor(self) -> float:
        """应力能量系数 We / (2a)"""
        return self.weissenberg / (2.0 * self.retardation)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class GalerkinOperators:
    """
    装配好的 Galerkin 算子

    Attributes:
        mass: (n, n) 质量矩阵 (φ^i, φ^j)
        stiffness: (n, n) 刚度矩阵 (∇φ^i, ∇φ^j)，不含 (1 − a)
        convection: (n, n, n) 对流张量 C[p, q, r] = Σ_l ∫ φ^q_l φ^r·∂φ^p/∂x_l
        coupling: (m, n) 耦合矩阵 D[i, j] = (ψ^i, E(φ^j))
    """
    mass: np.ndarray
    stiffness: np.ndarray
    convection: np.ndarray
    coupling: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.mass.shape[0]

    @property
    def m_modes(self) -> int:
        return self.coupling.shape[0]

    @cached_property
    def mass_factor(self):
        """质量矩阵的 Cholesky 分解，只做一次"""
        try:
            return linalg.cho_factor(self.mass)
        except linalg.LinAlgError as e:
            raise ValueError(f"质量矩阵不是对称正定的，速度基可能退化: {e}") from e

    def solve_mass(self, rhs: np.ndarray) -> np.ndarray:
        # 非有限值交给时间推进的失稳检查处理
        return linalg.cho_solve(self.mass_factor, rhs, check_finite=False)

    def convective_action(self, a: np.ndarray) -> np.ndarray:
        """N(a)_p = ((v·∇)v, φ^p) = −Σ_{q,r} C[p, q, r] a_q a_r"""
        return -((self.convection @ a) @ a)

    def trilinear(self, u: np.ndarray, w: np.ndarray, z: np.ndarray) -> float:
        """Σ C[p, q, r] z_p u_q w_r = ∫ u_l w_m ∂z_m/∂x_l = −((u·∇)w, z)"""
        return float(z @ ((self.convection @ w) @ u))


@dataclass(frozen=True)
class InitialData:
    """
    初值与外力

    Attributes:
        v0: 初始速度场，None 为零
        tau0: 初始应力场，None 为零
        f: 外力场 f(points, t)，None 为零
        steady_forcing: 外力与时间无关时为 True，此时投影只算一次
    """
    v0: Optional[VelocityField] = None
    tau0: Optional[StressField] = None
    f: Optional[ForcingField] = None
    steady_forcing: bool = False

    @classmethod
    def rest(cls) -> 'InitialData':
        return cls()


@dataclass(frozen=True, eq=False)
class GalerkinSystem:
    """基、求积规则与算子的打包，供各驱动程序共用"""
    domain: DomainSpec
    k_max: int
    quad: QuadratureRule
    velocity_basis: VelocityBasis
    stress_basis: StressBasis
    operators: GalerkinOperators

    @property
    def n_modes(self) -> int:
        return self.velocity_basis.n_modes

    @property
    def m_modes(self) -> int:
        return self.stress_basis.m_modes


def _symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


def assemble_mass(basis: VelocityBasis, quad: QuadratureRule) -> np.ndarray:
    """
    装配质量矩阵 M[i, j] = (φ^i, φ^j)

    Args:
        basis: 速度基
        quad: 求积规则

    Returns:
        np.ndarray: (n, n) 对称正定矩阵
    """
    values = basis.values(quad.nodes).reshape(basis.n_modes, quad.n_points, 2)
    weighted = values * quad.weights[None, :, None]
    mass = weighted.reshape(basis.n_modes, -1) @ values.reshape(basis.n_modes, -1).T
    return _symmetrize(mass)


def assemble_stiffness(basis: VelocityBasis, quad: QuadratureRule) -> np.ndarray:
    """
    装配刚度矩阵 K[i, j] = (∇φ^i, ∇φ^j)，(1 − a) 因子在时间推进中施加

    Args:
        basis: 速度基
        quad: 求积规则

    Returns:
        np.ndarray: (n, n) 对称正定矩阵
    """
    grads = basis.gradients(quad.nodes).reshape(basis.n_modes, quad.n_points, 4)
    weighted = grads * quad.weights[None, :, None]
    stiffness = weighted.reshape(basis.n_modes, -1) @ grads.reshape(basis.n_modes, -1).T
    return _symmetrize(stiffness)


def assemble_convection(basis: VelocityBasis, quad: QuadratureRule) -> np.ndarray:
    """
    装配对流张量 C[p, q, r] = Σ_l ∫ φ^q_l φ^r·∂φ^p/∂x_l

    按 p 逐片装配，每片是一次矩阵乘法，内存占用为 O(n·Q)。

    Args:
        basis: 速度基
        quad: 求积规则

    Returns:
        np.ndarray: (n, n, n) 张量
    """
    n = basis.n_modes
    values = basis.values(quad.nodes)           # (n, Q, 2)  [r, Q, m]
    grads = basis.gradients(quad.nodes)         # (n, Q, 2, 2)  [p, Q, m, l]
    flat_values = values.reshape(n, -1)          # [q, (Q, l)]
    weights = quad.weights

    convection = np.empty((n, n, n))
    for p in range(n):
        weighted_grad = grads[p] * weights[:, None, None]                  # [Q, m, l]
        # T[r, Q, l] = Σ_m φ^r_m(Q) ∂φ^p_m/∂x_l(Q) w_Q
        contracted = np.einsum('rQm,Qml->rQl', values, weighted_grad)
        convection[p] = flat_values @ contracted.reshape(n, -1).T          # [q, r]
    return convection


def assemble_coupling(vbasis: VelocityBasis, sbasis: StressBasis, quad: QuadratureRule) -> np.ndarray:
    """
    装配耦合矩阵 D[i, j] = (ψ^i, E(φ^j))

    动量方程使用 Dᵀ，本构方程使用 D。

    Returns:
        np.ndarray: (m, n) 矩阵
    """
    stress = sbasis.values(quad.nodes).reshape(sbasis.m_modes, quad.n_points, 4)
    strain = vbasis.symmetric_gradients(quad.nodes).reshape(vbasis.n_modes, quad.n_points, 4)
    weighted = stress * quad.weights[None, :, None]
    return weighted.reshape(sbasis.m_modes, -1) @ strain.reshape(vbasis.n_modes, -1).T


def assemble_operators(vbasis: VelocityBasis, sbasis: StressBasis, quad: QuadratureRule) -> GalerkinOperators:
    """一次装配全部算子"""
    return GalerkinOperators(
        mass=assemble_mass(vbasis, quad),
        stiffness=assemble_stiffness(vbasis, quad),
        convection=assemble_convection(vbasis, quad),
        coupling=assemble_coupling(vbasis, sbasis, quad),
    )


def _field_values(field, points: np.ndarray, shape: Tuple[int, ...], *args) -> np.ndarray:
    """在点集上求值，None 视为零场，并检查形状"""
    expected = (points.shape[0],) + shape
    if field is None:
        return np.zeros(expected)
    values = np.asarray(field(points, *args), dtype=float)
    if values.shape != expected:
        raise ValueError(f"场函数返回的形状 {values.shape} 与期望的 {expected} 不一致")
    return values


def project_velocity(v0: Optional[VelocityField], basis: VelocityBasis, quad: QuadratureRule,
                     mass) -> np.ndarray:
    """
    速度场的 L2 投影：求解 M·a = ((v0, φ^j))_j

    Args:
        v0: 速度场
        basis: 速度基
        quad: 求积规则
        mass: 质量矩阵，或已有的 GalerkinOperators

    Returns:
        np.ndarray: (n,) 模态系数
    """
    values = _field_values(v0, quad.nodes, (2,))
    phi = basis.values(quad.nodes)
    rhs = np.einsum('jQa,Qa->j', phi, values * quad.weights[:, None])
    if isinstance(mass, GalerkinOperators):
        return mass.solve_mass(rhs)
    try:
        return linalg.cho_solve(linalg.cho_factor(mass), rhs)
    except linalg.LinAlgError as e:
        raise ValueError(f"质量矩阵不是对称正定的，速度基可能退化: {e}") from e


def project_stress(tau0: Optional[StressField], sbasis: StressBasis, quad: QuadratureRule) -> np.ndarray:
    """
    应力场的 L2 投影 b_j = (τ0, ψ^j)（应力基正交归一）

    Returns:
        np.ndarray: (m,) 模态系数
    """
    values = _field_values(tau0, quad.nodes, (2, 2))
    psi = sbasis.values(quad.nodes)
    return np.einsum('jQab,Qab->j', psi, values * quad.weights[:, None, None])


def project_forcing(f: Optional[ForcingField], t: float, basis: VelocityBasis, quad: QuadratureRule) -> np.ndarray:
    """
    外力的模态载荷 F_j(t) = (f(·, t), φ^j)

    Returns:
        np.ndarray: (n,) 载荷向量
    """
    values = _field_values(f, quad.nodes, (2,), t)
    phi = basis.values(quad.nodes)
    return np.einsum('jQa,Qa->j', phi, values * quad.weights[:, None])


def build_galerkin_system(domain: DomainSpec, k_max: int, quad_order: Optional[int] = None) -> GalerkinSystem:
    """
    构造基、求积规则并装配全部算子

    Args:
        domain: 计算区域
        k_max: 每方向最高模态编号
        quad_order: 求积阶数，None 或 0 时取默认值

    Returns:
        GalerkinSystem: 打包好的离散系统
    """
    start_time = time.time()
    order = quad_order or default_quad_order(k_max)
    quad = quadrature_grid(domain, order)
    vbasis = build_velocity_basis(domain, k_max)
    sbasis = build_stress_basis(domain, k_max)
    ops = assemble_operators(vbasis, sbasis, quad)
    # 提前分解质量矩阵，基退化时在此处报错
    ops.mass_factor

    log_performance('build_galerkin_system', time.time() - start_time,
                    mode=domain.mode, k_max=k_max, n_modes=vbasis.n_modes,
                    m_modes=sbasis.m_modes, quad_points=quad.n_points)
    return GalerkinSystem(domain, k_max, quad, vbasis, sbasis, ops)


def project_initial(system: GalerkinSystem, data: InitialData) -> Tuple[np.ndarray, np.ndarray]:
    """把初值投影为模态系数 (a0, b0)"""
    a0 = project_velocity(data.v0, system.velocity_basis, system.quad, system.operators)
    b0 = project_stress(data.tau0, system.stress_basis, system.quad)
    return a0, b0


def make_modal_forcing(system: GalerkinSystem, f: Optional[ForcingField],
                       steady: bool = False) -> Callable[[float], np.ndarray]:
    """
    把外力场包装为 t -> F(t) 的模态载荷函数

    Args:
        system: 离散系统
        f: 外力场
        steady: 与时间无关时缓存投影结果

    Returns:
        Callable[[float], np.ndarray]: 模态载荷函数
    """
    if f is None:
        zero = np.zeros(system.n_modes)
        zero.setflags(write=False)
        return lambda t: zero

    if steady:
        cached = project_forcing(f, 0.0, system.velocity_basis, system.quad)
        cached.setflags(write=False)
        return lambda t: cached

    return lambda t: project_forcing(f, t, system.velocity_basis, system.quad)


def validate_initial_data(system: GalerkinSystem, data: InitialData, tolerance: float = 1e-8) -> dict:
    """
    检查初值的正则性：求积节点上取值有限、τ0 对称；
    正方形上 v0 的边界迹与散度只记录警告（v0 ∈ H）

    Returns:
        dict: 检查报告

    Raises:
        ValueError: 存在非有限值或 τ0 不对称
    """
    nodes = system.quad.nodes
    v_values = _field_values(data.v0, nodes, (2,))
    tau_values = _field_values(data.tau0, nodes, (2, 2))
    f_values = _field_values(data.f, nodes, (2,), 0.0)

    errors = []
    if not np.all(np.isfinite(v_values)):
        errors.append("初始速度 v0 在求积节点上存在非有限值")
    if not np.all(np.isfinite(tau_values)):
        errors.append("初始应力 τ0 在求积节点上存在非有限值")
    if not np.all(np.isfinite(f_values)):
        errors.append("外力 f 在求积节点上存在非有限值")
    asymmetry = float(np.max(np.abs(tau_values[:, 0, 1] - tau_values[:, 1, 0]), initial=0.0))
    if asymmetry > tolerance:
        errors.append(f"初始应力 τ0 不对称: max|τ12 − τ21| = {asymmetry:.3e}")
    if errors:
        raise ValueError('; '.join(errors))

    report = {'asymmetry': asymmetry, 'boundary_trace': 0.0, 'divergence': 0.0}
    if data.v0 is None:
        return report

    length = system.domain.side_length
    scale = max(float(np.max(np.abs(v_values))), 1.0)

    if system.domain.is_noslip:
        s = np.linspace(0.0, length, 101)
        edges = np.concatenate([
            np.column_stack([s, np.zeros_like(s)]),
            np.column_stack([s, np.full_like(s, length)]),
            np.column_stack([np.zeros_like(s), s]),
            np.column_stack([np.full_like(s, length), s]),
        ])
        trace = float(np.max(np.abs(_field_values(data.v0, edges, (2,)))))
        report['boundary_trace'] = trace
        if trace > tolerance * scale:
            logger.warning(f"⚠️ 初始速度不满足无滑移边界条件: max|v0| = {trace:.3e}")

    h = 1e-5 * length
    shift_x = np.array([h, 0.0])
    shift_y = np.array([0.0, h])
    divergence = (
        (data.v0(nodes + shift_x)[:, 0] - data.v0(nodes - shift_x)[:, 0])
        + (data.v0(nodes + shift_y)[:, 1] - data.v0(nodes - shift_y)[:, 1])
    ) / (2.0 * h)
    max_div = float(np.max(np.abs(divergence)))
    report['divergence'] = max_div
    if max_div > 1e-4 * scale / length:
        logger.warning(f"⚠️ 初始速度不是无散度的: max|∇·v0| ≈ {max_div:.3e}，投影后只保留无散部分")

    return report
