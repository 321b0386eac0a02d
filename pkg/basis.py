# -*- coding: utf-8 -*-
"""
Galerkin 基函数模块
负责构造求积规则、无散度速度基（流函数构造）和 L2 正交归一的对称应力基

约定：
- 点集统一为 (P, 2) 数组
- 速度基的值为 (n, P, 2)，梯度为 (n, P, 2, 2)，其中 [..., a, b] = ∂φ_a/∂x_b
- 应力基的值为 (m, P, 2, 2)
"""

import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple, Union

import numpy as np

from log_config import get_logger

logger = get_logger(__name__)

NOSLIP_SQUARE = 'noslip_square'
PERIODIC_TORUS = 'periodic_torus'
DOMAIN_MODES = (NOSLIP_SQUARE, PERIODIC_TORUS)

# 应力分量族的顺序：11, 12(=21), 22
STRESS_FAMILIES = ('11', '12', '22')
_FAMILY_TENSORS = np.array([
    [[1.0, 0.0], [0.0, 0.0]],
    [[0.0, 1.0 / math.sqrt(2.0)], [1.0 / math.sqrt(2.0), 0.0]],
    [[0.0, 0.0], [0.0, 1.0]],
])


# 每个积分阶数对应的一维求积点数
POINTS_PER_ORDER = 2


def default_quad_order(k_max: int) -> int:
    """按 k_max 给出装配用的默认积分阶数"""
    return 2 * k_max + 8


@dataclass(frozen=True)
class DomainSpec:
    """计算区域：无滑移单位正方形，或周期环面"""
    mode: str = NOSLIP_SQUARE
    side_length: float = None

    def __post_init__(self):
        if self.mode not in DOMAIN_MODES:
            raise ValueError(f"未知的区域类型: {self.mode}，可选: {', '.join(DOMAIN_MODES)}")
        if self.side_length is None:
            default_side = 1.0 if self.mode == NOSLIP_SQUARE else 2.0 * math.pi
            object.__setattr__(self, 'side_length', default_side)
        if not self.side_length > 0:
            raise ValueError(f"区域边长必须为正数，当前为 {self.side_length}")

    @property
    def area(self) -> float:
        return self.side_length ** 2

    @property
    def is_noslip(self) -> bool:
        return self.mode == NOSLIP_SQUARE


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """
    二维张量积求积规则

    Attributes:
        nodes: (Q, 2) 求积节点
        weights: (Q,) 正权重
        order: 积分阶数；每方向 POINTS_PER_ORDER·order 个点，一维多项式精确阶数至少为 order
    """
    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        weights = np.array(self.weights, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 2 or weights.shape != (nodes.shape[0],):
            raise ValueError("求积节点必须为 (Q, 2)，权重必须为 (Q,)")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, 'nodes', nodes)
        object.__setattr__(self, 'weights', weights)

    @property
    def n_points(self) -> int:
        return self.weights.shape[0]

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """对最后一个轴（求积点）加权求和"""
        return np.asarray(values) @ self.weights


def quadrature_grid(spec: DomainSpec, order: int) -> QuadratureRule:
    """
    构造张量积求积规则

    正方形上使用 Gauss-Legendre，环面上使用均匀梯形公式，每方向都取
    POINTS_PER_ORDER·order 个点：多项式精确阶数 4·order − 1，
    阶数 ≥ 2·k_max + 6 时频率至多 2·k_max·π 的应力基乘积积分到舍入误差量级。

    Args:
        spec: 计算区域
        order: 精确阶数，至少为 2

    Returns:
        QuadratureRule: 求积规则
    """
    if order < 2:
        raise ValueError(f"求积阶数必须 ≥ 2，当前为 {order}")

    length = spec.side_length
    if spec.is_noslip:
        n = POINTS_PER_ORDER * order
        ref_nodes, ref_weights = np.polynomial.legendre.leggauss(n)
        nodes_1d = 0.5 * (ref_nodes + 1.0) * length
        weights_1d = 0.5 * length * ref_weights
    else:
        n = POINTS_PER_ORDER * order
        nodes_1d = length * np.arange(n) / n
        weights_1d = np.full(n, length / n)

    xx, yy = np.meshgrid(nodes_1d, nodes_1d, indexing='ij')
    nodes = np.column_stack([xx.ravel(), yy.ravel()])
    weights = np.outer(weights_1d, weights_1d).ravel()
    return QuadratureRule(nodes=nodes, weights=weights, order=order)


@dataclass(frozen=True)
class TrigProfile:
    """
    一维三角和 Σ c·cos(ωs) 或 Σ c·sin(ωs)

    每一项为 (系数, 角频率, 'cos' | 'sin')，求导在项上精确进行。
    """
    terms: Tuple[Tuple[float, float, str], ...]

    def derivative(self, order: int = 1) -> 'TrigProfile':
        terms = self.terms
        for _ in range(order):
            new_terms = []
            for coef, omega, kind in terms:
                if omega == 0.0:
                    continue
                if kind == 'cos':
                    new_terms.append((-coef * omega, omega, 'sin'))
                else:
                    new_terms.append((coef * omega, omega, 'cos'))
            terms = tuple(new_terms)
        return TrigProfile(terms)

    def __call__(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for coef, omega, kind in self.terms:
            if kind == 'cos':
                out += coef * np.cos(omega * s)
            else:
                out += coef * np.sin(omega * s)
        return out


def _profile_table(profiles: Sequence[TrigProfile], s: np.ndarray, max_order: int) -> np.ndarray:
    """返回 (max_order+1, len(profiles), len(s)) 的导数表"""
    table = np.empty((max_order + 1, len(profiles), s.shape[0]))
    for j, profile in enumerate(profiles):
        current = profile
        for r in range(max_order + 1):
            table[r, j] = current(s)
            current = current.derivative()
    return table


def _as_points(points) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points.reshape(1, 2)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError(f"点集必须为 (P, 2) 数组，当前形状 {points.shape}")
    return points


def envelope_profile(j: int, length: float = 1.0) -> TrigProfile:
    """η_j(s) = sin(πs/L)·sin(jπs/L) = ½cos((j−1)πs/L) − ½cos((j+1)πs/L)"""
    base = math.pi / length
    return TrigProfile(((0.5, (j - 1) * base, 'cos'), (-0.5, (j + 1) * base, 'cos')))


def _fourier_profiles(k_max: int, length: float, normalized: bool) -> Tuple[TrigProfile, ...]:
    """周期方向的一维族：常数, cos(ps), sin(ps), ...（可选 L2 归一）"""
    base = 2.0 * math.pi / length
    const_coef = 1.0 / math.sqrt(length) if normalized else 1.0
    wave_coef = math.sqrt(2.0 / length) if normalized else 1.0
    profiles = [TrigProfile(((const_coef, 0.0, 'cos'),))]
    p = 1
    while len(profiles) < 2 * k_max + 1:
        profiles.append(TrigProfile(((wave_coef, p * base, 'cos'),)))
        profiles.append(TrigProfile(((wave_coef, p * base, 'sin'),)))
        p += 1
    return tuple(profiles)


@dataclass(frozen=True, eq=False)
class VelocityBasis:
    """
    无散度速度基

    第 i 个模态由可分离流函数 ψ_i(x, y) = X_i(x)·Y_i(y) 生成，
    φ_i = (∂ψ_i/∂y, −∂ψ_i/∂x)，因此逐点无散度。
    """
    domain: DomainSpec
    k_max: int
    profiles: Tuple[TrigProfile, ...]
    mode_index: Tuple[Tuple[int, int], ...]

    @property
    def n_modes(self) -> int:
        return len(self.mode_index)

    def __len__(self) -> int:
        return self.n_modes

    def permuted(self, order: Sequence[int]) -> 'VelocityBasis':
        """按给定顺序重排模态"""
        order = list(order)
        if sorted(order) != list(range(self.n_modes)):
            raise ValueError("重排顺序必须是模态编号的一个排列")
        return VelocityBasis(self.domain, self.k_max, self.profiles,
                             tuple(self.mode_index[i] for i in order))

    def _factors(self, points) -> Tuple[np.ndarray, np.ndarray]:
        points = _as_points(points)
        table_x = _profile_table(self.profiles, points[:, 0], 3)
        table_y = _profile_table(self.profiles, points[:, 1], 3)
        ix = np.array([i for i, _ in self.mode_index], dtype=int)
        iy = np.array([j for _, j in self.mode_index], dtype=int)
        # (4, n, P): X 与 Y 的 0..3 阶导数
        return table_x[:, ix, :], table_y[:, iy, :]

    def stream_values(self, points) -> np.ndarray:
        x, y = self._factors(points)
        return x[0] * y[0]

    def stream_gradients(self, points) -> np.ndarray:
        x, y = self._factors(points)
        return np.stack([x[1] * y[0], x[0] * y[1]], axis=-1)

    def values(self, points) -> np.ndarray:
        x, y = self._factors(points)
        return np.stack([x[0] * y[1], -(x[1] * y[0])], axis=-1)

    def gradients(self, points) -> np.ndarray:
        x, y = self._factors(points)
        dxdy = x[1] * y[1]
        grad = np.empty(dxdy.shape + (2, 2))
        grad[..., 0, 0] = dxdy
        grad[..., 0, 1] = x[0] * y[2]
        grad[..., 1, 0] = -(x[2] * y[0])
        grad[..., 1, 1] = -dxdy
        return grad

    def symmetric_gradients(self, points) -> np.ndarray:
        grad = self.gradients(points)
        return 0.5 * (grad + np.swapaxes(grad, -1, -2))

    def divergences(self, points) -> np.ndarray:
        grad = self.gradients(points)
        return grad[..., 0, 0] + grad[..., 1, 1]

    def laplacians(self, points) -> np.ndarray:
        x, y = self._factors(points)
        lap_1 = x[2] * y[1] + x[0] * y[3]
        lap_2 = -(x[3] * y[0] + x[1] * y[2])
        return np.stack([lap_1, lap_2], axis=-1)


@dataclass(frozen=True, eq=False)
class StressBasis:
    """
    L2 正交归一的对称应力基

    标量族 s_q(x, y) = g_j(x)·g_k(y) 按分量族 11、12、22 嵌入对称矩阵，
    第 i 个模态 i = 3q + family。
    """
    domain: DomainSpec
    k_max: int
    profiles: Tuple[TrigProfile, ...]
    scalar_index: Tuple[Tuple[int, int], ...]

    @property
    def n_scalar(self) -> int:
        return len(self.scalar_index)

    @property
    def m_modes(self) -> int:
        return 3 * self.n_scalar

    def __len__(self) -> int:
        return self.m_modes

    def family_of(self, i: int) -> str:
        return STRESS_FAMILIES[i % 3]

    def family_indices(self, family: str) -> np.ndarray:
        offset = STRESS_FAMILIES.index(family)
        return np.arange(offset, self.m_modes, 3)

    def _factors(self, points) -> Tuple[np.ndarray, np.ndarray]:
        points = _as_points(points)
        table_x = _profile_table(self.profiles, points[:, 0], 1)
        table_y = _profile_table(self.profiles, points[:, 1], 1)
        ix = np.array([i for i, _ in self.scalar_index], dtype=int)
        iy = np.array([j for _, j in self.scalar_index], dtype=int)
        return table_x[:, ix, :], table_y[:, iy, :]

    def scalar_values(self, points) -> np.ndarray:
        x, y = self._factors(points)
        return x[0] * y[0]

    def scalar_gradients(self, points) -> np.ndarray:
        x, y = self._factors(points)
        return np.stack([x[1] * y[0], x[0] * y[1]], axis=-1)

    def values(self, points) -> np.ndarray:
        scalars = self.scalar_values(points)
        # (n_scalar, 3, P, 2, 2) -> (m, P, 2, 2)
        tensors = scalars[:, None, :, None, None] * _FAMILY_TENSORS[None, :, None, :, :]
        return tensors.reshape((self.m_modes,) + tensors.shape[2:])

    def divergences(self, points) -> np.ndarray:
        """(∇·ψ)_a = Σ_b ∂ψ_ab/∂x_b"""
        grads = self.scalar_gradients(points)
        div = np.einsum('fab,qPb->qfPa', _FAMILY_TENSORS, grads)
        return div.reshape((self.m_modes,) + div.shape[2:])


def build_velocity_basis(spec: DomainSpec, k_max: int) -> VelocityBasis:
    """
    构造速度基

    Args:
        spec: 计算区域
        k_max: 每方向最高模态编号

    Returns:
        VelocityBasis: 正方形上 n = k_max²，环面上 n = (2k_max+1)² − 1
    """
    if k_max < 1:
        raise ValueError(f"k_max 必须 ≥ 1，当前为 {k_max}")

    if spec.is_noslip:
        profiles = tuple(envelope_profile(j, spec.side_length) for j in range(1, k_max + 1))
        mode_index = tuple((j, k) for j in range(k_max) for k in range(k_max))
    else:
        profiles = _fourier_profiles(k_max, spec.side_length, normalized=False)
        count = len(profiles)
        mode_index = tuple((j, k) for j in range(count) for k in range(count) if (j, k) != (0, 0))

    basis = VelocityBasis(spec, k_max, profiles, mode_index)
    logger.debug(f"速度基构造完成: {spec.mode}, k_max={k_max}, n_modes={basis.n_modes}")
    return basis


def build_stress_basis(spec: DomainSpec, k_max: int) -> StressBasis:
    """
    构造应力基

    Args:
        spec: 计算区域
        k_max: 每方向标量模态数

    Returns:
        StressBasis: m_modes = 3·k_max²
    """
    if k_max < 1:
        raise ValueError(f"k_max 必须 ≥ 1，当前为 {k_max}")

    length = spec.side_length
    if spec.is_noslip:
        coef = math.sqrt(2.0 / length)
        profiles = tuple(TrigProfile(((coef, j * math.pi / length, 'sin'),))
                         for j in range(1, k_max + 1))
    else:
        profiles = _fourier_profiles(k_max, length, normalized=True)[:k_max]
    scalar_index = tuple((j, k) for j in range(k_max) for k in range(k_max))

    basis = StressBasis(spec, k_max, profiles, scalar_index)
    logger.debug(f"应力基构造完成: {spec.mode}, k_max={k_max}, m_modes={basis.m_modes}")
    return basis


def evaluate_field(coeffs, basis: Union[VelocityBasis, StressBasis], points) -> np.ndarray:
    """
    计算模态展开 Σ c_j·φ^j 在各点的值

    Returns:
        np.ndarray: 速度基为 (P, 2)，应力基为 (P, 2, 2)
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim != 1 or coeffs.shape[0] != len(basis):
        raise ValueError(f"系数长度 {coeffs.shape} 与基维数 {len(basis)} 不一致")
    return np.tensordot(coeffs, basis.values(points), axes=(0, 0))
