# -*- coding: utf-8 -*-
"""
Ladyzhenskaya 不等式检验

对 H¹₀ 中的标量场 w 计算
    ratio = ‖w‖_L4 / (2^{1/4}·‖w‖_L2^{1/2}·‖∇w‖_L2^{1/2})
并判定 ratio ≤ 1 + 1e-9。只在无滑移正方形上适用，环面上报告跳过。
"""

import time
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np
import pandas as pd

from basis import QuadratureRule, VelocityBasis
from config import LADYZHENSKAYA_CONSTANT, LADYZHENSKAYA_TOLERANCE
from log_config import get_logger, log_performance
from utils import make_rng

logger = get_logger(__name__)

STREAM = 'stream'
VELOCITY = 'velocity'
FIELD_TYPES = (STREAM, VELOCITY)


@dataclass(frozen=True)
class LadyzhenskayaReport:
    """单个标量场的检验结果，skipped 时 ratio 为 NaN"""
    ratio: float
    l2_norm: float
    l4_norm: float
    grad_norm: float
    passed: Optional[bool]
    skipped: bool = False
    reason: str = ''
    component: str = ''

    @property
    def status(self) -> str:
        if self.skipped:
            return 'skipped'
        return 'pass' if self.passed else 'fail'

    def to_dict(self) -> dict:
        return asdict(self)


def _skipped(reason: str, component: str = '') -> LadyzhenskayaReport:
    nan = float('nan')
    return LadyzhenskayaReport(nan, nan, nan, nan, None, True, reason, component)


def _ratio_from_samples(values: np.ndarray, gradients: np.ndarray, weights: np.ndarray):
    """values (..., Q), gradients (..., Q, 2) -> (ratio, l2, l4, grad)，零场的 ratio 为 NaN"""
    l2 = np.sqrt(values ** 2 @ weights)
    l4 = (values ** 4 @ weights) ** 0.25
    grad = np.sqrt(np.sum(gradients ** 2, axis=-1) @ weights)
    denominator = LADYZHENSKAYA_CONSTANT * np.sqrt(l2) * np.sqrt(grad)
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.where(denominator > 0, l4 / denominator, np.nan)
    return ratio, l2, l4, grad


def _report(ratio, l2, l4, grad, component: str = '') -> LadyzhenskayaReport:
    if not np.isfinite(ratio):
        return _skipped('零场，比值无定义', component)
    return LadyzhenskayaReport(
        ratio=float(ratio), l2_norm=float(l2), l4_norm=float(l4), grad_norm=float(grad),
        passed=bool(ratio <= 1.0 + LADYZHENSKAYA_TOLERANCE), component=component,
    )


def check_scalar_field(values_fn: Callable[[np.ndarray], np.ndarray],
                       gradient_fn: Callable[[np.ndarray], np.ndarray],
                       quad: QuadratureRule) -> LadyzhenskayaReport:
    """
    检验给定解析形式的标量场

    Args:
        values_fn: points -> (P,) 标量值
        gradient_fn: points -> (P, 2) 梯度
        quad: 求积规则

    Returns:
        LadyzhenskayaReport: 检验结果
    """
    values = np.asarray(values_fn(quad.nodes), dtype=float)
    gradients = np.asarray(gradient_fn(quad.nodes), dtype=float)
    return _report(*_ratio_from_samples(values, gradients, quad.weights))


def _scalar_samples(basis: VelocityBasis, quad: QuadratureRule, field: str):
    """返回 [(分量名, 值 (n, Q), 梯度 (n, Q, 2))]"""
    if field == STREAM:
        return [('stream', basis.stream_values(quad.nodes), basis.stream_gradients(quad.nodes))]
    if field == VELOCITY:
        values = basis.values(quad.nodes)
        gradients = basis.gradients(quad.nodes)
        return [('v1', values[..., 0], gradients[..., 0, :]),
                ('v2', values[..., 1], gradients[..., 1, :])]
    raise ValueError(f"未知的场类型: {field}，可选: {', '.join(FIELD_TYPES)}")


def check_ladyzhenskaya(coeffs, basis: VelocityBasis, quad: QuadratureRule,
                        field: str = STREAM) -> LadyzhenskayaReport:
    """
    检验模态展开给出的标量场

    Args:
        coeffs: 模态系数
        basis: 速度基
        quad: 求积规则
        field: 'stream' 检验流函数；'velocity' 检验两个速度分量并返回比值较大者

    Returns:
        LadyzhenskayaReport: 检验结果
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (basis.n_modes,):
        raise ValueError(f"系数长度 {coeffs.shape} 与基维数 {basis.n_modes} 不一致")
    if not basis.domain.is_noslip:
        return _skipped('周期环面上的场不属于 H¹₀', field)

    reports = []
    for component, values, gradients in _scalar_samples(basis, quad, field):
        ratio, l2, l4, grad = _ratio_from_samples(coeffs @ values,
                                                  np.tensordot(coeffs, gradients, axes=(0, 0)),
                                                  quad.weights)
        reports.append(_report(ratio, l2, l4, grad, component))

    checked = [r for r in reports if not r.skipped]
    if not checked:
        return reports[0]
    return max(checked, key=lambda r: r.ratio)


def random_ratio_sweep(basis: VelocityBasis, quad: QuadratureRule, n_samples: int, seed: int,
                       field: str = STREAM) -> pd.DataFrame:
    """
    对标准正态随机系数生成的场批量检验

    Args:
        basis: 速度基
        quad: 求积规则
        n_samples: 随机场个数
        seed: 随机种子
        field: 'stream' 或 'velocity'

    Returns:
        pd.DataFrame: 列 sample, component, ratio, l2_norm, l4_norm, grad_norm, passed
    """
    if n_samples < 1:
        raise ValueError(f"样本数必须 ≥ 1，当前为 {n_samples}")
    if not basis.domain.is_noslip:
        logger.warning("⚠️ 周期环面上跳过 Ladyzhenskaya 检验")
        return pd.DataFrame(columns=['sample', 'component', 'ratio', 'l2_norm', 'l4_norm', 'grad_norm', 'passed'])

    start_time = time.time()
    coeffs = make_rng(seed).standard_normal((n_samples, basis.n_modes))

    frames = []
    for component, values, gradients in _scalar_samples(basis, quad, field):
        sample_values = coeffs @ values
        sample_gradients = np.tensordot(coeffs, gradients, axes=(1, 0))
        ratio, l2, l4, grad = _ratio_from_samples(sample_values, sample_gradients, quad.weights)
        frames.append(pd.DataFrame({
            'sample': np.arange(n_samples),
            'component': component,
            'ratio': ratio,
            'l2_norm': l2,
            'l4_norm': l4,
            'grad_norm': grad,
            'passed': ratio <= 1.0 + LADYZHENSKAYA_TOLERANCE,
        }))
    result = pd.concat(frames, ignore_index=True).sort_values(['sample', 'component'], kind='stable')
    result = result.reset_index(drop=True)

    log_performance('random_ratio_sweep', time.time() - start_time,
                    samples=n_samples, field=field, max_ratio=f"{np.nanmax(result['ratio']):.6f}")
    return result
