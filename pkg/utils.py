# -*- coding: utf-8 -*-
"""
工具函数模块
包含配置合并、结果文件输出、随机数生成等工具函数
"""

import argparse
import copy
import json
import math
import numbers
from pathlib import Path
from typing import Any, Dict

import numpy as np
import pandas as pd

from config import CSV_FLOAT_FORMAT, DEFAULT_CONFIG_MODE, DEFAULT_RUN_CONFIG, RUN_PRESETS
from log_config import get_logger

logger = get_logger(__name__)

# 命令行参数 -> (配置分节, 键)
FLAG_TO_KEY = {
    'reynolds': ('fluid', 'reynolds'),
    'weissenberg': ('fluid', 'weissenberg'),
    'retardation': ('fluid', 'retardation'),
    'k_max': ('domain', 'k_max'),
    'quad_order': ('domain', 'quad_order'),
    'dt': ('solver', 'dt'),
    't_final': ('solver', 't_final'),
    'scheme': ('solver', 'scheme'),
    'stride': ('solver', 'output_stride'),
    'output_dir': ('output', 'directory'),
    'seed': ('output', 'seed'),
    'epsilon': ('checks', 'epsilon'),
    'n_samples': ('checks', 'n_samples'),
    'k_list': ('checks', 'k_list'),
    'dt_list': ('checks', 'dt_list'),
}


def deep_merge(base: dict, override: dict) -> dict:
    """
    递归合并两个嵌套字典，override 中的值优先

    Returns:
        dict: 新字典，不修改输入
    """
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_config_defaults(config_mode: str) -> dict:
    """
    加载预设配置模式（DEFAULT_RUN_CONFIG 之上叠加 RUN_PRESETS 中的差异项）

    Args:
        config_mode: 配置模式名称

    Returns:
        dict: 完整的嵌套配置字典
    """
    if config_mode not in RUN_PRESETS:
        logger.warning(f"未找到配置模式 '{config_mode}'，使用默认配置")
        config_mode = DEFAULT_CONFIG_MODE

    config = deep_merge(DEFAULT_RUN_CONFIG, RUN_PRESETS[config_mode])
    logger.info(f"加载配置模式: '{config_mode}'")
    return config


def merge_config_and_args(config: dict, args: argparse.Namespace) -> dict:
    """
    合并配置字典和命令行参数，命令行参数优先级更高

    Args:
        config: 文件或预设给出的嵌套配置
        args: 命令行参数（未设置的为 None）

    Returns:
        dict: 合并后的新配置
    """
    merged = copy.deepcopy(config)
    for flag, (section, key) in FLAG_TO_KEY.items():
        value = getattr(args, flag, None)
        if value is None:
            continue
        merged.setdefault(section, {})[key] = list(value) if isinstance(value, (list, tuple)) else value
        logger.debug(f"命令行覆盖配置: [{section}] {key} = {value}")
    return merged


def print_current_config(config: dict, command: str = None):
    """
    打印当前使用的配置

    Args:
        config: 嵌套配置字典
        command: 子命令名称
    """
    fluid = config.get('fluid', {})
    domain = config.get('domain', {})
    solver = config.get('solver', {})
    initial = config.get('initial', {})
    forcing = config.get('forcing', {})

    print("\n" + "=" * 60)
    print("📋 当前运行配置")
    print("=" * 60)

    config_items = [
        ('子命令', command or 'N/A'),
        ('流体参数', f"Re={fluid.get('reynolds')}, We={fluid.get('weissenberg')}, a={fluid.get('retardation')}"),
        ('计算区域', f"{domain.get('mode')} (k_max={domain.get('k_max')}, quad_order={domain.get('quad_order') or '自动'})"),
        ('时间推进', f"{solver.get('scheme')}, dt={solver.get('dt')}, T={solver.get('t_final')}, stride={solver.get('output_stride')}"),
        ('初始条件', initial.get('preset')),
        ('外力', forcing.get('preset')),
        ('输出目录', config.get('output', {}).get('directory')),
        ('随机种子', config.get('output', {}).get('seed')),
    ]

    for label, value in config_items:
        print(f"   {label:<8}: {value}")

    print("=" * 60)


def is_real(value) -> bool:
    """实数标量（含 numpy 数值类型），布尔值除外"""
    return isinstance(value, numbers.Real) and not isinstance(value, (bool, np.bool_))


def is_integer(value) -> bool:
    return isinstance(value, numbers.Integral) and not isinstance(value, (bool, np.bool_))


def to_jsonable(value: Any) -> Any:
    """把 numpy 标量/数组、非有限浮点数转换为 JSON 可写的对象"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def write_csv(frame: pd.DataFrame, path) -> Path:
    """
    以 17 位有效数字、'\\n' 换行、带表头的格式写出 CSV

    Args:
        frame: 数据表
        path: 输出路径

    Returns:
        Path: 写出的文件路径
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')
    logger.info(f"💾 已写出 {path} ({len(frame)}行)")
    return path


def write_json(data: Dict[str, Any], path) -> Path:
    """写出 UTF-8 JSON 文件"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        json.dump(to_jsonable(data), handle, ensure_ascii=False, indent=2)
        handle.write('\n')
    logger.info(f"💾 已写出 {path}")
    return path


def make_rng(seed: int) -> np.random.Generator:
    """按种子构造可复现的随机数生成器"""
    return np.random.default_rng(seed)


def format_duration(seconds: float) -> str:
    """把秒数格式化为便于阅读的字符串"""
    if seconds >= 60:
        return f"{seconds / 60:.1f}分钟"
    return f"{seconds:.2f}秒"


def get_available_config_modes() -> list:
    """
    获取所有可用的配置模式

    Returns:
        list: 配置模式名称列表
    """
    return list(RUN_PRESETS.keys())
