# -*- coding: utf-8 -*-
"""
运行配置模块
解析 TOML 运行文件、校验全部约束、输出配置回显与运行摘要

配置优先级：命令行参数 > 环境变量 GALERKIN_OUTPUT_DIR（仅输出目录）> 配置文件 > 预设模式 > 默认值
"""

import math
import os
import re
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from analysis.manufactured import VARIANTS as MANUFACTURED_VARIANTS
from analysis.manufactured import manufactured_solution
from basis import DOMAIN_MODES, NOSLIP_SQUARE, DomainSpec, default_quad_order
from config import DEFAULT_CONFIG_MODE, DEFAULT_RUN_CONFIG, EXIT_CHECK_FAILED, EXIT_OK
from dynamics import SolverConfig
from log_config import get_logger
from operators import FluidParams, GalerkinSystem, InitialData, make_modal_forcing
from utils import deep_merge, is_integer, is_real, load_config_defaults, write_json

logger = get_logger(__name__)

INITIAL_PRESETS = ('rest', 'isotropic_stress', 'single_mode', 'manufactured')
FORCING_PRESETS = ('zero', 'manufactured', 'shear', 'oscillating')

CHECK_NAMES = ('energy_equation', 'gronwall_bound', 'ladyzhenskaya', 'convergence', 'finite_state')
PASS, FAIL, SKIPPED = 'pass', 'fail', 'skipped'

CONFIG_GRAMMAR = """\
运行配置文件为 TOML（key = value，按 [section] 分节），未知分节或键会被拒绝：

  [fluid]        reynolds = 1.0, weissenberg = 1.0, retardation = 0.5   (Re > 0, We > 0, 0 < a < 1)
  [domain]       mode = "noslip_square" | "periodic_torus", k_max = 2, quad_order = 0 (0 为自动)
  [solver]       t_final = 1.0, dt = 0.001, scheme = "rk4" | "imex" | "exact_stress", output_stride = 1
  [initial]      preset = "rest" | "isotropic_stress" | "single_mode" | "manufactured",
                 amplitude = 1.0, mode = 1, value = 1.0
  [forcing]      preset = "zero" | "manufactured" | "shear" | "oscillating", amplitude = 1.0
  [manufactured] variant = "galerkin" | "continuous", amplitude = 1.0
  [output]       directory = "output", seed = 20160729
  [checks]       energy_tolerance = 1e-5, epsilon = 1e-6, n_samples = 1000,
                 k_list = [1, 2, 4], dt_list = [0.02, 0.01, 0.005]

优先级：命令行参数 > GALERKIN_OUTPUT_DIR > 配置文件 > --preset > 默认值
"""


class ConfigError(ValueError):
    """
    配置错误：汇总全部校验问题，语法错误时带行列号
    """

    def __init__(self, errors, line: Optional[int] = None, column: Optional[int] = None):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        self.line = line
        self.column = column
        location = f" (第{line}行, 第{column}列)" if line is not None else ''
        super().__init__('配置无效' + location + ': ' + '; '.join(self.errors))


@dataclass(frozen=True)
class InitialSelector:
    preset: str = 'rest'
    amplitude: float = 1.0
    mode: int = 1
    value: float = 1.0


@dataclass(frozen=True)
class ForcingSelector:
    preset: str = 'zero'
    amplitude: float = 1.0


@dataclass(frozen=True)
class ManufacturedSettings:
    variant: str = 'galerkin'
    amplitude: float = 1.0


@dataclass(frozen=True)
class OutputSettings:
    directory: str = 'output'
    seed: int = 20160729


@dataclass(frozen=True)
class CheckSettings:
    energy_tolerance: float = 1e-5
    epsilon: float = 1e-6
    n_samples: int = 1000
    k_list: Tuple[int, ...] = (1, 2, 4)
    dt_list: Tuple[float, ...] = (0.02, 0.01, 0.005)


@dataclass(frozen=True)
class RunConfig:
    """一次运行的完整配置"""
    params: FluidParams
    domain: DomainSpec
    k_max: int
    quad_order: int
    solver: SolverConfig
    initial: InitialSelector
    forcing: ForcingSelector
    manufactured: ManufacturedSettings
    output: OutputSettings
    checks: CheckSettings

    @property
    def effective_quad_order(self) -> int:
        return self.quad_order or default_quad_order(self.k_max)

    @property
    def output_dir(self) -> Path:
        return Path(self.output.directory)

    def to_dict(self) -> dict:
        """与 TOML 分节一一对应的嵌套字典（配置回显）"""
        checks = asdict(self.checks)
        checks['k_list'] = list(self.checks.k_list)
        checks['dt_list'] = list(self.checks.dt_list)
        return {
            'fluid': self.params.to_dict(),
            'domain': {'mode': self.domain.mode, 'k_max': self.k_max, 'quad_order': self.quad_order},
            'solver': {
                't_final': self.solver.t_final,
                'dt': self.solver.dt,
                'scheme': self.solver.scheme,
                'output_stride': self.solver.output_stride,
            },
            'initial': asdict(self.initial),
            'forcing': asdict(self.forcing),
            'manufactured': asdict(self.manufactured),
            'output': asdict(self.output),
            'checks': checks,
        }


_LOCATION_PATTERN = re.compile(r'line (\d+), column (\d+)')


def read_toml_text(text: str) -> dict:
    """
    解析 TOML 文本

    Raises:
        ConfigError: 语法错误，带行列号
    """
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        match = _LOCATION_PATTERN.search(str(e))
        line, column = (int(match.group(1)), int(match.group(2))) if match else (None, None)
        raise ConfigError([f"TOML 语法错误: {e}"], line, column) from e


def _velocity_mode_count(mode: str, k_max: int) -> int:
    return k_max ** 2 if mode == NOSLIP_SQUARE else (2 * k_max + 1) ** 2 - 1


def check_known_keys(raw: dict):
    """
    拒绝未知的分节与键

    Raises:
        ConfigError: 存在未知分节或键
    """
    errors = []
    for section, values in raw.items():
        if section not in DEFAULT_RUN_CONFIG:
            errors.append(f"未知的配置分节: [{section}]")
            continue
        if not isinstance(values, dict):
            errors.append(f"[{section}] 必须是分节")
            continue
        for key in values:
            if key not in DEFAULT_RUN_CONFIG[section]:
                errors.append(f"未知的配置键: [{section}] {key}")
    if errors:
        raise ConfigError(errors)


def build_run_config(raw: dict) -> RunConfig:
    """
    由完整的嵌套字典构造并校验 RunConfig，收集所有错误后一次性报告

    Raises:
        ConfigError: 任一约束不满足
    """
    check_known_keys(raw)
    errors = []

    cfg = deep_merge(DEFAULT_RUN_CONFIG, raw)
    fluid, domain, solver = cfg['fluid'], cfg['domain'], cfg['solver']
    initial, forcing, manufactured = cfg['initial'], cfg['forcing'], cfg['manufactured']
    output, checks = cfg['output'], cfg['checks']

    errors.extend(FluidParams.validation_errors(fluid['reynolds'], fluid['weissenberg'], fluid['retardation']))

    if domain['mode'] not in DOMAIN_MODES:
        errors.append(f"[domain] mode 必须是 {' / '.join(DOMAIN_MODES)} 之一，当前为 {domain['mode']!r}")
    if not (is_integer(domain['k_max']) and domain['k_max'] >= 1):
        errors.append(f"[domain] k_max 必须为 ≥ 1 的整数，当前为 {domain['k_max']!r}")
    if not (is_integer(domain['quad_order']) and (domain['quad_order'] == 0 or domain['quad_order'] >= 2)):
        errors.append(f"[domain] quad_order 必须为 0（自动）或 ≥ 2 的整数，当前为 {domain['quad_order']!r}")

    errors.extend(SolverConfig.validation_errors(solver['t_final'], solver['dt'], solver['scheme'],
                                                 solver['output_stride']))

    if initial['preset'] not in INITIAL_PRESETS:
        errors.append(f"[initial] preset 必须是 {' / '.join(INITIAL_PRESETS)} 之一，当前为 {initial['preset']!r}")
    for key in ('amplitude', 'value'):
        if not (is_real(initial[key]) and math.isfinite(initial[key])):
            errors.append(f"[initial] {key} 必须为有限实数，当前为 {initial[key]!r}")
    if not is_integer(initial['mode']) or initial['mode'] < 1:
        errors.append(f"[initial] mode 必须为 ≥ 1 的整数，当前为 {initial['mode']!r}")
    elif domain['mode'] in DOMAIN_MODES and is_integer(domain['k_max']) and domain['k_max'] >= 1:
        n_modes = _velocity_mode_count(domain['mode'], domain['k_max'])
        if initial['mode'] > n_modes:
            errors.append(f"[initial] mode 必须在 1..{n_modes} 之间，当前为 {initial['mode']}")

    if forcing['preset'] not in FORCING_PRESETS:
        errors.append(f"[forcing] preset 必须是 {' / '.join(FORCING_PRESETS)} 之一，当前为 {forcing['preset']!r}")
    if not (is_real(forcing['amplitude']) and math.isfinite(forcing['amplitude'])):
        errors.append(f"[forcing] amplitude 必须为有限实数，当前为 {forcing['amplitude']!r}")

    if manufactured['variant'] not in MANUFACTURED_VARIANTS:
        errors.append(f"[manufactured] variant 必须是 {' / '.join(MANUFACTURED_VARIANTS)} 之一，"
                      f"当前为 {manufactured['variant']!r}")
    if not (is_real(manufactured['amplitude']) and math.isfinite(manufactured['amplitude'])):
        errors.append(f"[manufactured] amplitude 必须为有限实数，当前为 {manufactured['amplitude']!r}")

    if not (isinstance(output['directory'], str) and output['directory']):
        errors.append(f"[output] directory 必须为非空字符串，当前为 {output['directory']!r}")
    if not (is_integer(output['seed']) and output['seed'] >= 0):
        errors.append(f"[output] seed 必须为非负整数，当前为 {output['seed']!r}")

    if not (is_real(checks['energy_tolerance']) and checks['energy_tolerance'] > 0):
        errors.append(f"[checks] energy_tolerance 必须为正数，当前为 {checks['energy_tolerance']!r}")
    if not (is_real(checks['epsilon']) and checks['epsilon'] > 0):
        errors.append(f"[checks] epsilon 必须为正数，当前为 {checks['epsilon']!r}")
    if not (is_integer(checks['n_samples']) and checks['n_samples'] >= 1):
        errors.append(f"[checks] n_samples 必须为 ≥ 1 的整数，当前为 {checks['n_samples']!r}")
    k_list, dt_list = checks['k_list'], checks['dt_list']
    if not (isinstance(k_list, list) and k_list and all(is_integer(k) and k >= 1 for k in k_list)
            and all(k1 > k0 for k0, k1 in zip(k_list, k_list[1:]))):
        errors.append(f"[checks] k_list 必须为严格递增的正整数列表，当前为 {k_list!r}")
    if not (isinstance(dt_list, list) and dt_list and all(is_real(d) and d > 0 for d in dt_list)
            and all(d1 < d0 for d0, d1 in zip(dt_list, dt_list[1:]))):
        errors.append(f"[checks] dt_list 必须为严格递减的正数列表，当前为 {dt_list!r}")

    if errors:
        raise ConfigError(errors)

    params = FluidParams(float(fluid['reynolds']), float(fluid['weissenberg']), float(fluid['retardation']))
    return RunConfig(
        params=params,
        domain=DomainSpec(domain['mode']),
        k_max=domain['k_max'],
        quad_order=domain['quad_order'],
        solver=SolverConfig(params, float(solver['t_final']), float(solver['dt']), solver['scheme'],
                            solver['output_stride']),
        initial=InitialSelector(initial['preset'], float(initial['amplitude']), initial['mode'],
                                float(initial['value'])),
        forcing=ForcingSelector(forcing['preset'], float(forcing['amplitude'])),
        manufactured=ManufacturedSettings(manufactured['variant'], float(manufactured['amplitude'])),
        output=OutputSettings(output['directory'], output['seed']),
        checks=CheckSettings(float(checks['energy_tolerance']), float(checks['epsilon']), checks['n_samples'],
                             tuple(k_list), tuple(float(d) for d in dt_list)),
    )


def parse_config(text: str, preset: str = DEFAULT_CONFIG_MODE) -> RunConfig:
    """
    解析运行配置文本

    Args:
        text: UTF-8 TOML 文本
        preset: 作为底层默认值的预设模式

    Returns:
        RunConfig: 校验通过的配置

    Raises:
        ConfigError: 语法错误或约束不满足
    """
    raw = read_toml_text(text)
    check_known_keys(raw)
    return build_run_config(deep_merge(load_config_defaults(preset), raw))


def emit_config(config: RunConfig) -> str:
    """配置回显为 TOML 文本，parse_config(emit_config(c)) == c"""
    return tomli_w.dumps(config.to_dict())


def layered_config(path: Optional[str] = None, preset: str = DEFAULT_CONFIG_MODE) -> dict:
    """
    预设模式之上叠加配置文件与环境变量，得到尚未校验的嵌套字典

    Raises:
        ConfigError: 文件无法读取或语法错误
    """
    layered = load_config_defaults(preset)
    if path:
        try:
            text = Path(path).read_text(encoding='utf-8')
        except (OSError, UnicodeDecodeError) as e:
            raise ConfigError([f"无法读取配置文件 {path}: {e}"]) from e
        raw = read_toml_text(text)
        check_known_keys(raw)
        layered = deep_merge(layered, raw)
        logger.info(f"📄 加载配置文件: {path}")

    env_dir = os.environ.get('GALERKIN_OUTPUT_DIR')
    if env_dir:
        layered['output']['directory'] = env_dir
        logger.debug(f"环境变量覆盖输出目录: {env_dir}")
    return layered


@dataclass
class RunSummary:
    """
    运行摘要，checks 中每一项都是 pass / fail / skipped 之一
    """
    command: str
    config: dict
    seed: int
    wall_time: float = 0.0
    final_energies: Dict[str, float] = field(default_factory=dict)
    max_energy_residual: Optional[float] = None
    checks: Dict[str, str] = field(default_factory=lambda: {name: SKIPPED for name in CHECK_NAMES})
    details: Dict[str, object] = field(default_factory=dict)

    def set_check(self, name: str, passed: Optional[bool]):
        if name not in CHECK_NAMES:
            raise ValueError(f"未知的检查项: {name}")
        self.checks[name] = SKIPPED if passed is None else (PASS if passed else FAIL)

    @property
    def exit_code(self) -> int:
        return EXIT_CHECK_FAILED if FAIL in self.checks.values() else EXIT_OK

    def to_dict(self) -> dict:
        return {
            'command': self.command,
            'config': self.config,
            'seed': self.seed,
            'wall_time': self.wall_time,
            'final_energies': self.final_energies,
            'max_energy_residual': self.max_energy_residual,
            'checks': dict(self.checks),
            'details': self.details,
        }

    def write(self, path) -> Path:
        return write_json(self.to_dict(), path)


def initial_data_for(config: RunConfig, system: GalerkinSystem) -> InitialData:
    """
    按初始条件与外力选择器构造 InitialData

    Args:
        config: 运行配置
        system: 离散系统

    Returns:
        InitialData: 初值与外力
    """
    selector = config.initial
    forcing_selector = config.forcing
    solution = None
    if selector.preset == 'manufactured' or forcing_selector.preset == 'manufactured':
        solution = manufactured_solution(config.params, system.velocity_basis, system.stress_basis, system.quad,
                                         config.manufactured.variant, config.manufactured.amplitude)

    v0 = tau0 = None
    if selector.preset == 'isotropic_stress':
        value = selector.value

        def tau0(points):
            return value * np.broadcast_to(np.eye(2), (points.shape[0], 2, 2)).copy()
    elif selector.preset == 'single_mode':
        basis = system.velocity_basis
        index, amplitude = selector.mode - 1, selector.amplitude

        def v0(points):
            return amplitude * basis.values(points)[index]
    elif selector.preset == 'manufactured':
        v0, tau0 = solution.velocity, solution.stress

    f, steady = None, True
    length = system.domain.side_length
    amplitude = forcing_selector.amplitude
    if forcing_selector.preset == 'manufactured':
        f = solution.forcing
    elif forcing_selector.preset == 'shear':
        def f(points, t=0.0):
            return np.column_stack([amplitude * np.sin(2.0 * np.pi * points[:, 1] / length),
                                    np.zeros(points.shape[0])])
    elif forcing_selector.preset == 'oscillating':
        steady = False

        def f(points, t=0.0):
            envelope = amplitude * np.cos(2.0 * np.pi * t)
            return envelope * np.column_stack([np.sin(2.0 * np.pi * points[:, 1] / length),
                                               np.sin(2.0 * np.pi * points[:, 0] / length)])

    return InitialData(v0=v0, tau0=tau0, f=f, steady_forcing=steady)


def modal_forcing_for(system: GalerkinSystem, data: InitialData):
    """InitialData 中外力的模态载荷函数"""
    return make_modal_forcing(system, data.f, steady=data.steady_forcing)
