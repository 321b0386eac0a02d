# -*- coding: utf-8 -*-
"""
命令行接口模块
处理命令行参数解析、配置合并与各子命令的执行
"""

import argparse
import math
import time
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from analysis.convergence import convergence_passed, convergence_study
from analysis.energy import apriori_bound, continuity_diagnostic, energy_ledger
from analysis.ladyzhenskaya import FIELD_TYPES, STREAM, check_scalar_field, random_ratio_sweep
from analysis.stability import perturb_initial_data, stability_experiment
from config import (
    DEFAULT_CONFIG_MODE,
    EXIT_CONFIG_ERROR,
    EXIT_INSTABILITY,
    RUN_PRESETS,
)
from dynamics import IMEX, SCHEMES, NumericalInstabilityError, Trajectory, simulate
from log_config import LoggerMixin, get_logger, log_check_status, log_error_with_context
from operators import GalerkinSystem, build_galerkin_system, project_initial, validate_initial_data
from run_config import (
    CONFIG_GRAMMAR,
    ConfigError,
    RunConfig,
    RunSummary,
    build_run_config,
    emit_config,
    initial_data_for,
    layered_config,
    modal_forcing_for,
)
from utils import format_duration, merge_config_and_args, print_current_config, write_csv

logger = get_logger(__name__)

COMMANDS = ('simulate', 'energy-check', 'stability', 'ladyzhenskaya', 'converge')


class SimulationCLI(LoggerMixin):
    """粘弹性 Galerkin 模拟器命令行接口"""

    def __init__(self):
        self.start_time = None

    def create_parser(self) -> argparse.ArgumentParser:
        """
        创建命令行参数解析器

        Returns:
            argparse.ArgumentParser: 配置好的参数解析器
        """
        common = argparse.ArgumentParser(add_help=False)

        # 配置文件相关
        common.add_argument('--config', help='TOML 运行配置文件路径')
        common.add_argument('--preset', default=DEFAULT_CONFIG_MODE, choices=list(RUN_PRESETS.keys()),
                            help=f'使用预设的配置模式（默认: {DEFAULT_CONFIG_MODE}）。'
                                 f'可选: {", ".join(RUN_PRESETS.keys())}')
        common.add_argument('--output-dir', help='输出目录（覆盖配置文件与 GALERKIN_OUTPUT_DIR）')
        common.add_argument('--show-config', action='store_true', help='显示合并后的配置并退出')

        # 物理参数
        common.add_argument('--reynolds', type=float, help='Reynolds 数 Re > 0')
        common.add_argument('--weissenberg', type=float, help='Weissenberg 数 We > 0')
        common.add_argument('--retardation', type=float, help='迟滞参数 a，0 < a < 1')

        # 离散参数
        common.add_argument('--k-max', type=int, help='每方向最高模态编号')
        common.add_argument('--quad-order', type=int, help='求积阶数（0 为自动）')
        common.add_argument('--dt', type=float, help='时间步长')
        common.add_argument('--t-final', type=float, help='终止时间')
        common.add_argument('--scheme', choices=SCHEMES, help='时间推进格式')
        common.add_argument('--stride', type=int, help='输出间隔步数')

        # 检验参数
        common.add_argument('--seed', type=int, help='随机种子')
        common.add_argument('--epsilon', type=float, help='稳定性实验的扰动幅值')
        common.add_argument('--n-samples', type=int, help='Ladyzhenskaya 随机场个数')
        common.add_argument('--k-list', type=int, nargs='+', help='收敛性研究的 k_max 列表')
        common.add_argument('--dt-list', type=float, nargs='+', help='收敛性研究的步长列表')

        parser = argparse.ArgumentParser(
            description='二维 Oldroyd 型粘弹性流体的谱 Galerkin 模拟与数值验证工具\n\n' + CONFIG_GRAMMAR,
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        subparsers = parser.add_subparsers(dest='command', required=True, metavar='{' + '|'.join(COMMANDS) + '}')
        subparsers.add_parser('simulate', parents=[common], help='时间推进并输出轨迹')
        subparsers.add_parser('energy-check', parents=[common], help='核算能量方程')
        subparsers.add_parser('stability', parents=[common], help='两条轨迹的 Grönwall 稳定性实验')
        lady = subparsers.add_parser('ladyzhenskaya', parents=[common], help='随机场 Ladyzhenskaya 不等式检验')
        lady.add_argument('--field', choices=FIELD_TYPES, default=STREAM, help='检验流函数或速度分量')
        subparsers.add_parser('converge', parents=[common], help='关于 k_max 与 dt 的收敛性研究')
        return parser

    def parse_and_merge_args(self, args=None) -> Tuple[argparse.Namespace, RunConfig]:
        """
        解析命令行参数并与配置文件、预设模式合并

        Args:
            args: 命令行参数列表（用于测试）

        Returns:
            Tuple[argparse.Namespace, RunConfig]: 原始参数与校验后的配置
        """
        parser = self.create_parser()
        parsed_args = parser.parse_args(args)

        layered = layered_config(parsed_args.config, parsed_args.preset)
        merged = merge_config_and_args(layered, parsed_args)
        return parsed_args, build_run_config(merged)

    def handle_show_config(self, args: argparse.Namespace, config: RunConfig) -> bool:
        """
        处理显示配置的请求

        Returns:
            bool: 是否应该退出程序
        """
        if args.show_config:
            print_current_config(config.to_dict(), args.command)
            print(emit_config(config))
            return True
        return False

    def build_system(self, config: RunConfig) -> GalerkinSystem:
        return build_galerkin_system(config.domain, config.k_max, config.effective_quad_order)

    def new_summary(self, command: str, config: RunConfig) -> RunSummary:
        return RunSummary(command=command, config=config.to_dict(), seed=config.output.seed)

    def finish(self, summary: RunSummary, config: RunConfig) -> RunSummary:
        summary.wall_time = time.time() - self.start_time
        summary.write(config.output_dir / 'summary.json')
        for name, check_status in summary.checks.items():
            log_check_status(name, check_status)
        status = '✅ 全部通过' if summary.exit_code == 0 else '❌ 存在未通过的检查'
        self.logger.info(f"{status} (耗时 {format_duration(summary.wall_time)})")
        return summary

    def _run_trajectory(self, config: RunConfig, system: GalerkinSystem) -> Tuple[Trajectory, object]:
        data = initial_data_for(config, system)
        validate_initial_data(system, data)
        forcing = modal_forcing_for(system, data)
        trajectory = simulate(config.solver, system.operators, project_initial(system, data), forcing)
        return trajectory, forcing

    @staticmethod
    def _final_energies(trajectory: Trajectory) -> dict:
        return {
            'kinetic': float(trajectory.kinetic[-1]),
            'stress_energy': float(trajectory.stress_energy[-1]),
            'total': float(trajectory.total_energy[-1]),
        }

    def cmd_simulate(self, config: RunConfig) -> RunSummary:
        """时间推进，写出 trajectory.csv 与 summary.json"""
        self.log_method_call('cmd_simulate', k_max=config.k_max, scheme=config.solver.scheme)
        summary = self.new_summary('simulate', config)
        system = self.build_system(config)
        trajectory, forcing = self._run_trajectory(config, system)

        write_csv(trajectory.to_frame(), config.output_dir / 'trajectory.csv')
        ledger = energy_ledger(trajectory, system.operators, config.params, forcing)
        summary.final_energies = self._final_energies(trajectory)
        summary.max_energy_residual = ledger.max_abs_residual
        summary.set_check('finite_state', True)
        summary.details['samples'] = len(trajectory)
        self.log_method_result('cmd_simulate', 'Trajectory', len(trajectory))
        return self.finish(summary, config)

    def cmd_energy_check(self, config: RunConfig) -> RunSummary:
        """核算能量方程，写出 energy.csv；最大相对残差低于容差时通过"""
        self.log_method_call('cmd_energy_check', k_max=config.k_max, tolerance=config.checks.energy_tolerance)
        summary = self.new_summary('energy-check', config)
        system = self.build_system(config)
        trajectory, forcing = self._run_trajectory(config, system)

        ledger = energy_ledger(trajectory, system.operators, config.params, forcing)
        write_csv(ledger.to_frame(), config.output_dir / 'energy.csv')

        summary.final_energies = self._final_energies(trajectory)
        summary.max_energy_residual = ledger.max_abs_residual
        summary.details['max_relative_residual'] = ledger.max_relative_residual
        summary.details['apriori_bound_holds'] = bool(np.all(apriori_bound(ledger)))
        summary.details['continuity'] = continuity_diagnostic(trajectory, system.operators)
        if len(trajectory) > 2:
            coarse = energy_ledger(trajectory.subsampled(2), system.operators, config.params, forcing)
            if ledger.max_abs_residual > 0.0:
                summary.details['stride_halving_ratio'] = coarse.max_abs_residual / ledger.max_abs_residual

        summary.set_check('finite_state', True)
        summary.set_check('energy_equation', ledger.max_relative_residual <= config.checks.energy_tolerance)
        return self.finish(summary, config)

    def cmd_stability(self, config: RunConfig) -> RunSummary:
        """两条轨迹的稳定性实验，写出 stability.csv；Grönwall 界与逐段速率条件都成立时通过"""
        epsilon = config.checks.epsilon
        self.log_method_call('cmd_stability', epsilon=epsilon, mode=config.initial.mode)
        summary = self.new_summary('stability', config)
        system = self.build_system(config)

        data = initial_data_for(config, system)
        validate_initial_data(system, data)
        mode = min(config.initial.mode, system.n_modes)
        report = stability_experiment(config.solver, system, data,
                                      perturb_initial_data(data, system, epsilon, mode))
        write_csv(report.to_frame(), config.output_dir / 'stability.csv')

        summary.details.update(report.summary())
        summary.details['epsilon'] = epsilon
        summary.set_check('finite_state', True)
        summary.set_check('gronwall_bound', report.passed)
        return self.finish(summary, config)

    def cmd_ladyzhenskaya(self, config: RunConfig, field: str = STREAM) -> RunSummary:
        """随机场 Ladyzhenskaya 检验，写出 ratios.csv；全部比值 ≤ 1 + 1e-9 时通过"""
        n_samples = config.checks.n_samples
        self.log_method_call('cmd_ladyzhenskaya', n_samples=n_samples, field=field, seed=config.output.seed)
        summary = self.new_summary('ladyzhenskaya', config)
        system = self.build_system(config)

        ratios = random_ratio_sweep(system.velocity_basis, system.quad, n_samples, config.output.seed, field)
        write_csv(ratios, config.output_dir / 'ratios.csv')

        if not system.domain.is_noslip:
            summary.set_check('ladyzhenskaya', None)
            summary.details['reason'] = '周期环面上的场不属于 H¹₀'
            return self.finish(summary, config)

        length = system.domain.side_length
        analytic = check_scalar_field(
            lambda p: np.sin(np.pi * p[:, 0] / length) * np.sin(np.pi * p[:, 1] / length),
            lambda p: (np.pi / length) * np.column_stack([
                np.cos(np.pi * p[:, 0] / length) * np.sin(np.pi * p[:, 1] / length),
                np.sin(np.pi * p[:, 0] / length) * np.cos(np.pi * p[:, 1] / length),
            ]),
            system.quad,
        )
        summary.details['analytic_ratio'] = analytic.ratio
        summary.details['max_ratio'] = float(ratios['ratio'].max())
        summary.details['n_fields'] = int(len(ratios))
        summary.set_check('ladyzhenskaya', bool(ratios['passed'].all()) and bool(analytic.passed))
        self.log_method_result('cmd_ladyzhenskaya', 'ratios', len(ratios))
        return self.finish(summary, config)

    def cmd_converge(self, config: RunConfig) -> RunSummary:
        """收敛性研究，写出 convergence.csv"""
        self.log_method_call('cmd_converge', k_list=list(config.checks.k_list), dt_list=list(config.checks.dt_list))
        summary = self.new_summary('converge', config)

        table = convergence_study(
            config.params, config.domain, config.checks.k_list, config.checks.dt_list,
            t_final=config.solver.t_final, scheme=config.solver.scheme,
            quad_order=config.quad_order or None, amplitude=config.manufactured.amplitude,
            transient_k_max=config.k_max,
        )
        write_csv(table, config.output_dir / 'convergence.csv')

        order_target = 1.0 if config.solver.scheme == IMEX else 4.0
        orders = table.loc[table['study'] == 'transient_dt', 'observed_order'].dropna()
        summary.details['transient_orders'] = [float(o) for o in orders]
        k_errors = table.loc[table['study'] == 'transient_k_max', 'error']
        summary.details['transient_k_errors'] = [float(e) for e in k_errors]
        summary.details['order_target'] = order_target
        summary.set_check('finite_state', True)
        summary.set_check('convergence', convergence_passed(table, order_target=order_target))
        return self.finish(summary, config)

    def dispatch(self, args: argparse.Namespace, config: RunConfig) -> RunSummary:
        if args.command == 'simulate':
            return self.cmd_simulate(config)
        if args.command == 'energy-check':
            return self.cmd_energy_check(config)
        if args.command == 'stability':
            return self.cmd_stability(config)
        if args.command == 'ladyzhenskaya':
            return self.cmd_ladyzhenskaya(config, args.field)
        return self.cmd_converge(config)

    def handle_instability(self, args: argparse.Namespace, config: RunConfig,
                           error: NumericalInstabilityError) -> int:
        """失稳时仍写出摘要，记录最后一个有限状态的时刻"""
        summary = self.new_summary(args.command, config)
        summary.set_check('finite_state', False)
        summary.details['instability'] = str(error)
        summary.details['last_finite_time'] = error.time
        last = error.last_state
        summary.details['last_state_norm'] = float(math.sqrt(last.a @ last.a + last.b @ last.b))
        self.finish(summary, config)
        return EXIT_INSTABILITY

    def run(self, args: Optional[List[str]] = None) -> int:
        """
        运行CLI程序

        Args:
            args: 命令行参数列表（用于测试）

        Returns:
            int: 退出代码，0 通过，1 检查未通过，2 配置错误，3 数值失稳
        """
        self.start_time = time.time()
        config = None
        parsed_args = None
        try:
            parsed_args, config = self.parse_and_merge_args(args)

            if self.handle_show_config(parsed_args, config):
                return 0

            print_current_config(config.to_dict(), parsed_args.command)
            Path(config.output.directory).mkdir(parents=True, exist_ok=True)
            self.logger.info(f"🚀 开始执行: {parsed_args.command}")
            return self.dispatch(parsed_args, config).exit_code

        except SystemExit as e:
            # argparse 的 --help 与参数错误
            return e.code if isinstance(e.code, int) else EXIT_CONFIG_ERROR
        except ConfigError as e:
            self.logger.error(f"❌ {e}")
            for message in e.errors:
                print(f"   - {message}")
            return EXIT_CONFIG_ERROR
        except NumericalInstabilityError as e:
            self.logger.error(f"❌ {e}")
            return self.handle_instability(parsed_args, config, e)
        except Exception as e:
            log_error_with_context(e, '程序执行失败', command=getattr(parsed_args, 'command', None))
            return 1
