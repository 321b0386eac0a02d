# -*- coding: utf-8 -*-
"""
项目配置模块
运行参数默认值、预设配置模式、校验容差与退出码
"""

# 默认配置模式
DEFAULT_CONFIG_MODE = 'default'

# 完整的运行配置默认值（与 TOML 配置文件的分节一一对应）
# quad_order = 0 表示按 k_max 自动选择积分阶数
DEFAULT_RUN_CONFIG = {
    'fluid': {
        'reynolds': 1.0,        # Re
        'weissenberg': 1.0,     # We
        'retardation': 0.5,     # a, 0 < a < 1
    },
    'domain': {
        'mode': 'noslip_square',
        'k_max': 2,
        'quad_order': 0,
    },
    'solver': {
        't_final': 1.0,
        'dt': 1e-3,
        'scheme': 'rk4',
        'output_stride': 1,
    },
    'initial': {
        'preset': 'rest',       # rest / isotropic_stress / single_mode / manufactured
        'amplitude': 1.0,       # single_mode 的速度幅值
        'mode': 1,              # single_mode 的模态编号（从1开始）
        'value': 1.0,           # isotropic_stress 的 c（τ0 = c·I）
    },
    'forcing': {
        'preset': 'zero',       # zero / manufactured / shear / oscillating
        'amplitude': 1.0,
    },
    'manufactured': {
        'variant': 'galerkin',  # galerkin / continuous
        'amplitude': 1.0,
    },
    'output': {
        'directory': 'output',
        'seed': 20160729,
    },
    'checks': {
        'energy_tolerance': 1e-5,
        'epsilon': 1e-6,
        'n_samples': 1000,
        'k_list': [1, 2, 4],
        'dt_list': [0.02, 0.01, 0.005],
    },
}

# 预设配置模式：只写与默认值不同的项
RUN_PRESETS = {
    'default': {},
    'relaxation': {
        'initial': {'preset': 'isotropic_stress', 'value': 1.0},
        'forcing': {'preset': 'zero'},
    },
    'energy': {
        'domain': {'k_max': 4},
        'initial': {'preset': 'rest'},
        'forcing': {'preset': 'manufactured'},
    },
    'steady': {
        'domain': {'k_max': 4},
        'initial': {'preset': 'manufactured'},
        'forcing': {'preset': 'manufactured'},
    },
    'stability': {
        'initial': {'preset': 'single_mode', 'amplitude': 1.0, 'mode': 1},
        'solver': {'dt': 1e-3},
        'checks': {'epsilon': 1e-6},
    },
    'ladyzhenskaya': {
        'domain': {'k_max': 6},
        'checks': {'n_samples': 1000},
    },
    'converge': {
        'fluid': {'reynolds': 5.0},
        'solver': {'t_final': 0.4},
        'checks': {'k_list': [1, 2, 4], 'dt_list': [0.02, 0.01, 0.005]},
    },
}

# Ladyzhenskaya 不等式常数 2^{1/4} 及判定容差
LADYZHENSKAYA_CONSTANT = 2.0 ** 0.25
LADYZHENSKAYA_TOLERANCE = 1e-9

# RK4 稳定步长安全系数：dt·λ_max ≤ 2.5
RK4_STABILITY_SAFETY = 2.5

# CSV 输出：17位有效数字
CSV_FLOAT_FORMAT = '%.17g'

# 退出码
EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_INSTABILITY = 3
