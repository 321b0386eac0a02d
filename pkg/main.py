#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
项目入口：粘弹性 Galerkin 模拟与验证命令行工具

使用方法：
    python main.py simulate --preset relaxation
    python main.py energy-check --config configs/energy.toml
    python main.py --help
"""

import sys

from cli import SimulationCLI


def main():
    """运行命令行工具并以其退出码退出"""
    sys.exit(SimulationCLI().run())


if __name__ == "__main__":
    main()
