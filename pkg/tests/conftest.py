# -*- coding: utf-8 -*-
"""
共享测试夹具
"""

import os
import sys
import tempfile

# 日志写到临时目录，避免污染仓库
os.environ.setdefault('GALERKIN_LOG_FILE', os.path.join(tempfile.gettempdir(), 'galerkin_sim_test.log'))

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from basis import DomainSpec  # noqa: E402
from operators import FluidParams, GalerkinOperators, build_galerkin_system  # noqa: E402


@pytest.fixture(scope='session')
def square():
    return DomainSpec()


@pytest.fixture(scope='session')
def torus():
    return DomainSpec('periodic_torus')


@pytest.fixture(scope='session')
def params():
    return FluidParams(reynolds=1.0, weissenberg=1.0, retardation=0.5)


@pytest.fixture(scope='session')
def system_k1(square):
    return build_galerkin_system(square, 1)


@pytest.fixture(scope='session')
def system_k2(square):
    return build_galerkin_system(square, 2)


@pytest.fixture(scope='session')
def system_k4(square):
    return build_galerkin_system(square, 4)


@pytest.fixture(scope='session')
def torus_k1(torus):
    return build_galerkin_system(torus, 1)


@pytest.fixture
def scalar_ops():
    """单模态算子：M = 1，K = 2，无对流与耦合；a = 0.5、Re = 1 时 da/dt = −a"""
    return GalerkinOperators(
        mass=np.array([[1.0]]),
        stiffness=np.array([[2.0]]),
        convection=np.zeros((1, 1, 1)),
        coupling=np.zeros((1, 1)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20160729)
