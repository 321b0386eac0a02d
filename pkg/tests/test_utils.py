# -*- coding: utf-8 -*-
"""
工具函数测试
"""

import argparse

import numpy as np
import pandas as pd

from config import DEFAULT_RUN_CONFIG, RUN_PRESETS
from utils import (
    deep_merge,
    format_duration,
    get_available_config_modes,
    is_integer,
    is_real,
    load_config_defaults,
    make_rng,
    merge_config_and_args,
    write_csv,
)


def test_deep_merge_does_not_mutate():
    base = {'fluid': {'reynolds': 1.0, 'weissenberg': 1.0}}
    merged = deep_merge(base, {'fluid': {'reynolds': 5.0}})
    assert merged == {'fluid': {'reynolds': 5.0, 'weissenberg': 1.0}}
    assert base['fluid']['reynolds'] == 1.0


def test_unknown_mode_falls_back_to_default():
    assert load_config_defaults('no-such-mode') == DEFAULT_RUN_CONFIG


def test_presets_only_override():
    config = load_config_defaults('converge')
    assert config['fluid']['reynolds'] == 5.0
    assert config['fluid']['weissenberg'] == DEFAULT_RUN_CONFIG['fluid']['weissenberg']


def test_arguments_override_config():
    args = argparse.Namespace(reynolds=3.0, dt=None, k_list=(1, 2), output_dir='out', stride=5)
    merged = merge_config_and_args(DEFAULT_RUN_CONFIG, args)
    assert merged['fluid']['reynolds'] == 3.0
    assert merged['solver']['dt'] == DEFAULT_RUN_CONFIG['solver']['dt']
    assert merged['solver']['output_stride'] == 5
    assert merged['checks']['k_list'] == [1, 2]
    assert merged['output']['directory'] == 'out'


def test_csv_format(tmp_path):
    frame = pd.DataFrame({'t': [0.0, 0.1], 'value': [1.0 / 3.0, 2.0]})
    path = write_csv(frame, tmp_path / 'nested' / 'table.csv')
    raw = path.read_bytes()
    assert b'\r' not in raw
    lines = raw.decode('utf-8').splitlines()
    assert lines[0] == 't,value'
    assert float(lines[1].split(',')[1]) == 1.0 / 3.0


def test_rng_is_reproducible():
    assert np.array_equal(make_rng(3).standard_normal(5), make_rng(3).standard_normal(5))


def test_format_duration():
    assert format_duration(1.234) == '1.23秒'
    assert format_duration(90.0) == '1.5分钟'


def test_available_modes():
    assert get_available_config_modes() == list(RUN_PRESETS.keys())


def test_numeric_predicates():
    assert is_real(np.float32(0.5)) and is_real(np.int64(3)) and is_real(2)
    assert not is_real(True) and not is_real(np.bool_(False)) and not is_real('1.0')
    assert is_integer(np.int32(4)) and is_integer(7)
    assert not is_integer(np.float64(4.0)) and not is_integer(False)
