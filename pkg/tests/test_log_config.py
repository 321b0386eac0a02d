# -*- coding: utf-8 -*-
"""
日志辅助函数测试
"""

import logging

import pytest

from log_config import LoggerMixin, _console_level, log_check_status, log_performance


@pytest.mark.parametrize('level, expected', [
    ('debug', logging.DEBUG),
    ('WARNING', logging.WARNING),
    (logging.ERROR, logging.ERROR),
    ('no-such-level', logging.INFO),
])
def test_console_level(level, expected):
    assert _console_level(level) == expected


def test_console_level_from_environment(monkeypatch):
    monkeypatch.setenv('GALERKIN_LOG_LEVEL', 'error')
    assert _console_level(None) == logging.ERROR


def test_failed_check_is_a_warning(caplog):
    with caplog.at_level(logging.DEBUG):
        log_check_status('energy_equation', 'fail', residual=0.001)
    record = caplog.records[-1]
    assert record.levelno == logging.WARNING
    assert 'energy_equation' in record.getMessage()
    assert 'residual=0.001' in record.getMessage()


def test_skipped_check_is_info(caplog):
    with caplog.at_level(logging.DEBUG):
        log_check_status('ladyzhenskaya', 'skipped')
    assert caplog.records[-1].levelno == logging.INFO


def test_performance_reports_step_rate(caplog):
    with caplog.at_level(logging.DEBUG):
        log_performance('simulate', 2.0, steps=100, n_modes=4)
    message = caplog.records[-1].getMessage()
    assert '步/秒=50' in message
    assert 'n_modes=4' in message


def test_mixin_logger_named_after_class():
    class Runner(LoggerMixin):
        pass

    runner = Runner()
    assert runner.logger.name == 'Runner'
    assert runner.logger is runner.logger
