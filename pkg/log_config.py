#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
日志配置模块

所有模块通过 get_logger(__name__) 取日志器，第一次调用时初始化：
- 控制台（stderr）按 GALERKIN_LOG_LEVEL 输出，默认 INFO；stdout 留给 --show-config 等结果输出
- 文件按 GALERKIN_LOG_FILE 写入（默认 galerkin_sim.log），DEBUG 级别，按大小轮转

使用方法：
from log_config import get_logger
logger = get_logger(__name__)
"""

import logging
import logging.handlers
import os
import sys
from datetime import datetime

from dotenv import load_dotenv

load_dotenv()

DEFAULT_LOG_FILE = 'galerkin_sim.log'
DEFAULT_CONSOLE_LEVEL = 'INFO'
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'

# 检查状态对应的日志图标与级别
CHECK_STATUS_STYLE = {
    'pass': ('✅', logging.INFO),
    'skipped': ('⏭️', logging.INFO),
    'fail': ('❌', logging.WARNING),
}


def _console_level(level) -> int:
    if level is None:
        level = os.environ.get('GALERKIN_LOG_LEVEL', DEFAULT_CONSOLE_LEVEL)
    if isinstance(level, int):
        return level
    resolved = logging.getLevelName(str(level).upper())
    return resolved if isinstance(resolved, int) else logging.INFO


def setup_unified_logger(log_file: str = None, console_level=None,
                         max_bytes: int = 20 * 1024 * 1024, backup_count: int = 3):
    """
    初始化根日志器

    Args:
        log_file: 日志文件路径，默认读取 GALERKIN_LOG_FILE
        console_level: 控制台级别（int 或级别名），默认读取 GALERKIN_LOG_LEVEL
        max_bytes: 单个日志文件的最大字节数
        backup_count: 轮转保留的文件数
    """
    log_file = log_file or os.environ.get('GALERKIN_LOG_FILE', DEFAULT_LOG_FILE)
    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG)
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(_console_level(console_level))
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    file_handler = logging.handlers.RotatingFileHandler(
        log_file, maxBytes=max_bytes, backupCount=backup_count, encoding='utf-8'
    )
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(formatter)
    root_logger.addHandler(file_handler)

    logging.debug(f"📄 日志初始化 {datetime.now().strftime(DATE_FORMAT)}，文件: {log_file}")


def get_logger(name: str = None) -> logging.Logger:
    """获取日志器，根日志器未配置时先初始化"""
    if not logging.getLogger().handlers:
        setup_unified_logger()
    return logging.getLogger(name)


def log_performance(func_name: str, duration: float, **stats):
    """
    记录一次计算的耗时

    Args:
        func_name: 计算名称
        duration: 耗时（秒）
        **stats: 规模信息（模态数、步数、样本数等）；带 steps 时附带每秒步数
    """
    parts = [f'{k}={v:.3g}' if isinstance(v, float) else f'{k}={v}' for k, v in stats.items()]
    steps = stats.get('steps')
    if steps and duration > 0:
        parts.append(f'步/秒={steps / duration:.0f}')
    get_logger('performance').info(f"⏱️  {func_name} 耗时 {duration:.2f}秒 [{', '.join(parts)}]")


def log_check_status(name: str, status: str, **details):
    """按 pass / fail / skipped 记录一个检查项"""
    icon, level = CHECK_STATUS_STYLE.get(status, ('❔', logging.INFO))
    extra = ', '.join(f'{k}={v}' for k, v in details.items())
    message = f"{icon} 检查 {name}: {status}"
    get_logger('checks').log(level, f"{message} ({extra})" if extra else message)


def log_error_with_context(error: Exception, context: str = None, **kwargs):
    """
    记录异常及其上下文（带堆栈）

    Args:
        error: 异常对象
        context: 出错的环节
        **kwargs: 额外的定位信息
    """
    pieces = [f"❌ {type(error).__name__}: {error}"]
    if context:
        pieces.append(f"上下文: {context}")
    pieces.extend(f"{k}={v}" for k, v in kwargs.items())
    get_logger('error').error(' | '.join(pieces), exc_info=True)


class LoggerMixin:
    """为类提供以类名命名的日志器"""

    @property
    def logger(self) -> logging.Logger:
        if not hasattr(self, '_logger'):
            self._logger = get_logger(self.__class__.__name__)
        return self._logger

    def log_method_call(self, method_name: str, **kwargs):
        params = ', '.join(f'{k}={v}' for k, v in kwargs.items())
        self.logger.info(f"🔧 {method_name}({params})")

    def log_method_result(self, method_name: str, result_type: str, count: int = None):
        suffix = f" ({count}条记录)" if count is not None else ''
        self.logger.info(f"✅ {method_name} -> {result_type}{suffix}")
