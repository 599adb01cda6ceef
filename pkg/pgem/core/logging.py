"""
日志配置模块

各模块沿用 logging.getLogger(__name__) 并通过 extra 传递结构化字段，
这里把标准库日志记录交给 structlog 的 ProcessorFormatter 渲染，
输出JSON（便于收集）或彩色控制台格式。
"""
import logging
import sys
from typing import Optional

import structlog

from pgem.core.config import settings

_configured = False


def setup_logging(level: Optional[str] = None, json_output: Optional[bool] = None) -> None:
    """
    配置根日志记录器

    参数:
        level: 日志级别，默认取 settings.LOGGING_LEVEL
        json_output: 是否输出JSON，默认取 settings.LOG_JSON
    """
    global _configured

    level = (level or settings.LOGGING_LEVEL).upper()
    json_output = settings.LOG_JSON if json_output is None else json_output

    shared_processors = [
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.ExtraAdder(),
        structlog.processors.TimeStamper(fmt="iso", utc=True),
    ]
    renderer = (
        structlog.processors.JSONRenderer()
        if json_output
        else structlog.dev.ConsoleRenderer(colors=sys.stderr.isatty())
    )

    formatter = structlog.stdlib.ProcessorFormatter(
        foreign_pre_chain=shared_processors,
        processors=[
            structlog.stdlib.ProcessorFormatter.remove_processors_meta,
            renderer,
        ],
    )

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(formatter)

    root = logging.getLogger()
    # 重复调用时替换处理器而不是叠加
    for existing in list(root.handlers):
        if getattr(existing, "_pgem_handler", False):
            root.removeHandler(existing)
    handler._pgem_handler = True  # type: ignore[attr-defined]
    root.addHandler(handler)
    root.setLevel(level)

    _configured = True
    logging.getLogger(__name__).debug("日志已配置", extra={"level": level, "json": json_output})


def is_configured() -> bool:
    """是否已经调用过 setup_logging"""
    return _configured
