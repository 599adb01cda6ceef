"""
异常处理注册模块

提供将异常处理器注册到命令行应用的功能：
PgemError 转换为本地化的错误提示和对应的退出码，
其他未处理的异常记录堆栈后以通用错误退出。
"""
import functools
import logging
import traceback
from typing import Any, Callable, Optional

import typer
from rich.console import Console

from pgem.core.exceptions import PgemError
from pgem.utils.i18n import get_text

logger = logging.getLogger(__name__)

console = Console(stderr=True)


def render_error(exc: PgemError, locale: Optional[str] = None) -> str:
    """
    获取异常的本地化错误消息

    Args:
        exc: 求解器异常
        locale: 语言代码

    Returns:
        本地化消息；找不到资源时使用异常自带的消息
    """
    params = {"detail": exc.error_message, **(exc.error_details or {})}
    return get_text(exc.i18n_key, params, locale=locale, fallback=exc.error_message)


def handle_pgem_error(exc: PgemError, locale: Optional[str] = None) -> int:
    """处理自定义异常，返回退出码"""
    message = render_error(exc, locale)
    logger.error(
        f"求解器异常: {exc.error_code} - {message}",
        extra={"error_code": exc.error_code, "details": exc.error_details},
    )
    prefix = get_text("cli.messages.ERROR_PREFIX", locale=locale)
    console.print(f"[bold red]{prefix}[/] [{exc.error_code}] {message}")
    return exc.exit_code


def handle_unexpected(exc: Exception, locale: Optional[str] = None) -> int:
    """全局异常处理器，捕获所有未处理的异常"""
    message = get_text("common.messages.UNKNOWN_ERROR", locale=locale)
    logger.error(
        f"未处理的异常: {exc}",
        extra={"traceback": traceback.format_exc()},
    )
    console.print(f"[bold red]{message}[/]: {exc}")
    return 1


def register_exception_handlers(command: Callable[..., Any], locale: Optional[str] = None) -> Callable[..., Any]:
    """
    为命令函数注册异常处理

    被包装的命令抛出的异常转换为 typer.Exit，退出码由异常类型决定。

    Args:
        command: 命令函数
        locale: 语言代码

    Returns:
        包装后的命令函数
    """

    @functools.wraps(command)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return command(*args, **kwargs)
        except typer.Exit:
            raise
        except PgemError as exc:
            raise typer.Exit(code=handle_pgem_error(exc, locale)) from exc
        except Exception as exc:  # noqa: BLE001
            raise typer.Exit(code=handle_unexpected(exc, locale)) from exc

    return wrapper
