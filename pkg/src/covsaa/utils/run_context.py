"""
@File       : run_context.py
@Description: 运行标签（replication / n / method）的上下文管理，用于日志追踪.

@Time       : 2026/01/06 20:31
@Author     : hcy18
"""
"""Run tag context management using contextvars."""

import contextvars
import uuid
from contextlib import contextmanager
from typing import Iterator, Optional

# 创建上下文变量
run_tag_context: contextvars.ContextVar[Optional[str]] = contextvars.ContextVar(
    "run_tag", default=None
)

# 进程级 run id，一次 CLI 调用一个
_run_id: Optional[str] = None


def get_run_id() -> str:
    """
    获取当前进程的 run id（懒生成）.

    Returns:
        run id
    """
    global _run_id
    if _run_id is None:
        _run_id = uuid.uuid4().hex[:12]
    return _run_id


def get_run_tag() -> str:
    """
    从上下文变量中获取当前运行标签.

    如果上下文中没有，则返回进程 run id。

    Returns:
        运行标签
    """
    tag = run_tag_context.get()
    if tag:
        return tag
    return get_run_id()


@contextmanager
def run_tag(**parts: object) -> Iterator[str]:
    """在 with 块内临时设置运行标签，退出时恢复."""
    tag = " ".join(f"{k}={v}" for k, v in parts.items())
    token = run_tag_context.set(tag)
    try:
        yield tag
    finally:
        run_tag_context.reset(token)
