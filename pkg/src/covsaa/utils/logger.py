"""
@File       : logger.py
@Description:

@Time       : 2026/01/06 20:25
@Author     : hcy18
"""
import logging
from datetime import datetime
from pathlib import Path
from typing import Optional

from covsaa.utils.run_context import get_run_tag

# 尝试使用 colorlog，如果没有安装则降级为普通 formatter
try:
    from colorlog import ColoredFormatter

    USE_COLOR = True
except ImportError:
    USE_COLOR = False


class RunContextFilter(logging.Filter):
    """日志过滤器：自动注入运行标签到日志记录中."""

    def filter(self, record: logging.LogRecord) -> bool:
        """
        为日志记录添加 runTag.

        Args:
            record: 日志记录对象

        Returns:
            True，表示不过滤该记录
        """
        record.runTag = get_run_tag()
        return True


def setup_logging(
        log_level: int = logging.INFO,
        log_dir: Optional[str] = None,
        console_color: bool = True,
) -> logging.Logger:
    """
    初始化日志系统。

    Args:
        log_level: 日志级别，默认 INFO
        log_dir: 日志文件存储目录，None 表示不写文件
        console_color: 是否启用控制台彩色输出（需安装 colorlog）

    Returns:
        配置好的 logger 实例（通常不需要使用返回值）
    """
    file_formatter = logging.Formatter(
        fmt='%(asctime)s - %(levelname)s - [%(runTag)s] %(filename)s:%(lineno)d - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    if console_color and USE_COLOR:
        console_formatter = ColoredFormatter(
            fmt='%(log_color)s%(asctime)s - %(levelname)s - [%(runTag)s] %(filename)s:%(lineno)d - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S',
            log_colors={
                'DEBUG': 'cyan',
                'INFO': 'white',
                'WARNING': 'yellow',
                'ERROR': 'red',
                'CRITICAL': 'bold_red',
            }
        )
    else:
        console_formatter = file_formatter

    # 获取 root logger 并清理已有 handler（防止重复）
    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)
    if root_logger.handlers:
        root_logger.handlers.clear()

    run_filter = RunContextFilter()

    # 控制台 handler
    console_handler = logging.StreamHandler()
    console_handler.setFormatter(console_formatter)
    console_handler.addFilter(run_filter)
    root_logger.addHandler(console_handler)

    # 文件 handler（按天分割）
    if log_dir:
        log_dir_path = Path(log_dir)
        log_dir_path.mkdir(parents=True, exist_ok=True)
        log_file = log_dir_path / f"{datetime.now().strftime('%Y-%m-%d')}.log"
        file_handler = logging.FileHandler(log_file, encoding='utf-8')
        file_handler.setFormatter(file_formatter)
        file_handler.addFilter(run_filter)
        root_logger.addHandler(file_handler)

    return root_logger


app_logger = logging.getLogger("covsaa")
