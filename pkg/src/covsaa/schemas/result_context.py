"""
@File       : result_context.py
@Description: CLI 统一返回信封 CommandResult.

@Time       : 2026/01/14 20:05
@Author     : hcy18
"""
from typing import Any, Dict, Generic, Optional, TypeVar

from pydantic import Field

from covsaa.errors import EXIT_OK, CovSaaError
from covsaa.schemas.base import CamelCaseModel
from covsaa.utils.run_context import get_run_id

T = TypeVar("T")

# 常量定义
SUCCESS_CODE = "0"
SYSTEM_ERROR_CODE = "SYS9999"


class CommandResult(CamelCaseModel, Generic[T]):
    """
    子命令统一返回类型.

    以 camelCase JSON 打印到标准输出，exit_code 不参与序列化。
    """

    data: Optional[T] = Field(default=None, description="返回数据")
    success: bool = Field(..., description="是否成功")
    code: str = Field(..., description="状态码")
    message: str = Field(..., description="消息")
    run_id: str = Field(default_factory=get_run_id, description="本次运行 ID")
    extra: Dict[str, Any] = Field(default_factory=dict, description="额外信息")
    exit_code: int = Field(default=EXIT_OK, exclude=True)

    # ==================== 静态工厂方法 ====================

    @staticmethod
    def ok(data: Optional[T] = None, message: str = "操作成功", **extra: Any) -> "CommandResult[T]":
        """
        成功返回.

        Args:
            data: 返回数据
            message: 消息
            extra: 额外信息（输出路径等）

        Returns:
            CommandResult 实例
        """
        return CommandResult(success=True, code=SUCCESS_CODE, message=message, data=data, extra=extra)

    @staticmethod
    def fail(message: str = "操作失败", code: str = SYSTEM_ERROR_CODE, exit_code: int = 2,
             data: Optional[T] = None) -> "CommandResult[T]":
        """
        失败返回.

        Args:
            message: 消息
            code: 状态码
            exit_code: 进程退出码
            data: 返回数据

        Returns:
            CommandResult 实例
        """
        return CommandResult(success=False, code=code, message=message, data=data, exit_code=exit_code)

    @staticmethod
    def from_error(error: CovSaaError) -> "CommandResult[T]":
        """业务异常转失败信封，退出码取自异常."""
        return CommandResult.fail(message=str(error), code=error.code, exit_code=error.exit_code)

    def to_json(self) -> str:
        return self.model_dump_json(by_alias=True, indent=2)
