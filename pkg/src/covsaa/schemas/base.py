"""
@File       : base.py
@Description: Pydantic 基类模块：驼峰输出模型、严格配置模型、只读数组模型.

@Time       : 2026/01/06 21:30
@Author     : hcy18
"""
from typing import Annotated, Any

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, PlainSerializer
from pydantic.alias_generators import to_camel


class CamelCaseModel(BaseModel):
    """
    自动转换驼峰命名的 Pydantic 基类.

    - Python 代码中使用蛇形命名（snake_case）
    - JSON 输出时转换为驼峰命名（camelCase），CLI 的结果信封使用它
    - 支持同时接受蛇形和驼峰命名（populate_by_name=True）
    """

    model_config = ConfigDict(
        alias_generator=to_camel,     # 自动转换为驼峰命名
        populate_by_name=True,         # 允许同时使用蛇形和驼峰命名
    )


class StrictModel(BaseModel):
    """配置文档使用的基类：未知字段直接拒绝，防止实验配置里的拼写错误被静默忽略."""

    model_config = ConfigDict(extra="forbid", validate_assignment=True)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _as_vector(value: Any) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"期望一维向量，实际 shape={arr.shape}")
    return _readonly(arr)


def _as_matrix(value: Any) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"期望二维矩阵，实际 shape={arr.shape}")
    return _readonly(arr)


def _as_index_vector(value: Any) -> np.ndarray:
    arr = np.array(value, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError(f"期望一维整数向量，实际 shape={arr.shape}")
    return _readonly(arr)


_to_list = PlainSerializer(lambda a: a.tolist(), when_used="json")

# 只读 float 向量 / 矩阵，构造时按值复制
Vector = Annotated[np.ndarray, BeforeValidator(_as_vector), _to_list]
Matrix = Annotated[np.ndarray, BeforeValidator(_as_matrix), _to_list]
IndexVector = Annotated[np.ndarray, BeforeValidator(_as_index_vector), _to_list]


class ArrayModel(BaseModel):
    """数值领域对象的基类：构造后不可变，可跨线程共享."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)
