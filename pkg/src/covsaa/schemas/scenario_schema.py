"""
@File       : scenario_schema.py
@Description: ==================== 情景集合相关模型 ====================

@Time       : 2026/01/08 14:20
@Author     : hcy18
"""
import numpy as np
from pydantic import Field, ValidationError, model_validator

from covsaa.errors import DimensionMismatch
from covsaa.schemas.base import ArrayModel, Matrix, Vector

# 权重和为 1 的容差
WEIGHT_SUM_TOL = 1e-12


class SupportBox(ArrayModel):
    """响应支撑集 𝒴，限定为盒子 [lower, upper]（分量可为 ±∞）."""

    lower: Vector
    upper: Vector

    @model_validator(mode="after")
    def _check(self) -> "SupportBox":
        if self.lower.shape != self.upper.shape:
            raise ValueError("lower / upper 维数不一致")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise ValueError("支撑盒边界不能为 NaN")
        if np.any(self.lower == np.inf) or np.any(self.upper == -np.inf):
            raise ValueError("支撑盒为空")
        if np.any(self.lower > self.upper):
            raise ValueError("支撑盒要求 lower ≤ upper")
        return self

    @classmethod
    def unbounded(cls, d_y: int) -> "SupportBox":
        return cls(lower=np.full(d_y, -np.inf), upper=np.full(d_y, np.inf))

    @classmethod
    def nonnegative(cls, d_y: int) -> "SupportBox":
        """ℝ₊^{d_y}，资源分配算例的需求支撑."""
        return cls(lower=np.zeros(d_y), upper=np.full(d_y, np.inf))

    @property
    def d_y(self) -> int:
        return self.lower.shape[0]

    def project(self, points: np.ndarray) -> np.ndarray:
        """逐分量截断，即到盒子的欧氏投影."""
        return np.clip(points, self.lower, self.upper)


class ScenarioSet(ArrayModel):
    """带权情景集合，任意 SAA 求解的输入."""

    points: Matrix = Field(..., description="m×d_y 情景值")
    weights: Vector = Field(..., description="长度 m 的概率权重")

    @model_validator(mode="after")
    def _check(self) -> "ScenarioSet":
        m = self.points.shape[0]
        if m < 1:
            raise ValueError("情景集合不能为空")
        if self.weights.shape != (m,):
            raise ValueError(f"权重长度 {self.weights.shape} 与情景数 {m} 不一致")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("情景值必须有限")
        if np.any(self.weights < 0):
            raise ValueError("权重必须非负")
        if abs(float(self.weights.sum()) - 1.0) > WEIGHT_SUM_TOL * max(1, m):
            raise ValueError(f"权重和必须为 1，实际 {self.weights.sum()!r}")
        return self

    @classmethod
    def from_arrays(cls, points, weights) -> "ScenarioSet":
        """构造情景集合，形状 / 权重 / 非有限值错误转为 DimensionMismatch."""
        try:
            return cls(points=points, weights=weights)
        except ValidationError as e:
            raise DimensionMismatch(f"情景集合构造失败: {e.errors()[0]['msg']}") from e

    @classmethod
    def uniform(cls, points) -> "ScenarioSet":
        points = np.atleast_2d(np.asarray(points, dtype=float))
        m = points.shape[0]
        return cls.from_arrays(points, np.full(m, 1.0 / m))

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d_y(self) -> int:
        return self.points.shape[1]

    def support_indices(self) -> np.ndarray:
        """权重为正的情景下标（升序）."""
        return np.flatnonzero(self.weights > 0)


class ResidualMatrix(ArrayModel):
    """(留一) 残差 ε̂^i，n×d_y."""

    values: Matrix

    @model_validator(mode="after")
    def _check(self) -> "ResidualMatrix":
        if not np.all(np.isfinite(self.values)):
            raise ValueError("残差必须有限")
        return self

    @classmethod
    def from_array(cls, values) -> "ResidualMatrix":
        try:
            return cls(values=values)
        except ValidationError as e:
            raise DimensionMismatch(f"残差矩阵构造失败: {e.errors()[0]['msg']}") from e

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d_y(self) -> int:
        return self.values.shape[1]


class Lemma2Check(ArrayModel):
    """同方差均值偏差界的两侧取值."""

    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + 1e-10
