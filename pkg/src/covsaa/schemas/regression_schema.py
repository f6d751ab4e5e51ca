"""
@File       : regression_schema.py
@Description: ==================== 回归相关模型 ====================

@Time       : 2026/01/07 10:02
@Author     : hcy18
"""
from typing import Literal, Optional, Union

import numpy as np
from pydantic import Field, ValidationError, model_validator

from covsaa.errors import DimensionMismatch
from covsaa.schemas.base import ArrayModel, Matrix, Vector


class Dataset(ArrayModel):
    """成对的协变量 / 响应样本 (x^i, y^i)."""

    covariates: Matrix = Field(..., description="n×d_x 协变量矩阵，第 i 行为 x^i")
    responses: Matrix = Field(..., description="n×d_y 响应矩阵，第 i 行为 y^i")
    intercept_mode: bool = Field(default=True, description="第 1 列是否恒为 1")

    @model_validator(mode="after")
    def _check(self) -> "Dataset":
        n = self.covariates.shape[0]
        if n < 1:
            raise ValueError("数据集至少需要 1 行")
        if self.responses.shape[0] != n:
            raise ValueError(f"协变量与响应行数不一致: {n} vs {self.responses.shape[0]}")
        if not (np.all(np.isfinite(self.covariates)) and np.all(np.isfinite(self.responses))):
            raise ValueError("数据集包含非有限值")
        if self.intercept_mode and not np.all(self.covariates[:, 0] == 1.0):
            raise ValueError("intercept_mode 下第 1 列必须恒为 1")
        return self

    @classmethod
    def from_arrays(cls, covariates, responses, intercept_mode: bool = True) -> "Dataset":
        """构造数据集，shape / 取值错误统一转为 DimensionMismatch."""
        try:
            return cls(covariates=covariates, responses=responses, intercept_mode=intercept_mode)
        except ValidationError as e:
            raise DimensionMismatch(f"数据集构造失败: {e.errors()[0]['msg']}") from e

    @classmethod
    def with_intercept(cls, raw_covariates, responses) -> "Dataset":
        """在原始协变量前补一列 1."""
        raw = np.atleast_2d(np.asarray(raw_covariates, dtype=float))
        design = np.column_stack([np.ones(raw.shape[0]), raw])
        return cls.from_arrays(design, responses, intercept_mode=True)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def d_x(self) -> int:
        return self.covariates.shape[1]

    @property
    def d_y(self) -> int:
        return self.responses.shape[1]

    def subset(self, rows) -> "Dataset":
        """按行索引取子集（保持原顺序）."""
        rows = np.asarray(rows)
        return Dataset(
            covariates=self.covariates[rows],
            responses=self.responses[rows],
            intercept_mode=self.intercept_mode,
        )

    def drop(self, i: int) -> "Dataset":
        """去掉第 i 行."""
        return self.subset(np.delete(np.arange(self.n), i))


class LinearModel(ArrayModel):
    """线性点预测 f̂(x) = θ̂ x."""

    coef: Matrix = Field(..., description="d_y×d_x 系数矩阵 θ̂")
    kind: Literal["ols", "wls", "lasso"] = Field(default="ols")
    lam: float = Field(default=0.0, ge=0.0, description="Lasso 惩罚系数（ols/wls 为 0）")
    intercept_mode: bool = Field(default=True)

    @model_validator(mode="after")
    def _check(self) -> "LinearModel":
        if self.kind in ("ols", "wls") and self.lam != 0.0:
            raise ValueError("ols/wls 模型的 lambda 必须为 0")
        return self

    @property
    def d_x(self) -> int:
        return self.coef.shape[1]

    @property
    def d_y(self) -> int:
        return self.coef.shape[0]


class KnnModel(ArrayModel):
    """kNN 回归：按值保留训练数据."""

    k: int = Field(..., ge=1)
    training: Dataset

    @model_validator(mode="after")
    def _check(self) -> "KnnModel":
        if self.k > self.training.n:
            raise ValueError(f"k={self.k} 超过训练样本数 {self.training.n}")
        return self

    @property
    def d_x(self) -> int:
        return self.training.d_x

    @property
    def d_y(self) -> int:
        return self.training.d_y


PointModel = Union[LinearModel, KnnModel]

FeatureTransform = Literal["log_abs", "log1p"]


class HeteroModel(ArrayModel):
    """对角异方差模型 Q̂(x) = diag(q_1(x), …, q_{d_y}(x))."""

    kind: Literal["identity", "loglinear"] = Field(default="identity")
    pi: Optional[Matrix] = Field(default=None, description="d_y×(1+非截距协变量数)，第 0 列为截距")
    feature_transform: FeatureTransform = Field(default="log1p")
    delta: float = Field(default=1e-4, gt=0.0, description="残差下限 δ_n")
    intercept_mode: bool = Field(default=True, description="协变量第 1 列是否为截距（不参与变换）")

    @model_validator(mode="after")
    def _check(self) -> "HeteroModel":
        if self.kind == "loglinear" and self.pi is None:
            raise ValueError("loglinear 模型缺少 pi")
        return self

    @classmethod
    def identity(cls) -> "HeteroModel":
        return cls(kind="identity")


class LooBundle(ArrayModel):
    """OLS 留一法捷径所需的量."""

    loo_residuals: Matrix = Field(..., description="n×d_y，e^i/(1−h^i)")
    leverages: Vector = Field(..., description="杠杆值 h^i ∈ [0,1)")
    gram_inverse: Matrix = Field(..., description="(X̄ᵀX̄)⁻¹")
    base_residuals: Matrix = Field(..., description="全样本残差 e^i")

    @model_validator(mode="after")
    def _check(self) -> "LooBundle":
        h = self.leverages
        if np.any(h < -1e-12) or np.any(h >= 1.0):
            raise ValueError("杠杆值必须位于 [0, 1)")
        return self


class LooOlsFamily(ArrayModel):
    """
    用 LooBundle 表示的 n 个留一 OLS 模型（同方差）.

    f̂_{−i}(x) = f̂_n(x) − Δ_i(x)，无需真正重拟合。
    """

    bundle: LooBundle
    data: Dataset
    model: LinearModel

    def __len__(self) -> int:
        return self.data.n


class RegressionSpec(ArrayModel):
    """回归方法标签：ols / lasso(lam) / knn(k)."""

    kind: Literal["ols", "lasso", "knn"] = Field(default="ols")
    lam: float = Field(default=0.0, ge=0.0)
    k: int = Field(default=1, ge=1)
