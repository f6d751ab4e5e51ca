"""
@File       : twostage_schema.py
@Description: 两阶段随机线性规划模型与求解结果.

@Time       : 2026/01/09 15:02
@Author     : hcy18
"""
from typing import Literal, Optional

import numpy as np
import scipy.linalg
from pydantic import Field, ValidationError, model_validator

from covsaa.errors import DimensionMismatch
from covsaa.schemas.base import ArrayModel, Matrix, Vector
from covsaa.schemas.lp_schema import LpProblem


class TwoStageLp(ArrayModel):
    """
    两阶段随机 LP：min c_zᵀz + E[V(z, Y)]，z ∈ 𝒵.

    V(z, y) = min { c_vᵀv : Wv = h(y) − Tz, v ≥ 0 }，h(y) = h_offset + h_matrix·y。
    𝒵 由 first_stage 描述：其前 d_z 列为 z，其余列为辅助变量，目标系数被忽略。
    """

    c_z: Vector = Field(..., description="第一阶段成本 c_z")
    first_stage: LpProblem = Field(..., description="𝒵 的约束骨架")
    W: Matrix = Field(..., description="m₂×d_v 补偿矩阵")
    T: Matrix = Field(..., description="m₂×d_z 技术矩阵")
    c_v: Vector = Field(..., description="第二阶段成本")
    h_offset: Vector = Field(..., description="h(y) 的常数项，长度 m₂")
    h_matrix: Matrix = Field(..., description="h(y) 的线性部分，m₂×d_y")

    @model_validator(mode="after")
    def _check(self) -> "TwoStageLp":
        d_z = self.c_z.shape[0]
        m2, d_v = self.W.shape
        if self.first_stage.p < d_z:
            raise ValueError(f"first_stage 列数 {self.first_stage.p} 少于 d_z={d_z}")
        if self.T.shape != (m2, d_z):
            raise ValueError(f"T 形状应为 {(m2, d_z)}，实际 {self.T.shape}")
        if self.c_v.shape != (d_v,):
            raise ValueError("c_v 长度与 W 列数不一致")
        if self.h_offset.shape != (m2,) or self.h_matrix.shape[0] != m2:
            raise ValueError("h(y) 的行数与 W 不一致")
        if m2 > d_v or _rank(self.W) < m2:
            raise ValueError("W 必须行满秩")
        if not self._dual_nonempty():
            raise ValueError("对偶可行集 {λ : λᵀW ≤ c_vᵀ} 为空")
        return self

    def _dual_nonempty(self) -> bool:
        if np.all(self.c_v >= 0):
            # λ = 0 可行
            return True
        from covsaa.services.simplex_service import solve_lp

        m2, d_v = self.W.shape
        # Wᵀλ + s = c_v，λ 自由，s ≥ 0
        problem = LpProblem.build(
            objective=np.zeros(m2 + d_v),
            eq_matrix=np.hstack([self.W.T, np.eye(d_v)]),
            eq_rhs=self.c_v,
            lower=np.concatenate([np.full(m2, -np.inf), np.zeros(d_v)]),
        )
        return solve_lp(problem).is_optimal

    @classmethod
    def from_arrays(cls, c_z, first_stage: LpProblem, W, T, c_v, h_offset, h_matrix) -> "TwoStageLp":
        """构造两阶段模型，形状 / 行满秩 / 对偶可行性错误转为 DimensionMismatch."""
        try:
            return cls(c_z=c_z, first_stage=first_stage, W=W, T=T, c_v=c_v, h_offset=h_offset, h_matrix=h_matrix)
        except ValidationError as e:
            raise DimensionMismatch(f"两阶段模型构造失败: {e.errors()[0]['msg']}") from e

    @property
    def d_z(self) -> int:
        return self.c_z.shape[0]

    @property
    def d_v(self) -> int:
        return self.W.shape[1]

    @property
    def m2(self) -> int:
        return self.W.shape[0]

    @property
    def d_y(self) -> int:
        return self.h_matrix.shape[1]

    def h(self, y: np.ndarray) -> np.ndarray:
        """h(y)，y 可为单点或 m×d_y 批量."""
        return self.h_offset + np.asarray(y, dtype=float) @ self.h_matrix.T


def _rank(matrix: np.ndarray) -> int:
    if matrix.size == 0:
        return 0
    _, r, _ = scipy.linalg.qr(matrix.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag[0] == 0.0:
        return 0
    return int(np.sum(diag > max(matrix.shape) * np.finfo(float).eps * diag[0]))


class SecondStageValue(ArrayModel):
    """V(z, y) 及其最优对偶乘子."""

    value: float
    dual: Vector = Field(..., description="λ，满足 λᵀ(h(y) − Tz) = value")


class SolveResult(ArrayModel):
    """SAA 求解结果."""

    z_star: Vector
    objective: float
    iterations: int = Field(default=0, ge=0)
    cuts: int = Field(default=0, ge=0, description="L-shaped 生成的割平面数")
    lower_bound: Optional[float] = Field(default=None, description="L-shaped 下界")
    upper_bound: Optional[float] = Field(default=None, description="L-shaped 上界（即 objective）")
    method: Literal["extensive", "lshaped"] = Field(default="extensive")

    @property
    def gap(self) -> float:
        """相对 gap (UB − LB)/max(1, |UB|)；确定性等价求解为 0."""
        if self.lower_bound is None or self.upper_bound is None:
            return 0.0
        return (self.upper_bound - self.lower_bound) / max(1.0, abs(self.upper_bound))
