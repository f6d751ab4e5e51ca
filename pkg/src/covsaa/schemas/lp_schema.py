"""
@File       : lp_schema.py
@Description: 有界变量标准型 LP：min cᵀv s.t. Av = b, l ≤ v ≤ u.

@Time       : 2026/01/09 09:35
@Author     : hcy18
"""
from typing import Literal, Optional

import numpy as np
from pydantic import Field, model_validator

from covsaa.schemas.base import ArrayModel, IndexVector, Matrix, Vector

LpStatus = Literal["optimal", "infeasible", "unbounded"]


class LpProblem(ArrayModel):
    """有界变量标准型线性规划."""

    objective: Vector = Field(..., description="长度 p 的目标系数 c")
    eq_matrix: Matrix = Field(..., description="m×p 等式约束矩阵 A（m 可为 0）")
    eq_rhs: Vector = Field(..., description="长度 m 的右端项 b")
    lower: Vector = Field(..., description="变量下界，可为 -inf")
    upper: Vector = Field(..., description="变量上界，可为 +inf")

    @model_validator(mode="after")
    def _check(self) -> "LpProblem":
        p = self.objective.shape[0]
        m = self.eq_matrix.shape[0]
        if self.eq_matrix.shape[1] != p:
            raise ValueError(f"约束矩阵列数 {self.eq_matrix.shape[1]} 与变量数 {p} 不一致")
        if self.eq_rhs.shape != (m,):
            raise ValueError(f"右端项长度 {self.eq_rhs.shape} 与行数 {m} 不一致")
        if self.lower.shape != (p,) or self.upper.shape != (p,):
            raise ValueError("上下界长度与变量数不一致")
        if not (np.all(np.isfinite(self.objective)) and np.all(np.isfinite(self.eq_matrix))
                and np.all(np.isfinite(self.eq_rhs))):
            raise ValueError("目标与约束数据必须有限")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise ValueError("变量界不能为 NaN")
        if np.any(self.lower > self.upper) or np.any(self.lower == np.inf) or np.any(self.upper == -np.inf):
            raise ValueError("变量界要求 lower ≤ upper")
        if m:
            zero_rows = ~np.any(self.eq_matrix != 0.0, axis=1)
            if np.any(zero_rows & (self.eq_rhs != 0.0)):
                raise ValueError(f"第 {int(np.argmax(zero_rows & (self.eq_rhs != 0.0)))} 行系数全为 0 但右端项非 0")
        return self

    @classmethod
    def build(cls, objective, eq_matrix=None, eq_rhs=None, lower=None, upper=None) -> "LpProblem":
        """
        便捷构造：缺省时无等式约束、v ≥ 0.

        Args:
            objective: 目标系数
            eq_matrix: 等式约束矩阵，None 表示 m=0
            eq_rhs: 右端项
            lower: 下界，默认 0
            upper: 上界，默认 +inf
        """
        c = np.atleast_1d(np.asarray(objective, dtype=float))
        p = c.shape[0]
        a = np.zeros((0, p)) if eq_matrix is None else np.asarray(eq_matrix, dtype=float).reshape(-1, p)
        b = np.zeros(a.shape[0]) if eq_rhs is None else np.atleast_1d(np.asarray(eq_rhs, dtype=float))
        lo = np.zeros(p) if lower is None else np.broadcast_to(np.asarray(lower, dtype=float), (p,))
        hi = np.full(p, np.inf) if upper is None else np.broadcast_to(np.asarray(upper, dtype=float), (p,))
        return cls(objective=c, eq_matrix=a, eq_rhs=b, lower=lo, upper=hi)

    @property
    def m(self) -> int:
        return self.eq_matrix.shape[0]

    @property
    def p(self) -> int:
        return self.objective.shape[0]


class LpSolution(ArrayModel):
    """solve_lp 的结果. 非 optimal 状态下数值字段只作诊断用."""

    status: LpStatus
    objective_value: float = Field(default=float("nan"))
    primal: Vector = Field(default_factory=lambda: np.zeros(0))
    dual: Vector = Field(default_factory=lambda: np.zeros(0), description="等式约束乘子 λ")
    reduced_costs: Vector = Field(default_factory=lambda: np.zeros(0), description="c − Aᵀλ")
    basis: Optional[IndexVector] = Field(default=None, description="最终基变量下标（长度 m）")
    iterations: int = Field(default=0, ge=0)

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"
