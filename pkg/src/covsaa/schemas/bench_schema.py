"""
@File       : bench_schema.py
@Description: ==================== 资源分配基准算例 ====================

@Time       : 2026/01/10 10:18
@Author     : hcy18
"""
from typing import Annotated, Literal

import numpy as np
from pydantic import AfterValidator, Field, field_validator, model_validator

from covsaa.schemas.base import ArrayModel, IndexVector, Matrix, StrictModel, Vector


def _check_degree(value: float) -> float:
    if value not in (0.5, 1.0, 2.0):
        raise ValueError(f"degree p 必须属于 {{0.5, 1, 2}}，实际 {value}")
    return float(value)


Degree = Annotated[float, AfterValidator(_check_degree)]
Omega = Literal[1, 2, 3]


class InstanceScheme(StrictModel):
    """c_z / ρ / μ / τ 的生成方案（c_z、ρ、μ 的默认区间不来自原始算例，可覆盖）."""

    name: str = Field(default="uniform-default", description="写入元数据的方案标识")
    c_z_range: tuple[float, float] = Field(default=(8.0, 12.0))
    rho_range: tuple[float, float] = Field(default=(0.8, 1.0))
    mu_range: tuple[float, float] = Field(default=(0.5, 2.0))
    tau_log_mean: float = Field(default=0.5, description="τ ~ LN(mean, std) 的对数均值")
    tau_log_std: float = Field(default=0.05, gt=0)
    z_max: float = Field(default=1e4, gt=0, description="第一阶段变量上界，保证 𝒵 紧")

    @field_validator("c_z_range", "rho_range", "mu_range")
    @classmethod
    def _positive_range(cls, value: tuple[float, float]) -> tuple[float, float]:
        lo, hi = value
        if not 0 < lo <= hi:
            raise ValueError(f"区间必须满足 0 < lo ≤ hi，实际 {value}")
        return value


class ResourceAllocInstance(ArrayModel):
    """资源分配算例参数."""

    n_resources: int = Field(..., ge=1, description="|ℐ|")
    n_customers: int = Field(..., ge=1, description="|𝒥|")
    c_z: Vector
    rho: Vector
    mu: Matrix = Field(..., description="|ℐ|×|𝒥| 服务率")
    q_w: Vector = Field(..., description="未满足需求惩罚")
    tau: Vector = Field(..., description="q_w / ‖c_z‖_∞")
    z_max: float = Field(default=1e4, gt=0)
    scheme: str = Field(default="uniform-default")

    @model_validator(mode="after")
    def _check(self) -> "ResourceAllocInstance":
        i, j = self.n_resources, self.n_customers
        shapes = {"c_z": (i,), "rho": (i,), "mu": (i, j), "q_w": (j,), "tau": (j,)}
        for name, shape in shapes.items():
            value = getattr(self, name)
            if value.shape != shape:
                raise ValueError(f"{name} 形状应为 {shape}，实际 {value.shape}")
            if not np.all(value > 0) or not np.all(np.isfinite(value)):
                raise ValueError(f"{name} 必须全部为有限正数")
        if not np.allclose(self.q_w, self.tau * np.max(self.c_z), rtol=1e-12, atol=0.0):
            raise ValueError("q_w 必须等于 τ·‖c_z‖_∞")
        return self


class DemandModel(ArrayModel):
    """
    需求模型 Y_j = φ*_j + Σ_l ζ*_jl X_l^p + q*_j(X) ε_j，ε_j ~ N(0, σ²).

    active 为原始协变量（不含截距）的下标。
    """

    d_x: int = Field(..., ge=3, description="原始协变量维数")
    phi: Vector
    zeta: Matrix = Field(..., description="|𝒥|×|ℒ*|")
    active: IndexVector = Field(..., description="ℒ*，原始协变量下标")
    degree: Degree
    sigma: float = Field(..., ge=0)
    omega: Omega
    pi_star: Matrix = Field(..., description="|𝒥|×|ℒ*|")
    s: Vector = Field(..., description="中位数标定常数 s_j")

    @model_validator(mode="after")
    def _check(self) -> "DemandModel":
        j = self.phi.shape[0]
        k = self.active.shape[0]
        if self.zeta.shape != (j, k) or self.pi_star.shape != (j, k) or self.s.shape != (j,):
            raise ValueError("需求模型参数维数不一致")
        if np.any(self.active < 0) or np.any(self.active >= self.d_x):
            raise ValueError("活跃协变量下标越界")
        if not np.all(self.s > 0):
            raise ValueError("s_j 必须为正")
        if self.omega == 1 and (np.any(self.pi_star != 0.0) or np.any(self.s != 1.0)):
            raise ValueError("omega=1 时 pi_star 必须为 0 且 s_j = 1")
        return self

    @property
    def d_y(self) -> int:
        return self.phi.shape[0]


class CovariateSampler(ArrayModel):
    """多元折叠正态协变量采样器 |N(0, Σ_X)|."""

    d_x: int = Field(..., ge=1)
    correlation: Matrix
    seed: int = Field(..., ge=0, description="主种子")

    @model_validator(mode="after")
    def _check(self) -> "CovariateSampler":
        corr = self.correlation
        if corr.shape != (self.d_x, self.d_x):
            raise ValueError(f"相关矩阵形状应为 {(self.d_x, self.d_x)}")
        if not np.allclose(corr, corr.T, atol=1e-12):
            raise ValueError("相关矩阵必须对称")
        if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
            raise ValueError("相关矩阵对角元必须为 1")
        if np.min(np.linalg.eigvalsh(corr)) < -1e-10:
            raise ValueError("相关矩阵必须半正定")
        return self
