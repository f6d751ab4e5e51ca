"""
@File       : experiment_schema.py
@Description: 实验配置各分节与认证报告.

@Time       : 2026/01/12 16:40
@Author     : hcy18
"""
from typing import Literal, Optional

import numpy as np
from pydantic import Field, field_validator

from covsaa.schemas.base import ArrayModel, StrictModel, Vector
from covsaa.schemas.bench_schema import Degree, InstanceScheme, Omega
from covsaa.utils.seeding import Stream, derive_seed

# 实验支持的方法名（provider 工厂按这些名字注册）
EXPERIMENT_METHODS = (
    "er_ols", "er_lasso", "er_knn", "j_ols", "jplus_ols", "n_saa", "pp_ols", "pp_lasso",
    "knn_saa", "er_ols_hetero", "er_knn_hetero",
)
SUPPORTED_METHODS = EXPERIMENT_METHODS + ("j_knn", "jplus_knn")

# Algorithm 1 默认常数
DEFAULT_N_EVAL = 1000
DEFAULT_N_BATCHES = 30
DEFAULT_T_MULTIPLIER = 2.462


class InstanceSection(StrictModel):
    n_resources: int = Field(default=20, ge=1)
    n_customers: int = Field(default=30, ge=1)
    seed: Optional[int] = Field(default=None, ge=0, description="None 表示由主种子派生")
    scheme: InstanceScheme = Field(default_factory=InstanceScheme)


class DemandSection(StrictModel):
    degree: Degree = Field(default=1.0)
    sigma: float = Field(default=5.0, ge=0)
    omega: Omega = Field(default=1)
    calibration_samples: int = Field(default=10_001, ge=1, description="s_j 中位数标定的 Monte Carlo 样本数")
    seed: Optional[int] = Field(default=None, ge=0)


class CovariatesSection(StrictModel):
    d_x: int = Field(default=10, ge=3, description="原始协变量维数（不含截距）")
    seed: Optional[int] = Field(default=None, ge=0)


class ExperimentSection(StrictModel):
    methods: list[str] = Field(default_factory=lambda: ["er_ols", "n_saa"])
    n_grid: list[int] = Field(default_factory=lambda: [40, 400])
    replications: int = Field(default=3, ge=1)
    master_seed: int = Field(default=20260101, ge=0)
    threads: Optional[int] = Field(default=None, ge=1, description="None 表示取 Settings.threads")
    record_timing: bool = Field(default=True, description="false 时 solve_ms 记为 0，结果逐位可复现")
    project: bool = Field(default=True, description="是否把构造的情景投影到支撑集")
    project_overrides: dict[str, bool] = Field(default_factory=dict, description="按方法覆盖投影开关")

    @field_validator("methods")
    @classmethod
    def _check_methods(cls, value: list[str]) -> list[str]:
        if not value:
            raise ValueError("methods 不能为空")
        unknown = [m for m in value if m not in SUPPORTED_METHODS]
        if unknown:
            raise ValueError(f"不支持的方法: {unknown}，可选 {list(SUPPORTED_METHODS)}")
        if len(set(value)) != len(value):
            raise ValueError("methods 不能重复")
        return value

    @field_validator("n_grid")
    @classmethod
    def _check_n_grid(cls, value: list[int]) -> list[int]:
        if not value or any(n < 2 for n in value):
            raise ValueError("n_grid 必须非空且每个 n ≥ 2")
        return value

    @field_validator("project_overrides")
    @classmethod
    def _check_overrides(cls, value: dict[str, bool]) -> dict[str, bool]:
        unknown = [m for m in value if m not in SUPPORTED_METHODS]
        if unknown:
            raise ValueError(f"project_overrides 含不支持的方法: {unknown}")
        return value

    def project_for(self, method: str) -> bool:
        return self.project_overrides.get(method, self.project)


class EvaluationSection(StrictModel):
    n_eval: int = Field(default=DEFAULT_N_EVAL, ge=1)
    n_batches: int = Field(default=DEFAULT_N_BATCHES, ge=2)
    t_multiplier: float = Field(default=DEFAULT_T_MULTIPLIER, gt=0)


class RegressionSection(StrictModel):
    cv_folds: int = Field(default=5, ge=2)
    lasso_grid_size: int = Field(default=100, ge=1)
    lasso_grid_ratio: float = Field(default=1e-3, gt=0, lt=1)
    knn_max_grid: int = Field(default=50, ge=1)
    hetero_delta: float = Field(default=1e-4, gt=0)
    hetero_transform: Literal["log_abs", "log1p"] = Field(default="log1p")
    hetero_lasso: bool = Field(default=False, description="异方差回归改用交叉验证选择的 Lasso")


class SolverSection(StrictModel):
    algorithm: Literal["lshaped", "extensive"] = Field(default="lshaped")
    lshaped_tol: float = Field(default=1e-6, gt=0)
    lshaped_max_iter: int = Field(default=500, ge=1)
    extensive_var_cap: int = Field(default=200_000, ge=1)


class ExperimentConfig(StrictModel):
    """一次实验扫描所需的全部参数（不含输出路径）."""

    instance: InstanceSection = Field(default_factory=InstanceSection)
    demand: DemandSection = Field(default_factory=DemandSection)
    covariates: CovariatesSection = Field(default_factory=CovariatesSection)
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    evaluation: EvaluationSection = Field(default_factory=EvaluationSection)
    regression: RegressionSection = Field(default_factory=RegressionSection)
    solver: SolverSection = Field(default_factory=SolverSection)

    # ==================== 种子派生 ====================

    def instance_seed(self) -> int:
        if self.instance.seed is not None:
            return self.instance.seed
        return derive_seed(self.experiment.master_seed, Stream.INSTANCE)

    def demand_seed(self) -> int:
        if self.demand.seed is not None:
            return self.demand.seed
        return derive_seed(self.experiment.master_seed, Stream.DEMAND_MODEL)

    def covariate_seed(self) -> int:
        if self.covariates.seed is not None:
            return self.covariates.seed
        return derive_seed(self.experiment.master_seed, Stream.COVARIATES)


class UcbReport(ArrayModel):
    """Algorithm 1 的输出."""

    gaps: Vector = Field(..., description="Ĝ^k = v̂^k − v̄^k")
    batch_optima: Vector = Field(..., description="v̄^k")
    batch_costs: Vector = Field(..., description="v̂^k")
    v_bar: float
    b99: float = Field(..., description="归一化 99% 上置信界（百分比）；abs_gap 时为绝对值")
    abs_gap: bool = Field(default=False, description="|v̄| 过小，b99 报告为绝对 gap")
    t_multiplier: float = Field(default=DEFAULT_T_MULTIPLIER)
    n_eval: int = Field(default=DEFAULT_N_EVAL)

    @property
    def n_batches(self) -> int:
        return self.gaps.shape[0]

    @property
    def gap_mean(self) -> float:
        return float(np.mean(self.gaps))

    @property
    def gap_std(self) -> float:
        return float(np.std(self.gaps, ddof=1))


class Percentiles(ArrayModel):
    p5: float
    p25: float
    p50: float
    p75: float
    p95: float
    count: int = Field(..., ge=1)
