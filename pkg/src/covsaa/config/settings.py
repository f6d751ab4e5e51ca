"""
@File       : settings.py
@Description: 进程级配置（环境变量 / .env），求解器容差等默认值.

@Time       : 2026/01/06 20:04
@Author     : hcy18
"""
"""Application settings and configuration management."""

from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

# 模块级别的单例实例（避免与 Pydantic 字段系统冲突）
_settings_instance: Optional["Settings"] = None


class Settings(BaseSettings):
    """对应 .env 中以 COVSAA_ 为前缀的配置"""

    model_config = SettingsConfigDict(
        env_prefix="COVSAA_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Application
    app_name: str = Field(default="covsaa", description="Application name")
    app_version: str = Field(default="0.1.0", description="Application version")
    log_level: str = Field(default="INFO", description="Logging level")
    log_dir: Optional[str] = Field(default=None, description="日志目录，None 表示只输出到控制台")
    threads: int = Field(default=1, ge=1, description="并行 worker 数上限")

    # LP kernel
    lp_feasibility_tol: float = Field(default=1e-7, gt=0, description="原始可行性容差")
    lp_optimality_tol: float = Field(default=1e-9, gt=0, description="检验数容差")
    lp_pivot_tol: float = Field(default=1e-11, gt=0, description="主元绝对值下限")
    lp_refactor_interval: int = Field(default=100, ge=1, description="每隔多少次换基重新分解")
    lp_condition_limit: float = Field(default=1e14, gt=1, description="基矩阵条件数上限")

    # Two-stage
    lshaped_tol: float = Field(default=1e-6, gt=0, description="L-shaped 相对 gap 容差")
    lshaped_max_iter: int = Field(default=500, ge=1, description="L-shaped 迭代上限")
    extensive_var_cap: int = Field(default=200_000, ge=1, description="确定性等价 LP 变量数上限")

    # Regression
    lasso_tol: float = Field(default=1e-7, gt=0, description="坐标下降收敛容差（系数最大变化）")
    lasso_max_sweeps: int = Field(default=100_000, ge=1, description="坐标下降最大轮数")
    hetero_delta: float = Field(default=1e-4, gt=0, description="异方差回归残差下限 δ_n")

    # Evaluation
    gap_zero_tol: float = Field(default=1e-9, ge=0, description="gap 绝对值小于该相对容差时记为 0")

    @classmethod
    def get_instance(cls) -> "Settings":
        """
        获取 Settings 单例实例.

        Returns:
            Settings 实例
        """
        global _settings_instance
        if _settings_instance is None:
            _settings_instance = cls()
        return _settings_instance


def get_settings() -> Settings:
    """
    获取 Settings 单例实例.

    Returns:
        Settings 单例实例
    """
    return Settings.get_instance()
