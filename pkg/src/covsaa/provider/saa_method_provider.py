"""
@File       : saa_method_provider.py
@Description: SAA 方法流水线：拟合回归模型并构造情景集合. 每个方法一个 provider，工厂按名字创建.

@Time       : 2026/01/13 10:12
@Author     : hcy18
"""
from abc import ABC, abstractmethod
from typing import Callable, NamedTuple, Optional

import numpy as np

from covsaa.errors import BadConfig
from covsaa.schemas.experiment_schema import RegressionSection, SUPPORTED_METHODS
from covsaa.schemas.regression_schema import Dataset, HeteroModel, LooOlsFamily, PointModel, RegressionSpec
from covsaa.schemas.scenario_schema import ScenarioSet, SupportBox
from covsaa.services import regression_service as regress
from covsaa.services import scenario_service as scenario


class MethodContext(NamedTuple):
    """方法流水线的公共参数."""

    regression: RegressionSection
    support: SupportBox
    apply_projection: bool = True
    cv_seed: int = 0
    n_jobs: int = 1


class SaaMethod(ABC):
    """数据驱动 SAA 方法"""

    # 注册名，由 register 设置
    method_name: str = ""
    # 是否忽略查询点 x（N-SAA）
    ignores_x: bool = False

    @property
    def name(self) -> str:
        return self.method_name

    @abstractmethod
    def build(self, data: Dataset, x: np.ndarray, ctx: MethodContext) -> ScenarioSet:
        """
        由训练数据与查询点构造情景集合.

        Args:
            data: 训练数据（含截距列）
            x: 查询点（含截距分量）
            ctx: 公共参数

        Returns:
            ScenarioSet
        """
        pass

    # ==================== 公共的超参数选择 ====================

    @staticmethod
    def select_lambda(data: Dataset, ctx: MethodContext) -> float:
        grid = regress.default_lasso_grid(data, ctx.regression.lasso_grid_size, ctx.regression.lasso_grid_ratio)
        return float(regress.cv_select(data, "lasso", grid, ctx.regression.cv_folds, ctx.cv_seed))

    @staticmethod
    def select_k(data: Dataset, ctx: MethodContext, max_k: Optional[int] = None) -> int:
        grid = regress.default_knn_grid(data.n, ctx.regression.cv_folds, ctx.regression.knn_max_grid)
        if max_k is not None:
            grid = grid[grid <= max_k]
        return int(regress.cv_select(data, "knn", grid, ctx.regression.cv_folds, ctx.cv_seed))

    @staticmethod
    def fit_hetero(data: Dataset, point: PointModel, ctx: MethodContext) -> HeteroModel:
        """对数线性异方差估计；hetero_lasso 时惩罚系数在对数残差数据上交叉验证选取."""
        section = ctx.regression
        lasso_lambda = None
        if section.hetero_lasso:
            log_data = regress.hetero_dataset(data, point, section.hetero_delta, section.hetero_transform)
            lasso_lambda = SaaMethod.select_lambda(log_data, ctx)
        return regress.fit_hetero_loglinear(data, point, section.hetero_delta, section.hetero_transform,
                                            lasso_lambda=lasso_lambda)


_REGISTRY: dict[str, type[SaaMethod]] = {}


def register(method_name: str) -> Callable[[type[SaaMethod]], type[SaaMethod]]:
    """类装饰器：以 method_name 注册到工厂."""

    def decorator(cls: type[SaaMethod]) -> type[SaaMethod]:
        cls.method_name = method_name
        _REGISTRY[method_name] = cls
        return cls

    return decorator


# ==================== 残差类方法 ====================

@register("er_ols")
class ErOlsMethod(SaaMethod):
    """ER-SAA + OLS"""

    def build(self, data: Dataset, x: np.ndarray, ctx: MethodContext) -> ScenarioSet:
        f = regress.fit_ols(data)
        q = HeteroModel.identity()
        residuals = scenario.empirical_residuals(data, f, q)
        return scenario.build_er_saa(x, f, q, residuals, ctx.support, ctx.apply_projection)


@register("er_lasso")
class ErLassoMethod(SaaMethod):
    """ER-SAA + Lasso（λ 由交叉验证选取）"""

    def build(self, data: Dataset, x: np.ndarray, ctx: MethodContext) -> ScenarioSet:
        f = regress.fit_lasso(data, self.select_lambda(data, ctx))
        q = HeteroModel.identity()
        residuals = scenario.empirical_residuals(data, f, q)
        return scenario.build_er_saa(x, f, q, residuals, ctx.support, ctx.apply_projection)


@register("er_knn")
class ErKnnMethod(SaaMethod):
    """ER-SAA + kNN 回归"""

    def build(self, data: Dataset, x: np.ndarray, ctx: MethodContext) -> ScenarioSet:
        f = regress.fit_knn(data, self.select_k(data, ctx))
        q = HeteroModel.identity()
        residuals = scenario.empirical_residuals(data, f, q)
        return scenario.build_er_saa(x, f, q, residuals, ctx.support, ctx.apply_projection)


@register("er_ols_hetero")
class ErOlsHeteroMethod(SaaMethod):
    """两步法：OLS → 对数线性异方差 → 加权最小二乘，再构造 ER-SAA"""

    def build(self, data: Dataset, x: np.ndarray, ctx: MethodContext) -> ScenarioSet:
        q = self.fit_hetero(data, regress.fit_ols(data), ctx)
        f = regress.fit_wls_hetero(data, q)
        residuals = scenario.empirical_residuals(data, f, q)
        return scenario.build_er_saa(x, f, q, residuals, ctx.support, ctx.apply_projection)


@register("er_knn_hetero")
class ErKnnHeteroMethod(SaaMethod):
    """kNN 点预测 + 对数线性异方差的 ER-SAA"""

    def build(self, data: Dataset, x: np.ndarray, ctx: MethodContext) -> ScenarioSet:
        f = regress.fit_knn(data, self.select_k(data, ctx))
        q = self.fit_hetero(data, f, ctx)
        residuals = scenario.empirical_residuals(data, f, q)
        return scenario.build_er_saa(x, f, q, residuals, ctx.support, ctx.apply_projection)


# ==================== 刀切法 ====================

@register("j_ols")
class JOlsMethod(SaaMethod):
    """J-SAA + OLS（杠杆值捷径）"""

    def build(self, data: Dataset, x: np.ndarray, ctx: MethodContext) -> ScenarioSet:
        f = regress.fit_ols(data)
        loo_res = scenario.loo_residuals(data, regress.loo_ols(data))
        return scenario.build_j_saa(x, f, HeteroModel.identity(), loo_res, ctx.support, ctx.apply_projection)


@register("jplus_ols")
class JPlusOlsMethod(SaaMethod):
    """J+-SAA + OLS（留一预测用秩一修正）"""

    def build(self, data: Dataset, x: np.ndarray, ctx: MethodContext) -> ScenarioSet:
        bundle = regress.loo_ols(data)
        family = LooOlsFamily(bundle=bundle, data=data, model=regress.fit_ols(data))
        loo_res = scenario.loo_residuals(data, bundle)
        return scenario.build_jplus_saa(x, family, loo_res, ctx.support, ctx.apply_projection)


@register("j_knn")
class JKnnMethod(SaaMethod):
    """J-SAA + kNN（显式留一重拟合）"""

    def build(self, data: Dataset, x: np.ndarray, ctx: MethodContext) -> ScenarioSet:
        k = self.select_k(data, ctx, max_k=data.n - 1)
        loo_models = regress.loo_refit(data, RegressionSpec(kind="knn", k=k), n_jobs=ctx.n_jobs)
        loo_res = scenario.loo_residuals(data, loo_models)
        f = regress.fit_knn(data, k)
        return scenario.build_j_saa(x, f, HeteroModel.identity(), loo_res, ctx.support, ctx.apply_projection)


@register("jplus_knn")
class JPlusKnnMethod(SaaMethod):
    """J+-SAA + kNN（显式留一重拟合）"""

    def build(self, data: Dataset, x: np.ndarray, ctx: MethodContext) -> ScenarioSet:
        k = self.select_k(data, ctx, max_k=data.n - 1)
        loo_models = regress.loo_refit(data, RegressionSpec(kind="knn", k=k), n_jobs=ctx.n_jobs)
        loo_res = scenario.loo_residuals(data, loo_models)
        return scenario.build_jplus_saa(x, loo_models, loo_res, ctx.support, ctx.apply_projection)


# ==================== 基线 ====================

@register("n_saa")
class NaiveSaaMethod(SaaMethod):
    """N-SAA：忽略协变量"""

    ignores_x = True

    def build(self, data: Dataset, x: np.ndarray, ctx: MethodContext) -> ScenarioSet:
        return scenario.build_n_saa(data)


@register("pp_ols")
class PpOlsMethod(SaaMethod):
    """OLS 点预测的确定性近似"""

    def build(self, data: Dataset, x: np.ndarray, ctx: MethodContext) -> ScenarioSet:
        return scenario.build_pp(x, regress.fit_ols(data), ctx.support, ctx.apply_projection)


@register("pp_lasso")
class PpLassoMethod(SaaMethod):
    """Lasso 点预测的确定性近似"""

    def build(self, data: Dataset, x: np.ndarray, ctx: MethodContext) -> ScenarioSet:
        f = regress.fit_lasso(data, self.select_lambda(data, ctx))
        return scenario.build_pp(x, f, ctx.support, ctx.apply_projection)


@register("knn_saa")
class KnnSaaMethod(SaaMethod):
    """kNN 重加权 SAA（k 由 kNN 回归交叉验证选取）"""

    def build(self, data: Dataset, x: np.ndarray, ctx: MethodContext) -> ScenarioSet:
        return scenario.build_knn_saa(data, x, self.select_k(data, ctx))


def get_method(method_name: str) -> SaaMethod:
    """
    按名字创建方法 provider.

    Args:
        method_name: 方法名，见 SUPPORTED_METHODS

    Returns:
        SaaMethod 实例

    Raises:
        BadConfig: 不支持的方法名
    """
    if method_name not in _REGISTRY:
        raise BadConfig(f"不支持的 SAA 方法: {method_name}", supported=list(SUPPORTED_METHODS))
    return _REGISTRY[method_name]()


def registered_methods() -> tuple[str, ...]:
    return tuple(_REGISTRY)
