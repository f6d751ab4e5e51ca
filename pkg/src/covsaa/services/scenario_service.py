"""
@File       : scenario_service.py
@Description: 由拟合模型与数据构造各数据驱动模型的情景集合（ER / J / J+ / N-SAA / PP / kNN-SAA）.

@Time       : 2026/01/08 16:45
@Author     : hcy18
"""
from typing import Callable, Optional, Sequence, Union

import numpy as np

from covsaa.errors import BadConfig, DimensionMismatch, KOutOfRange, TrueModelUnavailable
from covsaa.schemas.regression_schema import Dataset, HeteroModel, LooBundle, LooOlsFamily, PointModel
from covsaa.schemas.scenario_schema import Lemma2Check, ResidualMatrix, ScenarioSet, SupportBox
from covsaa.services.regression_service import (
    knn_order,
    loo_predict_deltas,
    predict,
    predict_many,
    scale_matrix,
)

LooModels = Sequence[tuple[PointModel, HeteroModel]]


def project(points: np.ndarray, support: SupportBox) -> np.ndarray:
    """到支撑盒的欧氏投影（逐分量截断）."""
    points = np.asarray(points, dtype=float)
    if points.shape[-1] != support.d_y:
        raise DimensionMismatch("情景维数与支撑盒不匹配", expected=support.d_y, actual=points.shape)
    return support.project(points)


def _scale_at(q: HeteroModel, x: np.ndarray, d_y: int) -> np.ndarray:
    return scale_matrix(q, x[None, :], d_y)[0]


def empirical_residuals(data: Dataset, f: PointModel, q: HeteroModel) -> ResidualMatrix:
    """
    ε̂^i = Q̂(x^i)⁻¹(y^i − f̂(x^i)).

    Args:
        data: 训练数据
        f: 点预测模型
        q: 异方差模型

    Returns:
        n×d_y 残差矩阵
    """
    if f.d_y != data.d_y:
        raise DimensionMismatch("模型输出维数与数据不一致", expected=data.d_y, actual=f.d_y)
    residuals = data.responses - predict_many(f, data.covariates)
    return ResidualMatrix.from_array(residuals / scale_matrix(q, data.covariates, data.d_y))


def loo_residuals(data: Dataset, loo_models: Union[LooModels, LooBundle]) -> ResidualMatrix:
    """
    留一残差 ε̂^i_J = Q̂_{−i}(x^i)⁻¹(y^i − f̂_{−i}(x^i)).

    Args:
        data: 训练数据
        loo_models: loo_refit 的结果，或同方差 OLS 的 LooBundle

    Returns:
        n×d_y 残差矩阵
    """
    if isinstance(loo_models, LooBundle):
        if loo_models.loo_residuals.shape != data.responses.shape:
            raise DimensionMismatch("LooBundle 与数据维数不一致")
        return ResidualMatrix.from_array(loo_models.loo_residuals)
    if len(loo_models) != data.n:
        raise DimensionMismatch("留一模型数量与样本数不一致", expected=data.n, actual=len(loo_models))
    values = np.empty_like(data.responses)
    for i, (f, q) in enumerate(loo_models):
        x_i = data.covariates[i]
        values[i] = (data.responses[i] - predict(f, x_i)) / _scale_at(q, x_i, data.d_y)
    return ResidualMatrix.from_array(values)


def _residual_scenarios(center: np.ndarray, scale: np.ndarray, residuals: ResidualMatrix,
                        support: SupportBox, apply_projection: bool) -> ScenarioSet:
    if residuals.d_y != center.shape[-1] or support.d_y != center.shape[-1]:
        raise DimensionMismatch("残差、预测与支撑盒维数不一致")
    points = center + scale * residuals.values
    if apply_projection:
        points = support.project(points)
    return ScenarioSet.uniform(points)


def build_er_saa(x, f: PointModel, q: HeteroModel, residuals: ResidualMatrix, support: SupportBox,
                 apply_projection: bool = True) -> ScenarioSet:
    """
    ER-SAA 情景：Π_𝒴[f̂(x) + Q̂(x)ε̂^i]，权重 1/n.

    Args:
        x: 新协变量
        f: 点预测模型
        q: 异方差模型
        residuals: 经验残差
        support: 支撑盒
        apply_projection: 是否投影

    Returns:
        n 个等权情景
    """
    x = np.asarray(x, dtype=float)
    return _residual_scenarios(predict(f, x), _scale_at(q, x, f.d_y), residuals, support, apply_projection)


def build_j_saa(x, f: PointModel, q: HeteroModel, loo_res: ResidualMatrix, support: SupportBox,
                apply_projection: bool = True) -> ScenarioSet:
    """J-SAA：与 ER-SAA 相同的构造，残差换成留一残差."""
    return build_er_saa(x, f, q, loo_res, support, apply_projection)


def build_jplus_saa(x, loo_models: Union[LooModels, LooOlsFamily], loo_res: ResidualMatrix, support: SupportBox,
                    apply_projection: bool = True) -> ScenarioSet:
    """
    J+-SAA 情景：Π_𝒴[f̂_{−i}(x) + Q̂_{−i}(x)ε̂^i_J].

    Args:
        x: 新协变量
        loo_models: loo_refit 结果，或同方差 OLS 的 LooOlsFamily（用秩一捷径）
        loo_res: 留一残差
        support: 支撑盒
        apply_projection: 是否投影

    Returns:
        n 个等权情景
    """
    x = np.asarray(x, dtype=float)
    if len(loo_models) != loo_res.n:
        raise DimensionMismatch("留一模型数量与残差行数不一致", expected=loo_res.n, actual=len(loo_models))
    if isinstance(loo_models, LooOlsFamily):
        centers = predict(loo_models.model, x) - loo_predict_deltas(loo_models.bundle, loo_models.data, x)
        scales = np.ones_like(centers)
    else:
        centers = np.stack([predict(f, x) for f, _ in loo_models])
        scales = np.stack([_scale_at(q, x, f.d_y) for f, q in loo_models])
    if centers.shape != loo_res.values.shape or support.d_y != loo_res.d_y:
        raise DimensionMismatch("留一预测、残差与支撑盒维数不一致")
    points = centers + scales * loo_res.values
    if apply_projection:
        points = support.project(points)
    return ScenarioSet.uniform(points)


def build_n_saa(data: Dataset) -> ScenarioSet:
    """N-SAA：历史响应本身，等权，不投影."""
    return ScenarioSet.uniform(data.responses)


def build_pp(x, f: PointModel, support: SupportBox, apply_projection: bool = True) -> ScenarioSet:
    """点预测确定性近似：单情景 Π_𝒴[f̂(x)]."""
    center = predict(f, np.asarray(x, dtype=float))
    if support.d_y != center.shape[0]:
        raise DimensionMismatch("预测与支撑盒维数不一致")
    point = support.project(center) if apply_projection else center
    return ScenarioSet.from_arrays(point[None, :], np.ones(1))


def build_knn_saa(data: Dataset, x, k: int) -> ScenarioSet:
    """
    kNN 重加权 SAA：全部 y^i 为情景，x 的 k 个最近邻权重 1/k，其余为 0.

    Args:
        data: 训练数据
        x: 新协变量
        k: 近邻数

    Returns:
        n 个情景，恰有 k 个正权重
    """
    if not 1 <= k <= data.n:
        raise KOutOfRange(f"k 超出范围 [1, {data.n}]", k=k)
    x = np.asarray(x, dtype=float)
    if x.shape != (data.d_x,):
        raise DimensionMismatch("查询点维数不匹配", expected=data.d_x, actual=x.shape)
    nearest = knn_order(data.covariates, x[None, :])[0, :k]
    weights = np.zeros(data.n)
    weights[nearest] = 1.0 / k
    return ScenarioSet.from_arrays(data.responses, weights)


def check_lemma2_bound(x, f: PointModel, q_true_identity: bool,
                       f_true: Optional[Callable[[np.ndarray], np.ndarray]],
                       residuals: ResidualMatrix, data: Dataset) -> Lemma2Check:
    """
    同方差情形下的均值偏差界.

    lhs = (1/n)Σ‖(f̂(x) + ε̂^i) − (f*(x) + ε^i)‖，ε^i = y^i − f*(x^i)；
    rhs = ‖f̂(x) − f*(x)‖ + (1/n)Σ‖f̂(x^i) − f*(x^i)‖。

    Args:
        x: 新协变量
        f: 点预测模型
        q_true_identity: 真实模型是否同方差
        f_true: 真实回归函数，输入 m×d_x 设计矩阵，输出 m×d_y
        residuals: 经验残差 ε̂
        data: 训练数据

    Returns:
        Lemma2Check
    """
    if f_true is None:
        raise TrueModelUnavailable("缺少真实回归函数 f*，只能在合成算例上检查")
    if not q_true_identity:
        raise BadConfig("该界只在同方差设定下成立")
    x = np.asarray(x, dtype=float)
    fitted_x = predict(f, x)
    true_x = np.asarray(f_true(x[None, :]), dtype=float)[0]
    true_train = np.asarray(f_true(data.covariates), dtype=float)
    true_errors = data.responses - true_train
    deviations = (fitted_x + residuals.values) - (true_x + true_errors)
    lhs = float(np.mean(np.linalg.norm(deviations, axis=1)))
    rhs = float(np.linalg.norm(fitted_x - true_x)
                + np.mean(np.linalg.norm(predict_many(f, data.covariates) - true_train, axis=1)))
    return Lemma2Check(lhs=lhs, rhs=rhs)
