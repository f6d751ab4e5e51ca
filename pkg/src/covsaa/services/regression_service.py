"""
@File       : regression_service.py
@Description: 点预测 f̂_n 与异方差估计 Q̂_n：OLS / WLS / Lasso / kNN，留一法与交叉验证.

@Time       : 2026/01/07 10:40
@Author     : hcy18
"""
import math
from typing import Literal, Optional, Sequence, Union

import numpy as np
import scipy.linalg
from joblib import Parallel, delayed

from covsaa.config.settings import get_settings
from covsaa.errors import (
    BadConfig,
    CovSaaError,
    DegenerateDesign,
    DimensionMismatch,
    DomainError,
    EmptyGrid,
    IndexOutOfRange,
    KOutOfRange,
    LeverageOne,
    NonpositiveDelta,
    RankDeficient,
)
from covsaa.schemas.regression_schema import (
    Dataset,
    FeatureTransform,
    HeteroModel,
    KnnModel,
    LinearModel,
    LooBundle,
    PointModel,
    RegressionSpec,
)
from covsaa.utils.logger import app_logger as logger
from covsaa.utils.seeding import Stream, stream

# 杠杆值不得超过 1 − LEVERAGE_MARGIN，否则留一残差无定义
LEVERAGE_MARGIN = 1e-10


# ==================== OLS / WLS ====================

def _rank_from_r(r: np.ndarray, shape: tuple[int, int]) -> int:
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        return 0
    tol = max(shape) * np.finfo(float).eps * diag[0]
    return int(np.sum(diag > tol))


def _least_squares(design: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """列主元 QR 求最小二乘，返回 d_x×d_y 系数. 秩亏时抛 RankDeficient."""
    n, d = design.shape
    if n < d:
        raise RankDeficient(f"样本数 {n} 小于协变量维数 {d}")
    q, r, perm = scipy.linalg.qr(design, mode="economic", pivoting=True)
    rank = _rank_from_r(r, design.shape)
    if rank < d:
        raise RankDeficient(f"设计矩阵列秩 {rank} < {d}")
    theta_perm = scipy.linalg.solve_triangular(r, q.T @ targets)
    theta = np.empty_like(theta_perm)
    theta[perm] = theta_perm
    return theta


def fit_ols(data: Dataset, weights: Optional[Sequence[float]] = None) -> LinearModel:
    """
    (加权) 最小二乘拟合，每个输出列独立.

    Args:
        data: 数据集
        weights: 可选的非负样本权重，长度 n

    Returns:
        LinearModel，kind 为 ols（无权重）或 wls
    """
    design, targets = data.covariates, data.responses
    kind = "ols"
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if w.shape != (data.n,):
            raise DimensionMismatch("权重长度与样本数不一致", expected=data.n, actual=w.shape)
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise DimensionMismatch("权重必须为有限非负数")
        root = np.sqrt(w)
        keep = root > 0
        design = design[keep] * root[keep, None]
        targets = targets[keep] * root[keep, None]
        kind = "wls"
    theta = _least_squares(design, targets)
    return LinearModel(coef=theta.T, kind=kind, intercept_mode=data.intercept_mode)


def fit_wls_hetero(data: Dataset, hetero: HeteroModel) -> LinearModel:
    """
    两步法的第二步：输出 j 以 1/q̂_j(x^i)² 为权重重新拟合.

    Args:
        data: 数据集
        hetero: 已估计的异方差模型

    Returns:
        kind=wls 的 LinearModel
    """
    scale = scale_matrix(hetero, data.covariates, data.d_y)
    coef = np.empty((data.d_y, data.d_x))
    for j in range(data.d_y):
        w = 1.0 / scale[:, j] ** 2
        root = np.sqrt(w)
        theta = _least_squares(data.covariates * root[:, None], data.responses[:, [j]] * root[:, None])
        coef[j] = theta[:, 0]
    return LinearModel(coef=coef, kind="wls", intercept_mode=data.intercept_mode)


# ==================== 预测 ====================

def _check_query(model: PointModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != model.d_x:
        raise DimensionMismatch("查询点维数不匹配", expected=model.d_x, actual=x.shape)
    if isinstance(model, LinearModel) and model.intercept_mode and x[0] != 1.0:
        raise DimensionMismatch("截距模式下查询点第 1 个分量必须为 1")
    return x


def knn_order(training: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """
    每个查询点的近邻排序（欧氏距离，距离相同取下标靠前者）.

    Returns:
        m×n 下标矩阵
    """
    diff = queries[:, None, :] - training[None, :, :]
    dist = np.einsum("mnd,mnd->mn", diff, diff)
    return np.argsort(dist, axis=1, kind="stable")


def predict_many(model: PointModel, covariates: np.ndarray) -> np.ndarray:
    """批量预测，返回 m×d_y."""
    covariates = np.atleast_2d(np.asarray(covariates, dtype=float))
    if covariates.shape[1] != model.d_x:
        raise DimensionMismatch("协变量维数不匹配", expected=model.d_x, actual=covariates.shape[1])
    if isinstance(model, LinearModel):
        return covariates @ model.coef.T
    order = knn_order(model.training.covariates, covariates)[:, : model.k]
    return model.training.responses[order].mean(axis=1)


def predict(model: PointModel, x) -> np.ndarray:
    """
    点预测 f̂(x).

    Args:
        model: LinearModel 或 KnnModel
        x: 长度 d_x 的查询点

    Returns:
        长度 d_y 的预测向量
    """
    x = _check_query(model, x)
    return predict_many(model, x[None, :])[0]


# ==================== Lasso ====================

class _Standardized:
    """Lasso 使用的标准化视图：非截距列中心化并缩放到单位方差."""

    def __init__(self, data: Dataset):
        design = data.covariates
        self.n, self.d = design.shape
        self.intercept_mode = data.intercept_mode
        self.columns = np.arange(1, self.d) if self.intercept_mode else np.arange(self.d)
        features = design[:, self.columns]
        if self.intercept_mode:
            self.mean = features.mean(axis=0)
            self.y_mean = data.responses.mean(axis=0)
        else:
            self.mean = np.zeros(features.shape[1])
            self.y_mean = np.zeros(data.d_y)
        centered = features - self.mean
        self.scale = np.sqrt(np.mean(centered ** 2, axis=0))
        self.active = self.scale > 1e-12 * np.maximum(1.0, np.abs(self.mean))
        if not np.any(self.active):
            raise DegenerateDesign("所有非截距列均为常数")
        self.x = centered[:, self.active] / self.scale[self.active]
        self.y = data.responses - self.y_mean
        self.gram = self.x.T @ self.x / self.n
        self.corr = self.x.T @ self.y / self.n

    @property
    def lambda_max(self) -> float:
        return float(np.max(np.abs(self.corr)))

    def to_coef(self, beta: np.ndarray) -> np.ndarray:
        """标准化系数 (p×d_y) 还原为原始尺度的 d_y×d_x 系数."""
        theta = np.zeros((len(self.columns), beta.shape[1]))
        theta[self.active] = beta / self.scale[self.active, None]
        coef = np.zeros((beta.shape[1], self.d))
        coef[:, self.columns] = theta.T
        if self.intercept_mode:
            coef[:, 0] = self.y_mean - theta.T @ self.mean
        return coef


def _soft_threshold(value: np.ndarray, lam: float) -> np.ndarray:
    return np.sign(value) * np.maximum(np.abs(value) - lam, 0.0)


def _coordinate_descent(std: _Standardized, lam: float, beta: np.ndarray,
                        tol: float, max_sweeps: int) -> np.ndarray:
    """协方差形式的循环坐标下降，所有输出列同时更新（彼此独立）."""
    gram, corr = std.gram, std.corr
    diag = np.diag(gram)
    beta = beta.copy()
    for sweep in range(max_sweeps):
        max_change = 0.0
        for k in range(beta.shape[0]):
            old = beta[k].copy()
            rho = corr[k] - gram[k] @ beta + diag[k] * old
            beta[k] = _soft_threshold(rho, lam) / diag[k]
            max_change = max(max_change, float(np.max(np.abs(beta[k] - old))))
        if max_change < tol:
            return beta
    logger.warning(f"Lasso 坐标下降未在 {max_sweeps} 轮内收敛: lambda={lam}")
    return beta


def lasso_path(data: Dataset, lambdas: Sequence[float], tol: Optional[float] = None,
               max_sweeps: Optional[int] = None) -> list[LinearModel]:
    """
    Lasso 正则化路径. 按惩罚从大到小求解并热启动，结果按输入顺序返回.

    Args:
        data: 数据集
        lambdas: 惩罚系数序列
        tol: 坐标下降容差，默认取配置
        max_sweeps: 最大轮数，默认取配置

    Returns:
        与 lambdas 一一对应的模型列表
    """
    settings = get_settings()
    tol = settings.lasso_tol if tol is None else tol
    max_sweeps = settings.lasso_max_sweeps if max_sweeps is None else max_sweeps
    lams = np.asarray(lambdas, dtype=float)
    if np.any(lams < 0):
        raise BadConfig("lambda 必须非负")
    if data.n < 2:
        raise DegenerateDesign("Lasso 至少需要 2 个样本")
    std = _Standardized(data)
    beta = np.zeros((std.x.shape[1], data.d_y))
    models: list[Optional[LinearModel]] = [None] * len(lams)
    for idx in np.argsort(-lams, kind="stable"):
        beta = _coordinate_descent(std, float(lams[idx]), beta, tol, max_sweeps)
        models[idx] = LinearModel(coef=std.to_coef(beta), kind="lasso", lam=float(lams[idx]),
                                  intercept_mode=data.intercept_mode)
    return models


def fit_lasso(data: Dataset, lam: float, tol: Optional[float] = None,
              max_sweeps: Optional[int] = None) -> LinearModel:
    """
    Lasso 回归：目标 (1/2n)Σ‖y^i − θx^i‖² + λΣ|θ|，惩罚作用于标准化后的非截距系数.

    Args:
        data: 数据集
        lam: 惩罚系数 λ ≥ 0

    Returns:
        原始尺度下的 LinearModel
    """
    return lasso_path(data, [lam], tol=tol, max_sweeps=max_sweeps)[0]


def default_lasso_grid(data: Dataset, n_values: int = 100, ratio: float = 1e-3) -> np.ndarray:
    """glmnet 约定的惩罚网格：λ_max 到 ratio·λ_max 的对数等距序列（降序）."""
    lam_max = _Standardized(data).lambda_max
    if lam_max == 0.0:
        return np.zeros(1)
    return np.geomspace(lam_max, ratio * lam_max, n_values)


# ==================== kNN ====================

def fit_knn(data: Dataset, k: int) -> KnnModel:
    """
    kNN 回归，只保存训练数据.

    Args:
        data: 训练数据
        k: 近邻数，1 ≤ k ≤ n

    Returns:
        KnnModel
    """
    if not 1 <= k <= data.n:
        raise KOutOfRange(f"k 超出范围 [1, {data.n}]", k=k)
    return KnnModel(k=int(k), training=data)


def default_knn_grid(n: int, folds: int = 5, max_values: int = 50) -> np.ndarray:
    """
    kNN 的 k 候选集合：[⌊n^0.1⌋, ⌈n^0.9⌉] 内的整数，超过 max_values 个时取几何间隔.

    上界截断到最小训练折大小。
    """
    lo = max(1, math.floor(n ** 0.1))
    hi = math.ceil(n ** 0.9)
    if folds > 1:
        hi = min(hi, n - math.ceil(n / folds))
    hi = max(hi, lo)
    if hi - lo + 1 <= max_values:
        return np.arange(lo, hi + 1)
    return np.unique(np.round(np.geomspace(lo, hi, max_values)).astype(int))


# ==================== 异方差 ====================

def _transform(values: np.ndarray, transform: FeatureTransform) -> np.ndarray:
    if transform == "log_abs":
        if np.any(values == 0.0):
            raise DomainError("log|x| 在 x=0 处无定义")
        return np.log(np.abs(values))
    if np.any(values < 0.0):
        raise DomainError("log(1+x) 变换要求协变量非负")
    return np.log1p(values)


def _hetero_design(covariates: np.ndarray, transform: FeatureTransform, intercept_mode: bool) -> np.ndarray:
    features = covariates[:, 1:] if intercept_mode else covariates
    return np.column_stack([np.ones(covariates.shape[0]), _transform(features, transform)])


def hetero_dataset(data: Dataset, point_model: PointModel, delta: float,
                   transform: FeatureTransform = "log1p") -> Dataset:
    """对数平方残差回归的数据集：设计 [1, t(x_2), …]，目标 log(max{δ, |残差|}²)."""
    if not delta > 0:
        raise NonpositiveDelta("delta 必须为正数", delta=delta)
    design = _hetero_design(data.covariates, transform, data.intercept_mode)
    residuals = data.responses - predict_many(point_model, data.covariates)
    target = 2.0 * np.log(np.maximum(delta, np.abs(residuals)))
    return Dataset(covariates=design, responses=target, intercept_mode=True)


def fit_hetero_loglinear(data: Dataset, point_model: PointModel, delta: Optional[float] = None,
                         transform: FeatureTransform = "log1p",
                         lasso_lambda: Optional[float] = None) -> HeteroModel:
    """
    对数线性对角异方差估计.

    输出 j 的目标为 log(max{δ, |y_j − f̂(x)_j|}²)，设计矩阵 [1, t(x_2), …]，
    q_j(x) = exp(½⟨π̂^j, [1, t(x_2), …]⟩)。

    Args:
        data: 数据集
        point_model: 已拟合的点预测模型
        delta: 残差下限 δ_n，默认取配置
        transform: log_abs 或 log1p
        lasso_lambda: 给定时用 Lasso 拟合目标（非截距系数受惩罚）

    Returns:
        kind=loglinear 的 HeteroModel
    """
    delta = get_settings().hetero_delta if delta is None else float(delta)
    log_data = hetero_dataset(data, point_model, delta, transform)
    if lasso_lambda is None:
        pi = fit_ols(log_data).coef
    else:
        pi = fit_lasso(log_data, lasso_lambda).coef
    return HeteroModel(kind="loglinear", pi=pi, feature_transform=transform, delta=delta,
                       intercept_mode=data.intercept_mode)


def q_values(model: HeteroModel, covariates: np.ndarray) -> np.ndarray:
    """批量计算对角元 q_j(x^i)，返回 m×d_y（identity 返回全 1，需要 d_y 时调用方广播）."""
    covariates = np.atleast_2d(np.asarray(covariates, dtype=float))
    if model.kind == "identity":
        return np.ones((covariates.shape[0], 1))
    expected = model.pi.shape[1] - 1 + (1 if model.intercept_mode else 0)
    if covariates.shape[1] != expected:
        raise DimensionMismatch("协变量维数与异方差模型不匹配", expected=expected, actual=covariates.shape[1])
    design = _hetero_design(covariates, model.feature_transform, model.intercept_mode)
    return np.exp(0.5 * design @ model.pi.T)


def q_matrix(model: HeteroModel, x, d_y: Optional[int] = None) -> np.ndarray:
    """
    Q̂(x) = diag(q_1(x), …, q_{d_y}(x)).

    Args:
        model: 异方差模型
        x: 查询点
        d_y: identity 模型需要的输出维数（loglinear 模型可省略）

    Returns:
        d_y×d_y 对角矩阵
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch("查询点必须为一维向量")
    if model.kind == "identity":
        if d_y is None:
            raise DimensionMismatch("identity 模型需要显式给出 d_y")
        return np.eye(d_y)
    return np.diag(q_values(model, x[None, :])[0])


def scale_matrix(model: HeteroModel, covariates: np.ndarray, d_y: int) -> np.ndarray:
    """m×d_y 的尺度矩阵（identity 展开为全 1）."""
    values = q_values(model, covariates)
    return np.broadcast_to(values, (values.shape[0], d_y)).copy()


# ==================== 留一法 ====================

def loo_ols(data: Dataset) -> LooBundle:
    """
    OLS 留一残差捷径：ê_loo^i = e^i/(1−h^i)，h^i 为杠杆值.

    Args:
        data: 数据集

    Returns:
        LooBundle
    """
    design = data.covariates
    n, d = design.shape
    if n < d:
        raise RankDeficient(f"样本数 {n} 小于协变量维数 {d}")
    q, r = scipy.linalg.qr(design, mode="economic")
    rank = _rank_from_r(r, design.shape)
    if rank < d:
        raise RankDeficient(f"设计矩阵列秩 {rank} < {d}")
    leverages = np.sum(q ** 2, axis=1)
    worst = int(np.argmax(leverages))
    if leverages[worst] >= 1.0 - LEVERAGE_MARGIN:
        raise LeverageOne("存在杠杆值为 1 的样本（插值设计），留一法无定义", index=worst)
    r_inv = scipy.linalg.solve_triangular(r, np.eye(d))
    gram_inverse = r_inv @ r_inv.T
    theta = scipy.linalg.solve_triangular(r, q.T @ data.responses)
    residuals = data.responses - design @ theta
    return LooBundle(
        loo_residuals=residuals / (1.0 - leverages)[:, None],
        leverages=leverages,
        gram_inverse=gram_inverse,
        base_residuals=residuals,
    )


def loo_predict_delta(bundle: LooBundle, data: Dataset, x, i: int) -> np.ndarray:
    """
    f̂_n(x) − f̂_{−i}(x) = (xᵀ(X̄ᵀX̄)⁻¹x^i)·e^i/(1−h^i).

    Args:
        bundle: loo_ols 结果
        data: 训练数据
        x: 查询点
        i: 被剔除样本下标（从 0 开始）

    Returns:
        长度 d_y 的差值向量
    """
    if not 0 <= i < data.n:
        raise IndexOutOfRange("样本下标越界", index=i, n=data.n)
    x = np.asarray(x, dtype=float)
    if x.shape != (data.d_x,):
        raise DimensionMismatch("查询点维数不匹配", expected=data.d_x, actual=x.shape)
    weight = float(x @ bundle.gram_inverse @ data.covariates[i])
    return weight * bundle.loo_residuals[i]


def loo_predict_deltas(bundle: LooBundle, data: Dataset, x) -> np.ndarray:
    """所有 i 的留一预测差值，n×d_y."""
    x = np.asarray(x, dtype=float)
    if x.shape != (data.d_x,):
        raise DimensionMismatch("查询点维数不匹配", expected=data.d_x, actual=x.shape)
    weights = data.covariates @ (bundle.gram_inverse @ x)
    return weights[:, None] * bundle.loo_residuals


def fit_point(data: Dataset, spec: RegressionSpec) -> PointModel:
    """按方法标签拟合点预测模型."""
    if spec.kind == "ols":
        return fit_ols(data)
    if spec.kind == "lasso":
        return fit_lasso(data, spec.lam)
    return fit_knn(data, spec.k)


def _fit_drop_one(data: Dataset, i: int, spec: RegressionSpec, hetero: str,
                  delta: Optional[float], transform: FeatureTransform) -> tuple[PointModel, HeteroModel]:
    reduced = data.drop(i)
    try:
        point = fit_point(reduced, spec)
        if hetero == "identity":
            return point, HeteroModel.identity()
        return point, fit_hetero_loglinear(reduced, point, delta, transform)
    except CovSaaError as e:
        raise type(e)(f"留一拟合失败: {e.message}", omitted_index=i, **e.context) from e


def loo_refit(data: Dataset, spec: RegressionSpec, hetero: Literal["identity", "loglinear"] = "identity",
              delta: Optional[float] = None, transform: FeatureTransform = "log1p",
              n_jobs: int = 1) -> list[tuple[PointModel, HeteroModel]]:
    """
    显式的 n 次留一重拟合.

    Args:
        data: 数据集
        spec: 回归方法
        hetero: identity 或 loglinear
        delta: 异方差残差下限
        transform: 异方差特征变换
        n_jobs: 并行线程数

    Returns:
        第 i 项为去掉第 i 个样本后训练的 (点预测模型, 异方差模型)，按 i 排序
    """
    if data.n < 2:
        raise RankDeficient("留一法至少需要 2 个样本")
    return Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_fit_drop_one)(data, i, spec, hetero, delta, transform) for i in range(data.n)
    )


# ==================== 交叉验证 ====================

def _fold_blocks(n: int, folds: int, seed: int) -> list[np.ndarray]:
    perm = stream(seed, Stream.CV_FOLDS).permutation(n)
    return [np.sort(block) for block in np.array_split(perm, folds)]


def _knn_fold_errors(train: Dataset, test: Dataset, grid: np.ndarray) -> np.ndarray:
    order = knn_order(train.covariates, test.covariates)
    # 对近邻响应做累积平均，一次得到所有 k 的预测
    cumulative = np.cumsum(train.responses[order], axis=1)
    errors = np.full(len(grid), np.inf)
    for idx, k in enumerate(grid):
        if 1 <= k <= train.n:
            pred = cumulative[:, k - 1, :] / k
            errors[idx] = float(np.mean((test.responses - pred) ** 2))
    return errors


def _lasso_fold_errors(train: Dataset, test: Dataset, grid: np.ndarray) -> np.ndarray:
    models = lasso_path(train, grid)
    return np.array([
        float(np.mean((test.responses - predict_many(m, test.covariates)) ** 2)) for m in models
    ])


def cv_select(data: Dataset, method: Literal["lasso", "knn"], grid: Sequence[Union[int, float]],
              folds: int = 5, seed: int = 0) -> Union[int, float]:
    """
    K 折交叉验证选择超参数.

    折划分：带种子的随机排列后连续分块。误差为留出集平方误差的折平均；
    并列时取更简单的模型（更小的 k，更大的 λ）。

    Args:
        data: 数据集
        method: lasso 或 knn
        grid: 候选超参数
        folds: 折数 ≥ 2
        seed: 折划分种子

    Returns:
        选中的超参数
    """
    if len(grid) == 0:
        raise EmptyGrid("超参数网格为空")
    if folds < 2 or data.n < folds:
        raise BadConfig("交叉验证要求 folds ≥ 2 且 n ≥ folds", folds=folds, n=data.n)
    if method not in ("lasso", "knn"):
        raise BadConfig(f"不支持的交叉验证方法: {method}")
    if len(grid) == 1:
        return grid[0]

    values = np.asarray(grid, dtype=int if method == "knn" else float)
    total = np.zeros(len(values))
    for block in _fold_blocks(data.n, folds, seed):
        test = data.subset(block)
        train = data.subset(np.setdiff1d(np.arange(data.n), block))
        if method == "knn":
            total += _knn_fold_errors(train, test, values)
        else:
            total += _lasso_fold_errors(train, test, values)
    mean_error = total / folds

    # 简单度排序：k 升序 / λ 降序
    simplicity = np.argsort(values if method == "knn" else -values, kind="stable")
    best = float(np.min(mean_error))
    threshold = best + 1e-12 * abs(best) + 1e-300
    for idx in simplicity:
        if mean_error[idx] <= threshold:
            chosen = values[idx]
            logger.debug(f"交叉验证完成: method={method}, chosen={chosen}, cv_error={mean_error[idx]:.6g}")
            return int(chosen) if method == "knn" else float(chosen)
    raise EmptyGrid("所有候选超参数的交叉验证误差均无效")
