"""
@File       : bench_service.py
@Description: 资源分配基准算例生成：实例参数、需求模型、折叠正态协变量与需求模拟.

@Time       : 2026/01/10 14:30
@Author     : hcy18
"""
from typing import NamedTuple, Optional

import numpy as np

from covsaa.errors import BadConfig, DimensionMismatch, DomainError
from covsaa.schemas.bench_schema import CovariateSampler, DemandModel, InstanceScheme, ResourceAllocInstance
from covsaa.schemas.experiment_schema import ExperimentConfig
from covsaa.schemas.lp_schema import LpProblem
from covsaa.schemas.twostage_schema import TwoStageLp
from covsaa.utils.logger import app_logger as logger
from covsaa.utils.seeding import Stream, stream

# ζ*_{j·} 的中心值，依次对应三个活跃协变量
ZETA_CENTERS = np.array([10.0, 5.0, 2.0])
N_ACTIVE = 3


# ==================== 协变量 ====================

def vine_correlation(d_x: int, seed: int) -> np.ndarray:
    """
    C-vine 随机相关矩阵：偏相关 ~ 2·Beta(2,2) − 1，逐层递推为无条件相关.

    Args:
        d_x: 维数
        seed: 种子

    Returns:
        d_x×d_x 相关矩阵
    """
    if d_x < 1:
        raise BadConfig("d_x 必须 ≥ 1", d_x=d_x)
    rng = stream(seed, Stream.CORRELATION)
    partial = np.zeros((d_x, d_x))
    corr = np.eye(d_x)
    for k in range(d_x - 1):
        for i in range(k + 1, d_x):
            partial[k, i] = 2.0 * rng.beta(2.0, 2.0) - 1.0
            value = partial[k, i]
            for level in range(k - 1, -1, -1):
                value = (value * np.sqrt((1.0 - partial[level, i] ** 2) * (1.0 - partial[level, k] ** 2))
                         + partial[level, i] * partial[level, k])
            corr[k, i] = corr[i, k] = value
    return corr


def make_sampler(d_x: int, seed: int) -> CovariateSampler:
    """以 vine 相关矩阵构造折叠正态采样器."""
    return CovariateSampler(d_x=d_x, correlation=vine_correlation(d_x, seed), seed=seed)


def _correlation_root(correlation: np.ndarray) -> np.ndarray:
    eigenvalues, eigenvectors = np.linalg.eigh(correlation)
    return eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))


def sample_covariates(sampler: CovariateSampler, n: int, *keys: int) -> np.ndarray:
    """
    折叠正态样本 |v|，v ~ N(0, Σ_X)。不含截距列.

    同一 (seed, keys) 下 n 更大的样本以 n 更小的样本为前缀。

    Args:
        sampler: 采样器
        n: 样本数
        keys: 额外的流 key（重复编号、用途等）

    Returns:
        n×d_x 非负矩阵
    """
    if n < 1:
        raise BadConfig("样本数必须 ≥ 1", n=n)
    rng = stream(sampler.seed, Stream.COVARIATES, *keys)
    normals = rng.standard_normal((n, sampler.d_x))
    return np.abs(normals @ _correlation_root(sampler.correlation).T)


# ==================== 需求模型 ====================

def _log_features(model: DemandModel, covariates: np.ndarray) -> np.ndarray:
    covariates = np.atleast_2d(np.asarray(covariates, dtype=float))
    if covariates.shape[1] != model.d_x:
        raise DimensionMismatch("协变量维数与需求模型不匹配", expected=model.d_x, actual=covariates.shape[1])
    active = covariates[:, model.active]
    if np.any(active < 0):
        raise DomainError("需求模型要求协变量非负（折叠正态取值域）")
    return np.log1p(active)


def gen_demand_model(sampler: CovariateSampler, n_customers: int, degree: float, sigma: float, omega: int,
                     seed: int, calibration_samples: int = 10_001) -> DemandModel:
    """
    生成需求模型参数.

    φ*_j = 50 + 5δ_j0，δ_j0 ~ N(0, 1)；ζ*_j = (10, 5, 2) + δ_j，δ_j ~ U(−4, 4)；π*_jl ~ U(0, 2(ω−1)²)；
    s_j 为 exp(Σ_l π*_jl log(1 + X_l)) 在独立 Monte Carlo 样本上的中位数。

    Args:
        sampler: 协变量采样器（提供 d_x 与相关矩阵）
        n_customers: 客户类型数 |𝒥|
        degree: p ∈ {0.5, 1, 2}
        sigma: 误差标准差 σ
        omega: 异方差等级 ω ∈ {1, 2, 3}
        seed: 种子
        calibration_samples: s_j 标定的样本数

    Returns:
        DemandModel
    """
    if degree not in (0.5, 1.0, 2.0):
        raise BadConfig("degree p 必须属于 {0.5, 1, 2}", degree=degree)
    if omega not in (1, 2, 3):
        raise BadConfig("omega 必须属于 {1, 2, 3}", omega=omega)
    if sampler.d_x < N_ACTIVE:
        raise BadConfig(f"需求模型至少需要 {N_ACTIVE} 个协变量", d_x=sampler.d_x)
    if n_customers < 1 or sigma < 0:
        raise BadConfig("n_customers 必须 ≥ 1 且 sigma ≥ 0", n_customers=n_customers, sigma=sigma)

    rng = stream(seed, Stream.DEMAND_MODEL)
    phi = 50.0 + 5.0 * rng.standard_normal(n_customers)
    zeta = ZETA_CENTERS + rng.uniform(-4.0, 4.0, size=(n_customers, N_ACTIVE))
    active = np.arange(N_ACTIVE)
    if omega == 1:
        pi_star = np.zeros((n_customers, N_ACTIVE))
        s = np.ones(n_customers)
    else:
        pi_star = rng.uniform(0.0, 2.0 * (omega - 1) ** 2, size=(n_customers, N_ACTIVE))
        calibration = np.abs(
            stream(seed, Stream.CALIBRATION).standard_normal((calibration_samples, sampler.d_x))
            @ _correlation_root(sampler.correlation).T
        )
        s = np.median(np.exp(np.log1p(calibration[:, active]) @ pi_star.T), axis=0)
    logger.debug(f"需求模型已生成: J={n_customers}, p={degree}, sigma={sigma}, omega={omega}")
    return DemandModel(d_x=sampler.d_x, phi=phi, zeta=zeta, active=active, degree=float(degree),
                       sigma=float(sigma), omega=omega, pi_star=pi_star, s=s)


def true_mean(model: DemandModel, covariates: np.ndarray) -> np.ndarray:
    """f*(x) = φ* + Σ_l ζ*_l x_l^p，输入原始协变量（不含截距），返回 m×|𝒥|."""
    covariates = np.atleast_2d(np.asarray(covariates, dtype=float))
    _log_features(model, covariates)
    return model.phi + (covariates[:, model.active] ** model.degree) @ model.zeta.T


def true_scale(model: DemandModel, covariates: np.ndarray) -> np.ndarray:
    """
    q*_j(x)，返回 m×|𝒥|.

    按中位数归一：q*_j(x)² = exp(Σ_l π*_jl log(1 + x_l)) / s_j，使 P(q*_j(X) > 1) ≈ 0.5。
    """
    # s_j 作除数：中位数归一化约定，而非 s_j·exp(·) 的乘子形式
    features = _log_features(model, covariates)
    return np.sqrt(np.exp(features @ model.pi_star.T) / model.s)


def simulate_demand(model: DemandModel, covariates: np.ndarray, seed: int, *keys: int) -> np.ndarray:
    """
    Y_j = f*_j(X) + q*_j(X)·ε_j，ε_j ~ N(0, σ²) 独立于 X，不截断.

    Args:
        model: 需求模型
        covariates: n×d_x 原始协变量
        seed: 种子
        keys: 额外的流 key

    Returns:
        n×|𝒥| 需求矩阵
    """
    covariates = np.atleast_2d(np.asarray(covariates, dtype=float))
    errors = stream(seed, Stream.ERRORS, *keys).standard_normal((covariates.shape[0], model.d_y))
    return true_mean(model, covariates) + true_scale(model, covariates) * (model.sigma * errors)


# ==================== 实例 ====================

def gen_instance(n_resources: int, n_customers: int, seed: int,
                 scheme: Optional[InstanceScheme] = None) -> ResourceAllocInstance:
    """
    生成资源分配实例参数.

    q_w = τ·‖c_z‖_∞，τ ~ LN(0.5, 0.05)；c_z、ρ、μ 按 scheme 的均匀区间生成。

    Args:
        n_resources: |ℐ|
        n_customers: |𝒥|
        seed: 种子
        scheme: 生成方案，默认 InstanceScheme()

    Returns:
        ResourceAllocInstance
    """
    if n_resources < 1 or n_customers < 1:
        raise BadConfig("实例维数必须 ≥ 1", n_resources=n_resources, n_customers=n_customers)
    scheme = scheme or InstanceScheme()
    rng = stream(seed, Stream.INSTANCE)
    c_z = rng.uniform(*scheme.c_z_range, size=n_resources)
    rho = rng.uniform(*scheme.rho_range, size=n_resources)
    mu = rng.uniform(*scheme.mu_range, size=(n_resources, n_customers))
    tau = rng.lognormal(scheme.tau_log_mean, scheme.tau_log_std, size=n_customers)
    return ResourceAllocInstance(
        n_resources=n_resources,
        n_customers=n_customers,
        c_z=c_z,
        rho=rho,
        mu=mu,
        q_w=tau * np.max(c_z),
        tau=tau,
        z_max=scheme.z_max,
        scheme=scheme.name,
    )


def recourse_layout(instance: ResourceAllocInstance) -> dict[str, slice]:
    """第二阶段变量的列区间：v_ij（i 主序）、w_j、slack_i、surplus_j."""
    i, j = instance.n_resources, instance.n_customers
    return {
        "v": slice(0, i * j),
        "w": slice(i * j, i * j + j),
        "slack": slice(i * j + j, i * j + j + i),
        "surplus": slice(i * j + j + i, i * j + 2 * j + i),
    }


def to_two_stage(instance: ResourceAllocInstance) -> TwoStageLp:
    """
    资源分配实例 → 两阶段 LP.

    产能行 i：Σ_j v_ij + slack_i = ρ_i z_i；需求行 j：Σ_i μ_ij v_ij + w_j − surplus_j = y_j。
    只有 w_j 有成本 q_w_j；𝒵 = [0, z_max]^{|ℐ|}。

    Args:
        instance: 实例参数

    Returns:
        TwoStageLp
    """
    n_i, n_j = instance.n_resources, instance.n_customers
    layout = recourse_layout(instance)
    d_v = layout["surplus"].stop
    w_matrix = np.zeros((n_i + n_j, d_v))
    for i in range(n_i):
        w_matrix[i, i * n_j:(i + 1) * n_j] = 1.0
        w_matrix[i, layout["slack"].start + i] = 1.0
        w_matrix[n_i:, i * n_j:(i + 1) * n_j] = np.diag(instance.mu[i])
    w_matrix[n_i:, layout["w"]] = np.eye(n_j)
    w_matrix[n_i:, layout["surplus"]] = -np.eye(n_j)

    c_v = np.zeros(d_v)
    c_v[layout["w"]] = instance.q_w
    technology = np.zeros((n_i + n_j, n_i))
    technology[:n_i] = -np.diag(instance.rho)
    h_matrix = np.zeros((n_i + n_j, n_j))
    h_matrix[n_i:] = np.eye(n_j)
    return TwoStageLp.from_arrays(
        c_z=instance.c_z,
        first_stage=LpProblem.build(objective=instance.c_z, lower=0.0, upper=instance.z_max),
        W=w_matrix,
        T=technology,
        c_v=c_v,
        h_offset=np.zeros(n_i + n_j),
        h_matrix=h_matrix,
    )


class Benchmark(NamedTuple):
    """一组配置对应的完整合成基准."""

    instance: ResourceAllocInstance
    model: TwoStageLp
    sampler: CovariateSampler
    demand: DemandModel


def build_benchmark(config: ExperimentConfig) -> Benchmark:
    """按配置生成实例、两阶段模型、协变量采样器与需求模型."""
    instance = gen_instance(config.instance.n_resources, config.instance.n_customers,
                            config.instance_seed(), config.instance.scheme)
    sampler = make_sampler(config.covariates.d_x, config.covariate_seed())
    demand = gen_demand_model(
        sampler,
        n_customers=config.instance.n_customers,
        degree=config.demand.degree,
        sigma=config.demand.sigma,
        omega=config.demand.omega,
        seed=config.demand_seed(),
        calibration_samples=config.demand.calibration_samples,
    )
    logger.info(f"基准算例已生成: I={instance.n_resources}, J={instance.n_customers}, d_x={sampler.d_x}, "
                f"p={demand.degree}, omega={demand.omega}, sigma={demand.sigma}")
    return Benchmark(instance=instance, model=to_two_stage(instance), sampler=sampler, demand=demand)
