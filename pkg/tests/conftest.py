"""
@File       : conftest.py
@Description: 测试共享 fixture：随机数据集、微型实例与小型基准.

@Time       : 2026/01/17 09:10
@Author     : hcy18
"""
from typing import Callable, Optional

import numpy as np
import pytest

from covsaa.schemas.bench_schema import ResourceAllocInstance
from covsaa.schemas.experiment_schema import ExperimentConfig
from covsaa.schemas.regression_schema import Dataset
from covsaa.schemas.scenario_schema import ScenarioSet
from covsaa.schemas.twostage_schema import TwoStageLp
from covsaa.services.bench_service import Benchmark, build_benchmark, gen_instance, to_two_stage


def random_dataset(seed: int, n: int = 30, d_x: int = 5, d_y: int = 2, noise: float = 1.0) -> Dataset:
    """线性模型 + 高斯噪声的数据集，d_x 为原始协变量维数（另加截距列）."""
    rng = np.random.default_rng(seed)
    raw = rng.normal(size=(n, d_x))
    coef = rng.normal(size=(d_x + 1, d_y))
    design = np.column_stack([np.ones(n), raw])
    responses = design @ coef + noise * rng.normal(size=(n, d_y))
    return Dataset.from_arrays(design, responses)


@pytest.fixture
def make_dataset() -> Callable[..., Dataset]:
    return random_dataset


@pytest.fixture
def micro_instance() -> ResourceAllocInstance:
    """|ℐ| = |𝒥| = 1，ρ = μ = 1，q_w = 10."""
    return ResourceAllocInstance(
        n_resources=1,
        n_customers=1,
        c_z=np.array([1.0]),
        rho=np.array([1.0]),
        mu=np.array([[1.0]]),
        q_w=np.array([10.0]),
        tau=np.array([10.0]),
    )


@pytest.fixture
def micro_model(micro_instance) -> TwoStageLp:
    return to_two_stage(micro_instance)


def small_model(seed: int, n_resources: int = 3, n_customers: int = 4) -> TwoStageLp:
    return to_two_stage(gen_instance(n_resources, n_customers, seed))


def random_scenarios(seed: int, n_customers: int, m: int, low: float = 0.0, high: float = 60.0,
                     weights: Optional[np.ndarray] = None) -> ScenarioSet:
    rng = np.random.default_rng(seed)
    points = rng.uniform(low, high, size=(m, n_customers))
    if weights is None:
        return ScenarioSet.uniform(points)
    return ScenarioSet(points=points, weights=weights)


def small_config(**overrides) -> ExperimentConfig:
    """小型实验配置：|ℐ|=2，|𝒥|=3，d_x=3，评估批次缩小."""
    document = {
        "instance": {"n_resources": 2, "n_customers": 3},
        "covariates": {"d_x": 3},
        "demand": {"sigma": 5.0, "omega": 1},
        "experiment": {"methods": ["er_ols", "n_saa"], "n_grid": [20], "replications": 1,
                       "master_seed": 7, "record_timing": False},
        "evaluation": {"n_eval": 30, "n_batches": 4},
    }
    for section, values in overrides.items():
        document.setdefault(section, {}).update(values)
    return ExperimentConfig.model_validate(document)


@pytest.fixture
def small_bench() -> Benchmark:
    return build_benchmark(small_config())
