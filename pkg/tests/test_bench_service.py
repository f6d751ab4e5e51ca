"""
@File       : test_bench_service.py
@Description: 资源分配基准：相关矩阵、协变量、需求模型与实例.

@Time       : 2026/01/17 14:50
@Author     : hcy18
"""
import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from conftest import small_config
from covsaa.errors import BadConfig, DomainError
from covsaa.services import bench_service as bench
from covsaa.services.two_stage_service import second_stage_value
from covsaa.utils.seeding import Stream, stream


# ==================== 协变量 ====================

@pytest.mark.parametrize("d_x", [1, 2, 3, 10])
def test_vine_correlation_is_valid(d_x):
    corr = bench.vine_correlation(d_x, seed=d_x)
    assert corr.shape == (d_x, d_x)
    assert_allclose(corr, corr.T, atol=1e-12)
    assert_allclose(np.diag(corr), 1.0)
    assert np.all(np.abs(corr) <= 1.0 + 1e-12)
    assert np.min(np.linalg.eigvalsh(corr)) > -1e-10


def test_vine_correlation_rejects_empty():
    with pytest.raises(BadConfig):
        bench.vine_correlation(0, seed=1)


def test_folded_normal_mean():
    sampler = bench.make_sampler(4, seed=3)
    samples = bench.sample_covariates(sampler, 20000, 0)
    assert np.all(samples >= 0)
    assert_allclose(samples.mean(axis=0), np.sqrt(2.0 / np.pi), atol=0.02)


def test_covariates_deterministic_and_prefix_consistent():
    sampler = bench.make_sampler(5, seed=11)
    small = bench.sample_covariates(sampler, 10, 2)
    large = bench.sample_covariates(sampler, 50, 2)
    assert_array_equal(large[:10], small)
    assert_array_equal(bench.sample_covariates(sampler, 10, 2), small)
    assert not np.array_equal(bench.sample_covariates(sampler, 10, 3), small)


# ==================== 需求模型 ====================

def test_homoscedastic_demand_is_mean_plus_scaled_errors():
    sampler = bench.make_sampler(3, seed=5)
    model = bench.gen_demand_model(sampler, n_customers=4, degree=1.0, sigma=5.0, omega=1, seed=5)
    assert_array_equal(model.pi_star, 0.0)
    assert_array_equal(model.s, 1.0)

    covariates = bench.sample_covariates(sampler, 30, 0)
    assert_array_equal(bench.true_scale(model, covariates), np.ones((30, 4)))
    demand = bench.simulate_demand(model, covariates, 9, 0)
    errors = stream(9, Stream.ERRORS, 0).standard_normal((30, 4))
    assert_allclose(demand - bench.true_mean(model, covariates), 5.0 * errors, atol=1e-12)


def test_true_mean_formula():
    sampler = bench.make_sampler(4, seed=6)
    model = bench.gen_demand_model(sampler, n_customers=2, degree=2.0, sigma=1.0, omega=1, seed=6)
    x = np.array([[0.5, 1.0, 2.0, 7.0]])
    expected = model.phi + np.array([0.25, 1.0, 4.0]) @ model.zeta.T
    assert_allclose(bench.true_mean(model, x)[0], expected)


def test_demand_parameter_ranges():
    sampler = bench.make_sampler(3, seed=7)
    model = bench.gen_demand_model(sampler, n_customers=200, degree=0.5, sigma=5.0, omega=2, seed=7,
                                   calibration_samples=501)
    assert np.all(np.abs(model.zeta - bench.ZETA_CENTERS) <= 4.0)
    assert np.all((model.pi_star >= 0.0) & (model.pi_star <= 2.0))
    assert abs(float(np.mean(model.phi)) - 50.0) < 1.5


def test_heteroscedastic_scale_is_median_calibrated():
    sampler = bench.make_sampler(5, seed=8)
    model = bench.gen_demand_model(sampler, n_customers=6, degree=1.0, sigma=5.0, omega=3, seed=8)
    covariates = bench.sample_covariates(sampler, 20000, 0)
    share = np.mean(bench.true_scale(model, covariates) > 1.0, axis=0)
    assert np.all(np.abs(share - 0.5) <= 0.02)


def test_demand_model_rejects_bad_parameters():
    sampler = bench.make_sampler(3, seed=9)
    with pytest.raises(BadConfig):
        bench.gen_demand_model(sampler, 2, degree=3.0, sigma=1.0, omega=1, seed=9)
    with pytest.raises(BadConfig):
        bench.gen_demand_model(sampler, 2, degree=1.0, sigma=1.0, omega=4, seed=9)
    with pytest.raises(BadConfig):
        bench.gen_demand_model(bench.make_sampler(2, seed=9), 2, degree=1.0, sigma=1.0, omega=1, seed=9)


def test_demand_requires_nonnegative_covariates():
    sampler = bench.make_sampler(3, seed=10)
    model = bench.gen_demand_model(sampler, 2, degree=1.0, sigma=1.0, omega=1, seed=10)
    with pytest.raises(DomainError):
        bench.true_mean(model, np.array([[-1.0, 0.0, 0.0]]))


# ==================== 实例 ====================

def test_instance_parameters_positive():
    instance = bench.gen_instance(5, 7, seed=12)
    for name in ("c_z", "rho", "mu", "q_w", "tau"):
        assert np.all(getattr(instance, name) > 0)
    assert_allclose(instance.q_w, instance.tau * instance.c_z.max())
    assert np.all((instance.c_z >= 8.0) & (instance.c_z <= 12.0))


def test_instance_deterministic():
    first, second = bench.gen_instance(3, 4, seed=13), bench.gen_instance(3, 4, seed=13)
    assert_array_equal(first.mu, second.mu)
    assert_array_equal(first.q_w, second.q_w)


def test_two_stage_dimensions_and_complete_recourse():
    instance = bench.gen_instance(3, 4, seed=14)
    model = bench.to_two_stage(instance)
    assert (model.d_z, model.m2, model.d_y) == (3, 7, 4)
    assert model.d_v == 3 * 4 + 4 + 3 + 4
    rng = np.random.default_rng(14)
    for _ in range(10):
        z = rng.uniform(0, 50, size=3)
        y = rng.uniform(0, 80, size=4)
        value = second_stage_value(model, z, y).value
        assert -1e-9 <= value <= float(instance.q_w @ y) + 1e-9


def test_negative_demand_has_zero_cost():
    model = bench.to_two_stage(bench.gen_instance(2, 3, seed=15))
    assert second_stage_value(model, np.zeros(2), -np.ones(3)).value == pytest.approx(0.0, abs=1e-12)


def test_build_benchmark_is_reproducible():
    config = small_config()
    first, second = bench.build_benchmark(config), bench.build_benchmark(config)
    assert_array_equal(first.instance.c_z, second.instance.c_z)
    assert_array_equal(first.sampler.correlation, second.sampler.correlation)
    assert_array_equal(first.demand.zeta, second.demand.zeta)
    assert first.sampler.d_x == 3
    assert first.demand.d_y == 3


def test_tau_lognormal_moments():
    instance = bench.gen_instance(1, 100_000, seed=16)
    log_ratio = np.log(instance.q_w / instance.c_z.max())
    assert abs(float(log_ratio.mean()) - 0.5) <= 0.01
    assert abs(float(log_ratio.std()) - 0.05) <= 0.005


def test_strong_heteroscedasticity_has_positive_variance_slope():
    sampler = bench.make_sampler(3, seed=17)
    model = bench.gen_demand_model(sampler, n_customers=4, degree=1.0, sigma=5.0, omega=3, seed=17)
    covariates = bench.sample_covariates(sampler, 20000, 0)
    residuals = bench.simulate_demand(model, covariates, 17, 0) - bench.true_mean(model, covariates)
    log_features = np.log1p(covariates[:, model.active])
    for j in range(model.d_y):
        index = log_features @ model.pi_star[j]
        design = np.column_stack([np.ones(len(index)), index])
        slope = np.linalg.lstsq(design, residuals[:, j] ** 2, rcond=None)[0][1]
        assert slope > 0
