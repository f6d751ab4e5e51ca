"""
@File       : test_scenario_service.py
@Description: 情景构造：ER / J / J+ / N-SAA / PP / kNN-SAA 与均值偏差界.

@Time       : 2026/01/17 13:20
@Author     : hcy18
"""
import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from covsaa.errors import BadConfig, DimensionMismatch, KOutOfRange, TrueModelUnavailable
from covsaa.schemas.regression_schema import Dataset, HeteroModel, LooOlsFamily, RegressionSpec
from covsaa.schemas.scenario_schema import ResidualMatrix, ScenarioSet, SupportBox
from covsaa.services import regression_service as regress
from covsaa.services import scenario_service as scenario


def _query(rng: np.random.Generator, d_raw: int) -> np.ndarray:
    return np.concatenate([[1.0], rng.normal(size=d_raw)])


# ==================== 投影 ====================

def test_projection_is_idempotent_and_nonexpansive():
    rng = np.random.default_rng(0)
    support = SupportBox(lower=np.array([0.0, -1.0, -np.inf]), upper=np.array([np.inf, 1.0, 2.0]))
    a, b = rng.normal(scale=3.0, size=(2, 50, 3))
    pa, pb = scenario.project(a, support), scenario.project(b, support)
    assert_array_equal(scenario.project(pa, support), pa)
    assert np.all(np.linalg.norm(pa - pb, axis=1) <= np.linalg.norm(a - b, axis=1) + 1e-12)
    assert np.all(pa >= support.lower) and np.all(pa <= support.upper)


def test_projection_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        scenario.project(np.zeros((2, 3)), SupportBox.nonnegative(2))


# ==================== ER-SAA / J-SAA ====================

def test_er_saa_is_prediction_plus_residuals(make_dataset):
    data = make_dataset(1)
    f = regress.fit_ols(data)
    q = HeteroModel.identity()
    residuals = scenario.empirical_residuals(data, f, q)
    assert_allclose(residuals.values, data.responses - regress.predict_many(f, data.covariates))

    x = _query(np.random.default_rng(1), 5)
    scenarios = scenario.build_er_saa(x, f, q, residuals, SupportBox.unbounded(2), apply_projection=False)
    assert_allclose(scenarios.points, regress.predict(f, x) + residuals.values)
    assert_allclose(scenarios.weights, np.full(data.n, 1.0 / data.n))


def test_er_saa_shifts_with_constant_response_shift(make_dataset):
    data = make_dataset(11)
    shift = np.array([7.5, -3.0])
    shifted = Dataset.from_arrays(data.covariates, data.responses + shift)
    x = _query(np.random.default_rng(11), 5)
    q = HeteroModel.identity()

    def _scenarios(d: Dataset):
        f = regress.fit_ols(d)
        return scenario.build_er_saa(x, f, q, scenario.empirical_residuals(d, f, q), SupportBox.unbounded(2),
                                     apply_projection=False)

    base, moved = _scenarios(data), _scenarios(shifted)
    assert_allclose(scenario.empirical_residuals(shifted, regress.fit_ols(shifted), q).values,
                    scenario.empirical_residuals(data, regress.fit_ols(data), q).values, atol=1e-8)
    assert_allclose(moved.points, base.points + shift, atol=1e-8)


def test_er_saa_projection_clips_to_support(make_dataset):
    data = make_dataset(2, noise=20.0)
    f = regress.fit_ols(data)
    q = HeteroModel.identity()
    residuals = scenario.empirical_residuals(data, f, q)
    x = _query(np.random.default_rng(2), 5)
    raw = scenario.build_er_saa(x, f, q, residuals, SupportBox.nonnegative(2), apply_projection=False)
    projected = scenario.build_er_saa(x, f, q, residuals, SupportBox.nonnegative(2))
    assert np.any(raw.points < 0)
    assert_array_equal(projected.points, np.maximum(raw.points, 0.0))


def test_zero_residuals_collapse_to_prediction(make_dataset):
    data = make_dataset(3)
    f = regress.fit_ols(data)
    x = _query(np.random.default_rng(3), 5)
    zero = ResidualMatrix(values=np.zeros((data.n, 2)))
    scenarios = scenario.build_er_saa(x, f, HeteroModel.identity(), zero, SupportBox.unbounded(2))
    assert_allclose(scenarios.points, np.tile(regress.predict(f, x), (data.n, 1)))


def test_er_saa_scales_hetero_residuals():
    rng = np.random.default_rng(4)
    raw = np.abs(rng.normal(size=(40, 2)))
    design = np.column_stack([np.ones(40), raw])
    responses = design @ rng.normal(size=(3, 2)) + np.exp(raw[:, :1]) * rng.normal(size=(40, 2))
    data = Dataset.from_arrays(design, responses)
    f = regress.fit_ols(data)
    q = regress.fit_hetero_loglinear(data, f, delta=1e-4)
    residuals = scenario.empirical_residuals(data, f, q)
    scale_train = regress.scale_matrix(q, data.covariates, 2)
    assert_allclose(residuals.values * scale_train, data.responses - regress.predict_many(f, data.covariates))

    x = np.array([1.0, 0.5, 1.5])
    scenarios = scenario.build_er_saa(x, f, q, residuals, SupportBox.unbounded(2), apply_projection=False)
    expected = regress.predict(f, x) + np.diag(regress.q_matrix(q, x)) * residuals.values
    assert_allclose(scenarios.points, expected)


def test_j_saa_uses_loo_residuals(make_dataset):
    data = make_dataset(5)
    f = regress.fit_ols(data)
    bundle = regress.loo_ols(data)
    loo_res = scenario.loo_residuals(data, bundle)
    x = _query(np.random.default_rng(5), 5)
    scenarios = scenario.build_j_saa(x, f, HeteroModel.identity(), loo_res, SupportBox.unbounded(2), False)
    assert_allclose(scenarios.points, regress.predict(f, x) + bundle.loo_residuals)


def test_loo_residuals_from_refits_match_bundle(make_dataset):
    data = make_dataset(6, n=20, d_x=3)
    refits = regress.loo_refit(data, RegressionSpec(kind="ols"))
    assert_allclose(scenario.loo_residuals(data, refits).values, regress.loo_ols(data).loo_residuals, atol=1e-9)


def test_loo_residuals_count_mismatch(make_dataset):
    data = make_dataset(7, n=10, d_x=2)
    refits = regress.loo_refit(data, RegressionSpec(kind="ols"))
    with pytest.raises(DimensionMismatch):
        scenario.loo_residuals(data, refits[:-1])


# ==================== J+-SAA ====================

def test_jplus_shortcut_matches_explicit_refits(make_dataset):
    data = make_dataset(8, n=25, d_x=4)
    bundle = regress.loo_ols(data)
    loo_res = scenario.loo_residuals(data, bundle)
    family = LooOlsFamily(bundle=bundle, data=data, model=regress.fit_ols(data))
    refits = regress.loo_refit(data, RegressionSpec(kind="ols"))
    x = _query(np.random.default_rng(8), 4)
    support = SupportBox.unbounded(2)
    fast = scenario.build_jplus_saa(x, family, loo_res, support, apply_projection=False)
    slow = scenario.build_jplus_saa(x, refits, loo_res, support, apply_projection=False)
    assert np.max(np.abs(fast.points - slow.points)) < 1e-8

    explicit = np.stack([regress.predict(f, x) for f, _ in refits]) + loo_res.values
    assert_allclose(slow.points, explicit)


# ==================== 基线 ====================

def test_n_saa_returns_responses(make_dataset):
    data = make_dataset(9, n=12)
    scenarios = scenario.build_n_saa(data)
    assert_array_equal(scenarios.points, data.responses)
    assert_allclose(scenarios.weights, np.full(12, 1.0 / 12))


def test_pp_single_projected_scenario(make_dataset):
    data = make_dataset(10)
    f = regress.fit_ols(data)
    x = _query(np.random.default_rng(10), 5)
    pp = scenario.build_pp(x, f, SupportBox.nonnegative(2))
    assert pp.m == 1
    assert_array_equal(pp.weights, [1.0])
    assert_allclose(pp.points[0], np.maximum(regress.predict(f, x), 0.0))


def test_knn_saa_weights(make_dataset):
    data = make_dataset(11, n=20, d_x=2)
    x = _query(np.random.default_rng(11), 2)
    scenarios = scenario.build_knn_saa(data, x, 4)
    dist = np.sum((data.covariates - x) ** 2, axis=1)
    nearest = np.argsort(dist, kind="stable")[:4]
    assert np.count_nonzero(scenarios.weights) == 4
    assert_allclose(scenarios.weights[nearest], 0.25)
    assert_array_equal(scenarios.points, data.responses)
    assert_array_equal(scenarios.support_indices(), np.sort(nearest))


def test_knn_saa_k_out_of_range(make_dataset):
    data = make_dataset(12, n=5)
    with pytest.raises(KOutOfRange):
        scenario.build_knn_saa(data, data.covariates[0], 6)


# ==================== 均值偏差界 ====================

def test_lemma2_bound_holds_on_homoscedastic_draws():
    rng = np.random.default_rng(13)
    coef = rng.normal(size=(2, 4))

    def f_true(design: np.ndarray) -> np.ndarray:
        return design @ coef.T

    for _ in range(100):
        raw = rng.normal(size=(25, 3))
        design = np.column_stack([np.ones(25), raw])
        data = Dataset.from_arrays(design, f_true(design) + rng.normal(size=(25, 2)))
        f = regress.fit_ols(data)
        residuals = scenario.empirical_residuals(data, f, HeteroModel.identity())
        check = scenario.check_lemma2_bound(_query(rng, 3), f, True, f_true, residuals, data)
        assert check.holds


def test_lemma2_requires_true_model(make_dataset):
    data = make_dataset(14)
    f = regress.fit_ols(data)
    residuals = scenario.empirical_residuals(data, f, HeteroModel.identity())
    with pytest.raises(TrueModelUnavailable):
        scenario.check_lemma2_bound(data.covariates[0], f, True, None, residuals, data)
    with pytest.raises(BadConfig):
        scenario.check_lemma2_bound(data.covariates[0], f, False, lambda d: d @ f.coef.T, residuals, data)


def test_scenario_construction_errors_are_typed():
    with pytest.raises(DimensionMismatch):
        ScenarioSet.from_arrays(np.array([[1.0, np.nan]]), np.ones(1))
    with pytest.raises(DimensionMismatch):
        ScenarioSet.from_arrays(np.ones((3, 2)), np.full(2, 0.5))
    with pytest.raises(DimensionMismatch):
        ResidualMatrix.from_array(np.array([[np.inf]]))
