"""
@File       : test_saa_method_provider.py
@Description: SAA 方法工厂与各方法流水线.

@Time       : 2026/01/17 14:05
@Author     : hcy18
"""
import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from conftest import random_dataset
from covsaa.errors import BadConfig
from covsaa.provider.saa_method_provider import MethodContext, get_method, registered_methods
from covsaa.schemas.experiment_schema import SUPPORTED_METHODS, RegressionSection
from covsaa.schemas.regression_schema import Dataset
from covsaa.schemas.scenario_schema import SupportBox


def _positive_dataset(seed: int, n: int = 30) -> Dataset:
    """非负协变量（对数线性异方差需要）与正需求."""
    rng = np.random.default_rng(seed)
    raw = np.abs(rng.normal(size=(n, 3)))
    design = np.column_stack([np.ones(n), raw])
    responses = 50.0 + raw @ np.array([[10.0, 4.0], [5.0, 2.0], [2.0, 1.0]]) + rng.normal(scale=5.0, size=(n, 2))
    return Dataset.from_arrays(design, responses)


def _context(**kwargs) -> MethodContext:
    regression = RegressionSection(lasso_grid_size=10, knn_max_grid=10)
    return MethodContext(regression=regression, support=SupportBox.nonnegative(2), **kwargs)


def test_registry_covers_supported_methods():
    assert set(registered_methods()) == set(SUPPORTED_METHODS)
    for name in SUPPORTED_METHODS:
        assert get_method(name).name == name


def test_unknown_method():
    with pytest.raises(BadConfig) as info:
        get_method("quantile_saa")
    assert "er_ols" in info.value.context["supported"]


@pytest.mark.parametrize("name", SUPPORTED_METHODS)
def test_every_method_builds_valid_scenarios(name):
    data = _positive_dataset(0)
    x = np.array([1.0, 0.4, 1.2, 0.7])
    scenarios = get_method(name).build(data, x, _context())
    assert scenarios.d_y == 2
    assert scenarios.weights.sum() == pytest.approx(1.0)
    assert np.all(scenarios.points[scenarios.support_indices()] >= 0.0)


def test_n_saa_ignores_query():
    data = _positive_dataset(1)
    method = get_method("n_saa")
    assert method.ignores_x
    first = method.build(data, np.array([1.0, 0.0, 0.0, 0.0]), _context())
    second = method.build(data, np.array([1.0, 9.0, 9.0, 9.0]), _context())
    assert_array_equal(first.points, second.points)


def test_projection_flag_controls_clipping():
    data = random_dataset(2, n=30, d_x=3, d_y=2, noise=30.0)
    x = np.array([1.0, 0.0, 0.0, 0.0])
    method = get_method("er_ols")
    clipped = method.build(data, x, _context(apply_projection=True))
    raw = method.build(data, x, _context(apply_projection=False))
    assert np.any(raw.points < 0)
    assert_allclose(clipped.points, np.maximum(raw.points, 0.0))


def test_cv_seed_makes_selection_deterministic():
    data = _positive_dataset(3, n=40)
    x = np.array([1.0, 0.4, 1.2, 0.7])
    method = get_method("knn_saa")
    first = method.build(data, x, _context(cv_seed=5))
    second = method.build(data, x, _context(cv_seed=5))
    assert_array_equal(first.weights, second.weights)


def test_hetero_lasso_option():
    data = _positive_dataset(4, n=40)
    x = np.array([1.0, 0.4, 1.2, 0.7])
    ctx = MethodContext(regression=RegressionSection(lasso_grid_size=10, hetero_lasso=True),
                        support=SupportBox.nonnegative(2))
    scenarios = get_method("er_ols_hetero").build(data, x, ctx)
    assert scenarios.m == 40
