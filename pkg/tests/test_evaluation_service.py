"""
@File       : test_evaluation_service.py
@Description: 候选解认证、实验扫描与分位数汇总.

@Time       : 2026/01/17 15:40
@Author     : hcy18
"""
import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from conftest import small_config
from covsaa.errors import DimensionMismatch, EmptyInput, InfeasibleCandidate
from covsaa.schemas.experiment_schema import SolverSection
from covsaa.schemas.scenario_schema import ScenarioSet
from covsaa.services import evaluation_service as evaluation
from covsaa.services.bench_service import build_benchmark, sample_covariates, true_mean
from covsaa.services.two_stage_service import solve_extensive


def _query(bench, key: int = 0) -> np.ndarray:
    return sample_covariates(bench.sampler, 1, key, 99)[0]


# ==================== 分位数 / 上置信界 ====================

def test_percentiles_linear_interpolation():
    stats = evaluation.percentiles(np.arange(1, 101))
    assert stats.p50 == pytest.approx(50.5)
    assert stats.p5 == pytest.approx(5.95)
    assert stats.p95 == pytest.approx(95.05)
    assert stats.count == 100


def test_percentiles_single_value_and_empty():
    stats = evaluation.percentiles([3.5])
    assert (stats.p5, stats.p50, stats.p95) == (3.5, 3.5, 3.5)
    with pytest.raises(EmptyInput):
        evaluation.percentiles([])


def test_ucb_from_gaps_formula():
    report = evaluation.ucb_from_gaps([1.0, 2.0, 3.0], [10.0, 10.0, 10.0], [11.0, 12.0, 13.0], t_multiplier=2.0)
    assert report.v_bar == pytest.approx(10.0)
    assert report.b99 == pytest.approx(10.0 * (2.0 + 2.0 * np.sqrt(1.0 / 3.0)))
    assert report.gap_mean == pytest.approx(2.0)
    assert report.gap_std == pytest.approx(1.0)
    assert not report.abs_gap


def test_ucb_from_gaps_absolute_when_optimum_vanishes():
    report = evaluation.ucb_from_gaps([0.5, 0.5], [0.0, 0.0], [0.5, 0.5])
    assert report.abs_gap
    assert report.b99 == pytest.approx(0.5)


def test_ucb_monotone_in_t_multiplier():
    gaps, optima = [0.3, 1.2, 0.8, 0.1], [20.0, 21.0, 19.5, 20.5]
    bounds = [evaluation.ucb_from_gaps(gaps, optima, optima, t).b99 for t in (1.0, 2.0, 2.462, 3.0)]
    assert all(a < b for a, b in zip(bounds, bounds[1:]))


def test_ucb_requires_two_batches():
    with pytest.raises(DimensionMismatch):
        evaluation.ucb_from_gaps([1.0], [1.0], [2.0])


# ==================== 候选解认证 ====================

def test_zero_noise_point_prediction_is_certified_optimal():
    bench = build_benchmark(small_config(demand={"sigma": 0.0}))
    x = _query(bench)
    center = true_mean(bench.demand, x[None, :])
    z_hat = solve_extensive(bench.model, ScenarioSet.uniform(center)).z_star
    report = evaluation.mrp_ucb(bench.model, bench.demand, bench.sampler, x, z_hat, n_eval=20, n_batches=4)
    assert_array_equal(report.gaps, 0.0)
    assert report.b99 == 0.0


def test_gaps_nonnegative_for_poor_candidate(small_bench):
    x = _query(small_bench)
    z_hat = np.zeros(small_bench.model.d_z)
    report = evaluation.mrp_ucb(small_bench.model, small_bench.demand, small_bench.sampler, x, z_hat,
                                n_eval=30, n_batches=5, seed=3)
    assert np.all(report.gaps >= -1e-9)
    assert report.b99 > 0
    assert_allclose(report.gaps, report.batch_costs - report.batch_optima)
    assert report.n_batches == 5


def test_certification_is_deterministic_and_accepts_shared_batches(small_bench):
    x = _query(small_bench, 1)
    z_hat = np.full(small_bench.model.d_z, 30.0)
    args = (small_bench.model, small_bench.demand, small_bench.sampler, x, z_hat)
    first = evaluation.mrp_ucb(*args, 25, 4, 2.462, 11, 0)
    second = evaluation.mrp_ucb(*args, 25, 4, 2.462, 11, 0)
    assert first.b99 == second.b99
    assert_array_equal(first.gaps, second.gaps)

    batches = evaluation.fi_batches(small_bench.model, small_bench.demand, x, 25, 4, 11, 0)
    shared = evaluation.mrp_ucb(*args, batches=batches)
    assert_array_equal(shared.gaps, first.gaps)
    assert shared.n_eval == 25


def test_certification_input_checks(small_bench):
    x = _query(small_bench)
    with pytest.raises(InfeasibleCandidate):
        evaluation.mrp_ucb(small_bench.model, small_bench.demand, small_bench.sampler, x,
                           -np.ones(small_bench.model.d_z), n_eval=5, n_batches=2)
    with pytest.raises(DimensionMismatch):
        evaluation.mrp_ucb(small_bench.model, small_bench.demand, small_bench.sampler, np.ones(2),
                           np.zeros(small_bench.model.d_z), n_eval=5, n_batches=2)
    with pytest.raises(DimensionMismatch):
        evaluation.fi_batches(small_bench.model, small_bench.demand, x, n_eval=5, n_batches=1)


def test_solve_saa_returns_incumbent_on_iteration_limit(small_bench):
    scenarios = ScenarioSet.uniform(np.random.default_rng(0).uniform(0, 60, size=(5, 3)))
    result = evaluation.solve_saa(small_bench.model, scenarios, SolverSection(lshaped_tol=1e-12, lshaped_max_iter=1))
    assert result.iterations == 1
    exact = evaluation.solve_saa(small_bench.model, scenarios, SolverSection(algorithm="extensive"))
    assert result.objective >= exact.objective - 1e-9


@pytest.mark.slow
def test_gap_spread_shrinks_with_batch_size(small_bench):
    x = _query(small_bench, 2)
    z_hat = np.full(small_bench.model.d_z, 25.0)
    args = (small_bench.model, small_bench.demand, small_bench.sampler, x, z_hat)
    small = evaluation.mrp_ucb(*args, n_eval=25, n_batches=10, seed=5)
    large = evaluation.mrp_ucb(*args, n_eval=400, n_batches=10, seed=5)
    assert large.gap_std < small.gap_std


# ==================== 实验扫描 ====================

def test_run_replications_table_shape():
    table = evaluation.run_replications(small_config(), n_jobs=1)
    assert list(table.columns) == evaluation.RESULT_COLUMNS
    assert len(table) == 2
    assert list(table["method"]) == ["er_ols", "n_saa"]
    assert set(table["status"]) <= {"ok", "abs_gap"}
    assert np.all(table["solve_ms"] == 0.0)
    assert np.all(table["b99_percent"] >= 0.0)


def test_run_replications_reproducible_across_thread_counts():
    config = small_config(experiment={"replications": 2, "n_grid": [10, 20]})
    sequential = evaluation.run_replications(config, n_jobs=1)
    threaded = evaluation.run_replications(config, n_jobs=2)
    pd.testing.assert_frame_equal(sequential, threaded)
    assert list(sequential["replication"]) == [0, 0, 0, 0, 1, 1, 1, 1]


def test_failed_cell_is_recorded_not_raised():
    # n=2 时含截距的 4 列设计秩亏，OLS 单元失败，N-SAA 单元正常
    table = evaluation.run_replications(small_config(experiment={"n_grid": [2]}), n_jobs=1)
    statuses = dict(zip(table["method"], table["status"]))
    assert statuses["er_ols"] == "error:RankDeficient"
    assert statuses["n_saa"] in ("ok", "abs_gap")


# ==================== 汇总 ====================

def _results(rows) -> pd.DataFrame:
    frame = pd.DataFrame(rows, columns=["method", "n", "replication", "b99_percent", "status"])
    return frame


def test_summarize_groups_in_first_appearance_order():
    table = _results([
        ("n_saa", 40, 0, 4.0, "ok"),
        ("er_ols", 40, 0, 1.0, "ok"),
        ("n_saa", 40, 1, 6.0, "ok"),
        ("er_ols", 40, 1, 3.0, "ok"),
        ("er_ols", 40, 2, 100.0, "error:RankDeficient"),
        ("er_ols", 40, 3, 50.0, "abs_gap"),
    ])
    summary = evaluation.summarize(table)
    assert list(summary.columns) == evaluation.SUMMARY_COLUMNS
    assert list(summary["method"]) == ["n_saa", "er_ols"]
    er = summary[summary["method"] == "er_ols"].iloc[0]
    assert er["p50"] == pytest.approx(2.0)
    assert er["count"] == 2


def test_summarize_single_row():
    summary = evaluation.summarize(_results([("j_ols", 15, 0, 7.25, "ok")]))
    assert len(summary) == 1
    row = summary.iloc[0]
    assert row["p5"] == row["p95"] == 7.25
    assert row["n"] == 15


def test_summarize_missing_columns():
    with pytest.raises(EmptyInput):
        evaluation.summarize(pd.DataFrame({"method": ["er_ols"]}))


class _BrokenMethod:
    name = "er_ols"

    def __init__(self, error: Exception):
        self.error = error

    def build(self, data, x, ctx):
        raise self.error


@pytest.mark.parametrize("error", [IndexError("index 1 is out of bounds"), np.linalg.LinAlgError("singular"),
                                   ZeroDivisionError("division by zero")])
def test_untyped_cell_error_is_recorded_not_raised(monkeypatch, error):
    real_get_method = evaluation.get_method
    monkeypatch.setattr(evaluation, "get_method",
                        lambda name: _BrokenMethod(error) if name == "er_ols" else real_get_method(name))
    table = evaluation.run_replications(small_config(), n_jobs=1)
    statuses = dict(zip(table["method"], table["status"]))
    assert statuses["er_ols"] == f"error:{type(error).__name__}"
    assert statuses["n_saa"] in ("ok", "abs_gap")


def test_non_finite_scenarios_surface_as_typed_error(monkeypatch):
    class _NanMethod(_BrokenMethod):
        def build(self, data, x, ctx):
            return ScenarioSet.uniform(np.full((2, data.d_y), np.nan))

    real_get_method = evaluation.get_method
    monkeypatch.setattr(evaluation, "get_method",
                        lambda name: _NanMethod(None) if name == "er_ols" else real_get_method(name))
    table = evaluation.run_replications(small_config(), n_jobs=1)
    assert table.loc[table["method"] == "er_ols", "status"].iloc[0] == "error:DimensionMismatch"


def test_ucb_increases_with_mean_gap():
    gaps, optima = np.array([0.3, 1.2, 0.8, 0.1]), np.array([20.0, 21.0, 19.5, 20.5])
    bounds = [evaluation.ucb_from_gaps(gaps + shift, optima, optima + gaps + shift).b99
              for shift in (0.0, 0.5, 1.0, 4.0)]
    assert all(a < b for a, b in zip(bounds, bounds[1:]))
