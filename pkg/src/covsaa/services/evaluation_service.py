"""
@File       : evaluation_service.py
@Description: 候选解认证（多重复批次法的 99% 上置信界）与多重复实验扫描、分位数汇总.

@Time       : 2026/01/14 10:20
@Author     : hcy18
"""
import time
from typing import NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import ValidationError

from covsaa.config.settings import get_settings
from covsaa.errors import CovSaaError, DimensionMismatch, EmptyInput, IterationLimit, SolverError
from covsaa.provider.saa_method_provider import MethodContext, get_method
from covsaa.schemas.bench_schema import CovariateSampler, DemandModel
from covsaa.schemas.experiment_schema import (
    DEFAULT_N_BATCHES,
    DEFAULT_N_EVAL,
    DEFAULT_T_MULTIPLIER,
    ExperimentConfig,
    Percentiles,
    SolverSection,
    UcbReport,
)
from covsaa.schemas.regression_schema import Dataset
from covsaa.schemas.scenario_schema import ScenarioSet, SupportBox
from covsaa.schemas.twostage_schema import SolveResult, TwoStageLp
from covsaa.services.bench_service import (
    Benchmark,
    build_benchmark,
    sample_covariates,
    simulate_demand,
    true_mean,
    true_scale,
)
from covsaa.services.two_stage_service import (
    RecourseBunch,
    check_first_stage,
    saa_objective,
    solve_extensive,
    solve_lshaped,
)
from covsaa.utils.logger import app_logger as logger
from covsaa.utils.run_context import run_tag
from covsaa.utils.seeding import Stream, derive_seed, stream

RESULT_COLUMNS = ["method", "n", "replication", "b99_percent", "gap_mean", "gap_std", "v_bar", "solve_ms", "status"]
SUMMARY_COLUMNS = ["method", "n", "p5", "p25", "p50", "p75", "p95", "count"]
PERCENTILE_LEVELS = (5, 25, 50, 75, 95)

# |v̄| 低于该值时不做归一化
NORMALIZE_FLOOR = 1e-8

# 单元内未归入业务异常的数值 / 校验失败，同样只记入 status
UNTYPED_CELL_ERRORS = (ValidationError, ValueError, ArithmeticError, IndexError, np.linalg.LinAlgError)


class FiBatch(NamedTuple):
    """一个全信息批次：真实模型下的等权情景与该批 SAA 的最优值."""

    scenarios: ScenarioSet
    optimum: float


# ==================== 求解 ====================

def solve_saa(model: TwoStageLp, scenarios: ScenarioSet, solver: Optional[SolverSection] = None) -> SolveResult:
    """
    按求解器配置求解 SAA.

    L-shaped 达到迭代上限时返回现任解（可行），并记录警告。

    Args:
        model: 两阶段模型
        scenarios: 带权情景
        solver: 求解器配置，默认 SolverSection()

    Returns:
        SolveResult
    """
    solver = solver or SolverSection()
    if solver.algorithm == "extensive":
        return solve_extensive(model, scenarios, solver.extensive_var_cap)
    try:
        return solve_lshaped(model, scenarios, solver.lshaped_tol, solver.lshaped_max_iter)
    except IterationLimit as e:
        if e.result is None:
            raise
        logger.warning(f"L-shaped 未收敛，使用现任解: {e}")
        return e.result


def _batch_optimum(model: TwoStageLp, scenarios: ScenarioSet, batch: int) -> float:
    try:
        return solve_saa(model, scenarios).objective
    except SolverError as e:
        raise type(e)(f"全信息批次求解失败: {e.message}", batch=batch, **e.context) from e


def fi_batches(model: TwoStageLp, demand: DemandModel, x_raw, n_eval: int = DEFAULT_N_EVAL,
               n_batches: int = DEFAULT_N_BATCHES, seed: int = 0, *keys: int, n_jobs: int = 1) -> list[FiBatch]:
    """
    生成全信息批次并求各批最优值 v̄^k.

    第 k 批情景为 f*(x) + Q*(x)·σε，ε 取自流 (seed, EVALUATION, *keys, k)，不投影。

    Args:
        model: 两阶段模型
        demand: 真实需求模型
        x_raw: 原始协变量（不含截距）
        n_eval: 每批样本数
        n_batches: 批次数
        seed: 主种子
        keys: 额外的流 key（重复编号等）
        n_jobs: 批次并行数

    Returns:
        按批次编号排列的 FiBatch 列表
    """
    if n_eval < 1 or n_batches < 2:
        raise DimensionMismatch("要求 n_eval ≥ 1 且 n_batches ≥ 2", n_eval=n_eval, n_batches=n_batches)
    x_raw = np.asarray(x_raw, dtype=float)
    center = true_mean(demand, x_raw[None, :])[0]
    scale = true_scale(demand, x_raw[None, :])[0] * demand.sigma

    def _build(k: int) -> FiBatch:
        errors = stream(seed, Stream.EVALUATION, *keys, k).standard_normal((n_eval, demand.d_y))
        scenarios = ScenarioSet.uniform(center + scale * errors)
        return FiBatch(scenarios=scenarios, optimum=_batch_optimum(model, scenarios, k))

    return Parallel(n_jobs=n_jobs, prefer="threads")(delayed(_build)(k) for k in range(n_batches))


# ==================== 认证 ====================

def ucb_from_gaps(gaps, batch_optima, batch_costs, t_multiplier: float = DEFAULT_T_MULTIPLIER,
                  n_eval: int = DEFAULT_N_EVAL) -> UcbReport:
    """
    由批次 gap 计算 B̂₉₉ = (100/|v̄|)·(mean(Ĝ) + t·√(var(Ĝ)/K))，样本方差无偏.

    |v̄| < 1e-8 时不归一化，报告绝对上界并置 abs_gap。
    """
    gaps = np.asarray(gaps, dtype=float)
    if gaps.ndim != 1 or gaps.shape[0] < 2:
        raise DimensionMismatch("至少需要 2 个批次", shape=gaps.shape)
    v_bar = float(np.mean(batch_optima))
    bound = float(np.mean(gaps) + t_multiplier * np.sqrt(np.var(gaps, ddof=1) / gaps.shape[0]))
    abs_gap = abs(v_bar) < NORMALIZE_FLOOR
    b99 = bound if abs_gap else 100.0 * bound / abs(v_bar)
    return UcbReport(gaps=gaps, batch_optima=batch_optima, batch_costs=batch_costs, v_bar=v_bar, b99=b99,
                     abs_gap=abs_gap, t_multiplier=t_multiplier, n_eval=n_eval)


def mrp_ucb(model: TwoStageLp, demand: DemandModel, sampler: CovariateSampler, x, z_hat,
            n_eval: int = DEFAULT_N_EVAL, n_batches: int = DEFAULT_N_BATCHES,
            t_multiplier: float = DEFAULT_T_MULTIPLIER, seed: int = 0, *keys: int,
            batches: Optional[Sequence[FiBatch]] = None, n_jobs: int = 1) -> UcbReport:
    """
    多重复批次法：候选解 ẑ 最优性 gap 的归一化 99% 上置信界.

    每批 v̂^k 为 ẑ 的 SAA 目标值，v̄^k 取 min(批次最优值, v̂^k)，Ĝ^k = v̂^k − v̄^k；
    |Ĝ^k| 在 gap_zero_tol·max(1, |v̄^k|) 以内记为 0。

    Args:
        model: 两阶段模型
        demand: 真实需求模型
        sampler: 协变量采样器（校验 x 的维数）
        x: 原始协变量（不含截距）
        z_hat: 候选第一阶段决策
        n_eval: 每批样本数
        n_batches: 批次数
        t_multiplier: 置信乘子
        seed: 主种子
        keys: 额外的流 key
        batches: 预先计算好的批次（同一重复内各方法共享）
        n_jobs: 批次并行数

    Returns:
        UcbReport

    Raises:
        InfeasibleCandidate: ẑ 不满足第一阶段约束
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (sampler.d_x,):
        raise DimensionMismatch("协变量维数与采样器不匹配", expected=sampler.d_x, actual=x.shape)
    z = check_first_stage(model, z_hat)
    if batches is None:
        batches = fi_batches(model, demand, x, n_eval, n_batches, seed, *keys, n_jobs=n_jobs)
    else:
        n_batches = len(batches)
        n_eval = batches[0].scenarios.m

    zero_tol = get_settings().gap_zero_tol
    costs = np.empty(len(batches))
    optima = np.empty(len(batches))
    for k, batch in enumerate(batches):
        try:
            costs[k] = saa_objective(model, batch.scenarios, z, RecourseBunch(model))
        except SolverError as e:
            raise type(e)(f"候选解批次求值失败: {e.message}", batch=k, **e.context) from e
        optima[k] = min(batch.optimum, costs[k])
    gaps = costs - optima
    gaps[np.abs(gaps) <= zero_tol * np.maximum(1.0, np.abs(optima))] = 0.0
    report = ucb_from_gaps(gaps, optima, costs, t_multiplier, n_eval)
    logger.debug(f"认证完成: batches={n_batches}, v_bar={report.v_bar:.6g}, b99={report.b99:.4g}")
    return report


# ==================== 实验扫描 ====================

class _Replication(NamedTuple):
    """一个重复内各方法共享的数据."""

    index: int
    covariates: np.ndarray
    demands: np.ndarray
    query: np.ndarray
    cv_seed: int


def _draw_replication(bench: Benchmark, config: ExperimentConfig, r: int) -> _Replication:
    seed = config.experiment.master_seed
    n_max = max(config.experiment.n_grid)
    covariates = sample_covariates(bench.sampler, n_max, r)
    return _Replication(
        index=r,
        covariates=covariates,
        demands=simulate_demand(bench.demand, covariates, seed, r),
        query=sample_covariates(bench.sampler, 1, r, Stream.QUERY)[0],
        cv_seed=derive_seed(seed, Stream.CV_FOLDS, r),
    )


def _error_row(method: str, n: int, r: int, error: Exception) -> dict:
    return {"method": method, "n": n, "replication": r, "b99_percent": np.nan, "gap_mean": np.nan,
            "gap_std": np.nan, "v_bar": np.nan, "solve_ms": 0.0, "status": f"error:{type(error).__name__}"}


def _run_cell(bench: Benchmark, config: ExperimentConfig, rep: _Replication, n: int, method_name: str,
              batches: Sequence[FiBatch]) -> dict:
    data = Dataset.with_intercept(rep.covariates[:n], rep.demands[:n])
    x = np.concatenate([[1.0], rep.query])
    ctx = MethodContext(
        regression=config.regression,
        support=SupportBox.nonnegative(bench.demand.d_y),
        apply_projection=config.experiment.project_for(method_name),
        cv_seed=rep.cv_seed,
    )
    try:
        start = time.perf_counter()
        scenarios = get_method(method_name).build(data, x, ctx)
        result = solve_saa(bench.model, scenarios, config.solver)
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        report = mrp_ucb(bench.model, bench.demand, bench.sampler, rep.query, result.z_star,
                         t_multiplier=config.evaluation.t_multiplier, batches=batches)
    except CovSaaError as e:
        logger.warning(f"实验单元失败: {e}")
        return _error_row(method_name, n, rep.index, e)
    except UNTYPED_CELL_ERRORS as e:
        logger.warning(f"实验单元异常: {type(e).__name__}: {e}", exc_info=True)
        return _error_row(method_name, n, rep.index, e)
    return {
        "method": method_name,
        "n": n,
        "replication": rep.index,
        "b99_percent": report.b99,
        "gap_mean": report.gap_mean,
        "gap_std": report.gap_std,
        "v_bar": report.v_bar,
        "solve_ms": elapsed_ms if config.experiment.record_timing else 0.0,
        "status": "abs_gap" if report.abs_gap else "ok",
    }


def _run_replication(bench: Benchmark, config: ExperimentConfig, r: int) -> list[dict]:
    experiment, evaluation = config.experiment, config.evaluation
    with run_tag(rep=r):
        rep = _draw_replication(bench, config, r)
        try:
            batches = fi_batches(bench.model, bench.demand, rep.query, evaluation.n_eval, evaluation.n_batches,
                                 experiment.master_seed, r)
        except (CovSaaError, *UNTYPED_CELL_ERRORS) as e:
            logger.warning(f"全信息批次失败，本次重复全部记为错误: {e}")
            return [_error_row(m, n, r, e) for n in experiment.n_grid for m in experiment.methods]

    rows = []
    for n in experiment.n_grid:
        for method_name in experiment.methods:
            with run_tag(rep=r, n=n, method=method_name):
                rows.append(_run_cell(bench, config, rep, n, method_name, batches))
    logger.info(f"重复 {r} 完成: cells={len(rows)}")
    return rows


def run_replications(config: ExperimentConfig, n_jobs: Optional[int] = None,
                     bench: Optional[Benchmark] = None) -> pd.DataFrame:
    """
    多重复实验扫描.

    每个重复由 (master_seed, r) 派生训练数据、查询点 x 与全信息批次；同一重复内
    x 与批次被所有方法和样本量共享。单元失败记为 ``error:<异常名>``，不中断扫描。

    Args:
        config: 实验配置
        n_jobs: 并行重复数，默认取配置
        bench: 预先生成的基准算例，默认按配置生成

    Returns:
        结果表，列见 RESULT_COLUMNS，按 (replication, n, method) 顺序
    """
    n_jobs = n_jobs or config.experiment.threads or get_settings().threads
    bench = bench or build_benchmark(config)
    experiment = config.experiment
    logger.info(f"开始实验扫描: methods={experiment.methods}, n_grid={experiment.n_grid}, "
                f"replications={experiment.replications}, threads={n_jobs}")
    per_rep = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_run_replication)(bench, config, r) for r in range(experiment.replications)
    )
    table = pd.DataFrame([row for rows in per_rep for row in rows], columns=RESULT_COLUMNS)
    failed = int((~table["status"].isin(["ok", "abs_gap"])).sum())
    logger.info(f"实验扫描完成: rows={len(table)}, failed={failed}")
    return table


# ==================== 汇总 ====================

def percentiles(values) -> Percentiles:
    """
    线性插值分位数 p5/p25/p50/p75/p95.

    Raises:
        EmptyInput: 输入为空
    """
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise EmptyInput("分位数输入为空")
    p5, p25, p50, p75, p95 = np.percentile(values, PERCENTILE_LEVELS, method="linear")
    return Percentiles(p5=p5, p25=p25, p50=p50, p75=p75, p95=p95, count=values.size)


def summarize(table: pd.DataFrame) -> pd.DataFrame:
    """按 (method, n) 汇总 status 为 ok 的 b99 分位数，组按首次出现的顺序排列."""
    missing = [c for c in ("method", "n", "b99_percent", "status") if c not in table.columns]
    if missing:
        raise EmptyInput("结果表缺少列", missing=missing)
    ok = table[table["status"] == "ok"]
    rows = []
    for (method, n), group in ok.groupby(["method", "n"], sort=False):
        stats = percentiles(group["b99_percent"].to_numpy())
        rows.append({"method": method, "n": int(n), **stats.model_dump()})
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
