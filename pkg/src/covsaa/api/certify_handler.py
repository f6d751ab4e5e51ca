"""
@File       : certify_handler.py
@Description: certify 子命令处理器：对给定 (x, ẑ) 计算最优性 gap 的 99% 上置信界

@Time       : 2026/01/16 11:30
@Author     : hcy18
"""
from pathlib import Path
from typing import Optional, Union

from covsaa.errors import CovSaaError
from covsaa.schemas.experiment_schema import DEFAULT_N_BATCHES, DEFAULT_N_EVAL, DEFAULT_T_MULTIPLIER
from covsaa.schemas.result_context import CommandResult
from covsaa.services.evaluation_service import mrp_ucb
from covsaa.store.csv_store import write_report_gaps
from covsaa.store.instance_store import read_demand, read_two_stage, read_vector
from covsaa.utils.logger import app_logger as logger

PathLike = Union[str, Path]


def cmd_certify(instance_path: PathLike, demand_path: PathLike, z_path: PathLike, x_path: PathLike,
                n_eval: int = DEFAULT_N_EVAL, n_batches: int = DEFAULT_N_BATCHES,
                t_multiplier: float = DEFAULT_T_MULTIPLIER, seed: int = 0, threads: int = 1,
                out_csv: Optional[PathLike] = None) -> CommandResult:
    """
    认证候选解.

    Args:
        instance_path: 实例文件（含两阶段数据块）
        demand_path: 需求模型文件
        z_path: 候选第一阶段决策 ẑ
        x_path: 原始协变量 x（不含截距）
        n_eval: 每批样本数
        n_batches: 批次数
        t_multiplier: 置信乘子
        seed: 评估种子
        threads: 批次并行数
        out_csv: 逐批次明细 CSV，None 表示不写

    Returns:
        CommandResult，data 含 b99 与逐批次 gap
    """
    try:
        model = read_two_stage(instance_path)
        demand, sampler = read_demand(demand_path)
        z_hat = read_vector(z_path)
        x = read_vector(x_path)
        logger.info(f"开始认证: batches={n_batches}, n_eval={n_eval}, t={t_multiplier}, seed={seed}")
        report = mrp_ucb(model, demand, sampler, x, z_hat, n_eval, n_batches, t_multiplier, seed, n_jobs=threads)
        extra = {}
        if out_csv is not None:
            extra["gapsCsv"] = str(write_report_gaps(report.gaps, report.batch_optima, report.batch_costs, out_csv))
        logger.info(f"认证完成: b99={report.b99:.6g}{' (绝对值)' if report.abs_gap else '%'}")
        return CommandResult.ok(
            data={
                "b99": report.b99,
                "absGap": report.abs_gap,
                "vBar": report.v_bar,
                "gapMean": report.gap_mean,
                "gapStd": report.gap_std,
                "gaps": report.gaps.tolist(),
                "nEval": n_eval,
                "nBatches": report.n_batches,
                "tMultiplier": report.t_multiplier,
            },
            message="认证完成",
            **extra,
        )
    except CovSaaError as e:
        logger.error(f"certify 失败: {e}", exc_info=True)
        return CommandResult.from_error(e)
    except OSError as e:
        logger.error(f"certify 执行异常: {e}", exc_info=True)
        return CommandResult.fail(message=f"certify 执行异常: {e}")
