"""
@File       : experiment_handler.py
@Description: gen / run / summarize 子命令处理器

@Time       : 2026/01/16 10:05
@Author     : hcy18
"""
import json
from pathlib import Path
from typing import Any, Optional, Union

import pandas as pd
import yaml

from covsaa.config.run_config import RunConfig, load_run_config, run_config_document, with_overrides
from covsaa.errors import CovSaaError
from covsaa.schemas.result_context import CommandResult
from covsaa.services.bench_service import build_benchmark
from covsaa.services.evaluation_service import run_replications, summarize
from covsaa.store.csv_store import read_results, write_results, write_summary
from covsaa.store.instance_store import write_demand, write_instance
from covsaa.utils.logger import app_logger as logger

PathLike = Union[str, Path]


def _load(config_path: Optional[PathLike], seed: Optional[int], threads: Optional[int],
          no_project: bool) -> RunConfig:
    return with_overrides(load_run_config(config_path), seed=seed, threads=threads, no_project=no_project)


def _seed_metadata(config: RunConfig) -> dict[str, Any]:
    return {
        "master_seed": config.experiment.master_seed,
        "instance_seed": config.instance_seed(),
        "demand_seed": config.demand_seed(),
        "covariate_seed": config.covariate_seed(),
    }


def _records(frame: pd.DataFrame) -> list[dict[str, Any]]:
    # 经 JSON 转成原生 Python 类型
    return json.loads(frame.to_json(orient="records"))


def _unexpected(command: str, error: Exception) -> CommandResult:
    logger.error(f"{command} 执行异常: {error}", exc_info=True)
    return CommandResult.fail(message=f"{command} 执行异常: {error}")


def cmd_gen(config_path: Optional[PathLike] = None, out_dir: Optional[PathLike] = None,
            seed: Optional[int] = None) -> CommandResult:
    """
    生成实例与需求模型文件.

    Args:
        config_path: YAML 配置路径，None 表示默认配置
        out_dir: 输出目录，覆盖 output.dir
        seed: 覆盖主种子

    Returns:
        CommandResult，data 含文件路径与维数
    """
    try:
        config = _load(config_path, seed, None, False)
        logger.info(f"生成算例: config={config_path}, out={out_dir}")
        bench = build_benchmark(config)
        seeds = _seed_metadata(config)
        instance_path = write_instance(bench.instance, bench.model, config.output.path("instance_file", out_dir),
                                       extra={"seeds": seeds, "config": run_config_document(config)})
        demand_path = write_demand(bench.demand, bench.sampler, config.output.path("demand_file", out_dir),
                                   extra={"seeds": seeds})
        return CommandResult.ok(
            data={
                "instanceFile": str(instance_path),
                "demandFile": str(demand_path),
                "nResources": bench.instance.n_resources,
                "nCustomers": bench.instance.n_customers,
                "dX": bench.sampler.d_x,
            },
            message="算例生成成功",
        )
    except CovSaaError as e:
        logger.error(f"gen 失败: {e}", exc_info=True)
        return CommandResult.from_error(e)
    except OSError as e:
        return _unexpected("gen", e)


def cmd_run(config_path: Optional[PathLike] = None, out_csv: Optional[PathLike] = None,
            seed: Optional[int] = None, threads: Optional[int] = None, no_project: bool = False) -> CommandResult:
    """
    运行实验扫描，写出结果表、汇总表与运行元数据.

    单元级错误写入结果表的 status 列，不影响退出码。

    Args:
        config_path: YAML 配置路径
        out_csv: 结果 CSV 路径，覆盖 output；汇总表与元数据写在同一目录
        seed: 覆盖主种子
        threads: 覆盖并行数
        no_project: 关闭情景投影

    Returns:
        CommandResult，data 含行数、失败数与汇总
    """
    try:
        config = _load(config_path, seed, threads, no_project)
        if out_csv is not None:
            out_dir = Path(out_csv).parent
            results_path = Path(out_csv)
        else:
            out_dir = Path(config.output.dir)
            results_path = config.output.path("results_csv")
        table = run_replications(config.experiment_config())
        write_results(table, results_path)
        summary = summarize(table)
        summary_path = write_summary(summary, config.output.path("summary_csv", out_dir))

        metadata_path = config.output.path("metadata_file", out_dir)
        metadata = {
            "seeds": _seed_metadata(config),
            # 同一重复内所有方法与样本量共享查询点 x 与全信息批次
            "shared_query_per_replication": True,
            "shared_evaluation_batches": True,
            "config": run_config_document(config),
        }
        metadata_path.write_text(yaml.safe_dump(metadata, sort_keys=False, allow_unicode=True), encoding="utf-8")

        failed = int((~table["status"].isin(["ok", "abs_gap"])).sum())
        return CommandResult.ok(
            data={
                "rows": len(table),
                "failed": failed,
                "summary": _records(summary),
            },
            message="实验完成" if failed == 0 else f"实验完成，{failed} 个单元失败",
            resultsCsv=str(results_path),
            summaryCsv=str(summary_path),
            metadataFile=str(metadata_path),
        )
    except CovSaaError as e:
        logger.error(f"run 失败: {e}", exc_info=True)
        return CommandResult.from_error(e)
    except OSError as e:
        return _unexpected("run", e)


def cmd_summarize(results_path: PathLike, out_csv: Optional[PathLike] = None) -> CommandResult:
    """
    读取结果表并写出分位数汇总.

    Args:
        results_path: 结果 CSV
        out_csv: 汇总 CSV，默认与结果表同目录的 summary.csv

    Returns:
        CommandResult，data 为汇总记录
    """
    try:
        table = read_results(results_path)
        summary = summarize(table)
        out_csv = Path(out_csv) if out_csv is not None else Path(results_path).with_name("summary.csv")
        write_summary(summary, out_csv)
        return CommandResult.ok(data=_records(summary), message="汇总完成", summaryCsv=str(out_csv))
    except CovSaaError as e:
        logger.error(f"summarize 失败: {e}", exc_info=True)
        return CommandResult.from_error(e)
    except OSError as e:
        return _unexpected("summarize", e)
