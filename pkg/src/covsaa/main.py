"""
@File       : main.py
@Description: 命令行入口：gen / run / certify / summarize

@Time       : 2026/01/16 14:20
@Author     : hcy18
"""
import argparse
import logging
import sys
from typing import Optional, Sequence

from covsaa.api.certify_handler import cmd_certify
from covsaa.api.experiment_handler import cmd_gen, cmd_run, cmd_summarize
from covsaa.config.settings import get_settings
from covsaa.schemas.experiment_schema import DEFAULT_N_BATCHES, DEFAULT_N_EVAL, DEFAULT_T_MULTIPLIER
from covsaa.schemas.result_context import CommandResult
from covsaa.utils.logger import setup_logging, app_logger as logger


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"必须为正整数: {value}")
    return number


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covsaa",
        description="带协变量的两阶段随机规划：残差 SAA 实验与候选解认证",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="生成实例与需求模型文件")
    gen.add_argument("--config", help="YAML 运行配置，缺省为默认配置")
    gen.add_argument("--out", help="输出目录，覆盖 output.dir")
    gen.add_argument("--seed", type=int, help="覆盖 experiment.master_seed")

    run = sub.add_parser("run", help="运行实验扫描并写出结果与汇总 CSV")
    run.add_argument("--config", help="YAML 运行配置")
    run.add_argument("--out", help="结果 CSV 路径；汇总与元数据写在同一目录")
    run.add_argument("--seed", type=int, help="覆盖 experiment.master_seed")
    run.add_argument("--threads", type=_positive_int, help="并行 worker 上限")
    run.add_argument("--no-project", action="store_true", help="关闭情景到支撑集的投影")

    certify = sub.add_parser("certify", help="计算候选解最优性 gap 的 99% 上置信界")
    certify.add_argument("--instance", required=True, help="实例文件")
    certify.add_argument("--demand", required=True, help="需求模型文件")
    certify.add_argument("--z", required=True, help="候选第一阶段决策文件")
    certify.add_argument("--x", required=True, help="协变量文件（不含截距）")
    certify.add_argument("--n-eval", type=_positive_int, default=DEFAULT_N_EVAL)
    certify.add_argument("--n-batches", type=int, default=DEFAULT_N_BATCHES)
    certify.add_argument("--t-multiplier", type=float, default=DEFAULT_T_MULTIPLIER)
    certify.add_argument("--seed", type=int, default=0)
    certify.add_argument("--threads", type=_positive_int)
    certify.add_argument("--out", help="逐批次明细 CSV")

    summarize = sub.add_parser("summarize", help="由结果 CSV 生成分位数汇总")
    summarize.add_argument("--results", required=True, help="结果 CSV")
    summarize.add_argument("--out", help="汇总 CSV 路径")
    return parser


def dispatch(args: argparse.Namespace) -> CommandResult:
    if args.command == "gen":
        return cmd_gen(args.config, args.out, args.seed)
    if args.command == "run":
        return cmd_run(args.config, args.out, args.seed, args.threads, args.no_project)
    if args.command == "certify":
        return cmd_certify(args.instance, args.demand, args.z, args.x, n_eval=args.n_eval,
                           n_batches=args.n_batches, t_multiplier=args.t_multiplier, seed=args.seed,
                           threads=args.threads or get_settings().threads, out_csv=args.out)
    return cmd_summarize(args.results, args.out)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    CLI 主函数：JSON 结果信封打印到标准输出，日志写标准错误.

    Returns:
        进程退出码：0 成功，2 配置错误，3 求解失败，4 候选解不可行
    """
    args = build_parser().parse_args(argv)
    settings = get_settings()
    setup_logging(log_level=getattr(logging, settings.log_level.upper(), logging.INFO), log_dir=settings.log_dir)
    logger.debug(f"命令: {args.command}")

    result = dispatch(args)
    print(result.to_json())
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
