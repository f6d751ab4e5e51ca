"""
@File       : csv_store.py
@Description: CSV 读写：数据集、情景集合、实验结果表与汇总表.

@Time       : 2026/01/14 16:02
@Author     : hcy18
"""
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from covsaa.errors import ConfigError
from covsaa.schemas.regression_schema import Dataset
from covsaa.schemas.scenario_schema import ScenarioSet
from covsaa.services.evaluation_service import RESULT_COLUMNS, SUMMARY_COLUMNS
from covsaa.utils.logger import app_logger as logger

PathLike = Union[str, Path]


def _read(path: PathLike) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"文件不存在: {path}")
    try:
        return pd.read_csv(path, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ConfigError(f"CSV 解析失败: {path}", reason=str(e)) from e


def _write(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # 默认浮点格式即最短往返表示，重复写出逐位一致
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def _columns(frame: pd.DataFrame, prefix: str) -> list[str]:
    count = sum(1 for c in frame.columns if c.startswith(prefix) and c[len(prefix):].isdigit())
    expected = [f"{prefix}{i}" for i in range(1, count + 1)]
    if [c for c in frame.columns if c in expected] != expected:
        raise ConfigError(f"CSV 列 {prefix}1..{prefix}{count} 不完整或乱序")
    return expected


# ==================== 数据集 ====================

def write_dataset(data: Dataset, path: PathLike) -> Path:
    """表头 x1..x_dx, y1..y_dy；截距列（若有）按 x1 写出."""
    frame = pd.DataFrame(np.hstack([data.covariates, data.responses]),
                         columns=[f"x{i}" for i in range(1, data.d_x + 1)]
                         + [f"y{j}" for j in range(1, data.d_y + 1)])
    return _write(frame, path)


def read_dataset(path: PathLike, intercept_mode: bool = True) -> Dataset:
    frame = _read(path)
    x_cols, y_cols = _columns(frame, "x"), _columns(frame, "y")
    if not x_cols or not y_cols:
        raise ConfigError(f"数据集 CSV 需要 x 与 y 列: {path}")
    return Dataset.from_arrays(frame[x_cols].to_numpy(dtype=float), frame[y_cols].to_numpy(dtype=float),
                               intercept_mode=intercept_mode)


# ==================== 情景集合 ====================

def write_scenarios(scenarios: ScenarioSet, path: PathLike) -> Path:
    frame = pd.DataFrame(scenarios.points, columns=[f"y{j}" for j in range(1, scenarios.d_y + 1)])
    frame.insert(0, "w", scenarios.weights)
    return _write(frame, path)


def read_scenarios(path: PathLike) -> ScenarioSet:
    frame = _read(path)
    if "w" not in frame.columns:
        raise ConfigError(f"情景 CSV 缺少 w 列: {path}")
    return ScenarioSet.from_arrays(frame[_columns(frame, "y")].to_numpy(dtype=float),
                                   frame["w"].to_numpy(dtype=float))


# ==================== 实验结果 ====================

def write_results(table: pd.DataFrame, path: PathLike) -> Path:
    path = _write(table[RESULT_COLUMNS], path)
    logger.info(f"结果表已写出: {path}, rows={len(table)}")
    return path


def read_results(path: PathLike) -> pd.DataFrame:
    frame = _read(path)
    missing = [c for c in RESULT_COLUMNS if c not in frame.columns]
    if missing:
        raise ConfigError(f"结果 CSV 缺少列: {missing}", path=str(path))
    return frame[RESULT_COLUMNS]


def write_summary(summary: pd.DataFrame, path: PathLike) -> Path:
    path = _write(summary[SUMMARY_COLUMNS], path)
    logger.info(f"汇总表已写出: {path}, groups={len(summary)}")
    return path


def write_report_gaps(gaps: np.ndarray, batch_optima: np.ndarray, batch_costs: np.ndarray, path: PathLike) -> Path:
    """认证的逐批次明细：batch, gap, v_bar_k, v_hat_k."""
    frame = pd.DataFrame({
        "batch": np.arange(len(gaps)),
        "gap": gaps,
        "v_bar_k": batch_optima,
        "v_hat_k": batch_costs,
    })
    return _write(frame, path)
