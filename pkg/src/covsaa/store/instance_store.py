"""
@File       : instance_store.py
@Description: 纯文本算例格式：YAML 元数据块 + 稠密数值块. 用于实例、需求模型与 z / x 向量文件.

格式::

    # covsaa instance v1
    @metadata
    kind: resource_alloc_instance
    seed: 12345
    @end
    @block c_z 5            向量：名字 + 长度，下一行为空格分隔的数值
    @block mu 5 8           矩阵：名字 + 行数 + 列数，随后逐行给出

浮点数按 repr 写出（最短往返表示），读回逐位一致。

@Time       : 2026/01/15 09:40
@Author     : hcy18
"""
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import yaml
from pydantic import ValidationError

from covsaa.errors import ConfigError
from covsaa.schemas.bench_schema import CovariateSampler, DemandModel, ResourceAllocInstance
from covsaa.schemas.lp_schema import LpProblem
from covsaa.schemas.twostage_schema import TwoStageLp
from covsaa.utils.logger import app_logger as logger

PathLike = Union[str, Path]
FORMAT_VERSION = 1

INSTANCE_KIND = "resource_alloc_instance"
DEMAND_KIND = "demand_model"
VECTOR_KIND = "vector"


# ==================== 通用块格式 ====================

def _format_row(values: np.ndarray) -> str:
    if values.dtype.kind in "iu":
        return " ".join(str(int(v)) for v in values)
    return " ".join(repr(float(v)) for v in values)


def write_blocks(path: PathLike, metadata: dict[str, Any], blocks: dict[str, np.ndarray]) -> Path:
    """
    写出元数据与数值块.

    Args:
        path: 目标文件
        metadata: 元数据（YAML 可序列化）
        blocks: 名字 → 一维或二维数组，按插入顺序写出

    Returns:
        写出的路径
    """
    lines = [f"# covsaa {metadata.get('kind', 'data')} v{FORMAT_VERSION}", "@metadata"]
    lines += yaml.safe_dump(metadata, sort_keys=False, allow_unicode=True).rstrip("\n").split("\n")
    lines.append("@end")
    for name, value in blocks.items():
        array = np.asarray(value)
        if array.ndim == 1:
            lines.append(f"@block {name} {array.shape[0]}")
            if array.size:
                lines.append(_format_row(array))
        elif array.ndim == 2:
            lines.append(f"@block {name} {array.shape[0]} {array.shape[1]}")
            if array.size:
                lines += [_format_row(row) for row in array]
        else:
            raise ConfigError(f"块 {name} 必须是一维或二维数组", ndim=array.ndim)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _parse_row(line: str, expected: int, name: str, number: int) -> np.ndarray:
    tokens = line.split()
    if len(tokens) != expected:
        raise ConfigError(f"块 {name} 第 {number} 行应有 {expected} 个数值，实际 {len(tokens)}")
    try:
        return np.array([float(t) for t in tokens])
    except ValueError as e:
        raise ConfigError(f"块 {name} 第 {number} 行含非数值", reason=str(e)) from e


def read_blocks(path: PathLike) -> tuple[dict[str, Any], dict[str, np.ndarray]]:
    """
    读取元数据与数值块.

    Returns:
        (metadata, blocks)

    Raises:
        ConfigError: 文件不存在或格式错误
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"文件不存在: {path}")
    # 元数据保留缩进（YAML 嵌套），数值行去掉首尾空白
    lines = [line.rstrip() for line in path.read_text(encoding="utf-8").splitlines()]
    lines = [line for line in lines if line.strip() and not line.lstrip().startswith("#")]

    metadata: dict[str, Any] = {}
    blocks: dict[str, np.ndarray] = {}
    pos = 0
    while pos < len(lines):
        header = lines[pos].strip()
        pos += 1
        if header == "@metadata":
            end = next((i for i in range(pos, len(lines)) if lines[i].strip() == "@end"), -1)
            if end < 0:
                raise ConfigError(f"元数据块缺少 @end: {path}")
            try:
                metadata = yaml.safe_load("\n".join(lines[pos:end])) or {}
            except yaml.YAMLError as e:
                raise ConfigError(f"元数据块不是合法 YAML: {path}", reason=str(e)) from e
            pos = end + 1
            continue
        parts = header.split()
        if not parts or parts[0] != "@block" or len(parts) not in (3, 4):
            raise ConfigError(f"无法识别的行: {header!r}", path=str(path))
        name = parts[1]
        try:
            dims = [int(v) for v in parts[2:]]
        except ValueError as e:
            raise ConfigError(f"块 {name} 的维数不是整数", path=str(path)) from e
        rows, cols = (1, dims[0]) if len(dims) == 1 else (dims[0], dims[1])
        if rows < 0 or cols < 0:
            raise ConfigError(f"块 {name} 的维数为负", path=str(path))
        # 空块不写数据行
        lines_needed = rows if rows * cols else 0
        if pos + lines_needed > len(lines):
            raise ConfigError(f"块 {name} 数据行不足", path=str(path))
        data = np.zeros((rows, cols))
        for r in range(lines_needed):
            data[r] = _parse_row(lines[pos + r].strip(), cols, name, r)
        pos += lines_needed
        blocks[name] = data[0] if len(dims) == 1 else data
    return metadata, blocks


def _require(blocks: dict[str, np.ndarray], path: PathLike, *names: str) -> None:
    missing = [n for n in names if n not in blocks]
    if missing:
        raise ConfigError(f"文件缺少数值块: {missing}", path=str(path))


def _check_kind(metadata: dict[str, Any], kind: str, path: PathLike) -> None:
    if metadata.get("kind") != kind:
        raise ConfigError(f"文件类型应为 {kind}，实际 {metadata.get('kind')}", path=str(path))


# ==================== 实例 ====================

def write_instance(instance: ResourceAllocInstance, model: TwoStageLp, path: PathLike,
                   extra: Optional[dict[str, Any]] = None) -> Path:
    """
    写出资源分配实例及其两阶段 LP 数据块.

    Args:
        instance: 实例参数
        model: 由实例构造的两阶段 LP
        path: 目标文件
        extra: 附加元数据（种子、配置等）

    Returns:
        写出的路径
    """
    stage = model.first_stage
    metadata = {
        "kind": INSTANCE_KIND,
        "format_version": FORMAT_VERSION,
        "n_resources": instance.n_resources,
        "n_customers": instance.n_customers,
        "z_max": instance.z_max,
        "scheme": instance.scheme,
        **(extra or {}),
    }
    blocks = {
        "c_z": instance.c_z,
        "rho": instance.rho,
        "mu": instance.mu,
        "q_w": instance.q_w,
        "tau": instance.tau,
        # 两阶段 LP
        "first_stage_lower": stage.lower,
        "first_stage_upper": stage.upper,
        "first_stage_rows": stage.eq_matrix,
        "first_stage_rhs": stage.eq_rhs,
        "W": model.W,
        "T": model.T,
        "c_v": model.c_v,
        "h_offset": model.h_offset,
        "h_matrix": model.h_matrix,
    }
    path = write_blocks(path, metadata, blocks)
    logger.info(f"实例已写出: {path}")
    return path


def read_instance(path: PathLike) -> ResourceAllocInstance:
    metadata, blocks = read_blocks(path)
    _check_kind(metadata, INSTANCE_KIND, path)
    _require(blocks, path, "c_z", "rho", "mu", "q_w", "tau")
    try:
        return ResourceAllocInstance(
            n_resources=metadata["n_resources"],
            n_customers=metadata["n_customers"],
            c_z=blocks["c_z"],
            rho=blocks["rho"],
            mu=blocks["mu"],
            q_w=blocks["q_w"],
            tau=blocks["tau"],
            z_max=metadata.get("z_max", 1e4),
            scheme=metadata.get("scheme", "uniform-default"),
        )
    except (KeyError, ValidationError) as e:
        raise ConfigError(f"实例文件内容无效: {path}", reason=str(e)) from e


def read_two_stage(path: PathLike) -> TwoStageLp:
    """由实例文件中的两阶段数据块直接构造 TwoStageLp."""
    _, blocks = read_blocks(path)
    _require(blocks, path, "c_z", "first_stage_lower", "first_stage_upper", "first_stage_rows",
             "first_stage_rhs", "W", "T", "c_v", "h_offset", "h_matrix")
    c_z = blocks["c_z"]
    lower = blocks["first_stage_lower"]
    try:
        first_stage = LpProblem(
            objective=np.concatenate([c_z, np.zeros(lower.shape[0] - c_z.shape[0])]),
            eq_matrix=blocks["first_stage_rows"],
            eq_rhs=blocks["first_stage_rhs"],
            lower=lower,
            upper=blocks["first_stage_upper"],
        )
        return TwoStageLp(c_z=c_z, first_stage=first_stage, W=blocks["W"], T=blocks["T"], c_v=blocks["c_v"],
                          h_offset=blocks["h_offset"], h_matrix=blocks["h_matrix"])
    except (ValueError, ValidationError) as e:
        raise ConfigError(f"两阶段数据块无效: {path}", reason=str(e)) from e


# ==================== 需求模型 ====================

def write_demand(demand: DemandModel, sampler: CovariateSampler, path: PathLike,
                 extra: Optional[dict[str, Any]] = None) -> Path:
    """写出需求模型与协变量采样器（相关矩阵 + 种子）."""
    metadata = {
        "kind": DEMAND_KIND,
        "format_version": FORMAT_VERSION,
        "d_x": demand.d_x,
        "n_customers": demand.d_y,
        "degree": demand.degree,
        "sigma": demand.sigma,
        "omega": demand.omega,
        "covariate_seed": sampler.seed,
        **(extra or {}),
    }
    blocks = {
        "phi": demand.phi,
        "zeta": demand.zeta,
        "active": demand.active,
        "pi_star": demand.pi_star,
        "s": demand.s,
        "correlation": sampler.correlation,
    }
    path = write_blocks(path, metadata, blocks)
    logger.info(f"需求模型已写出: {path}")
    return path


def read_demand(path: PathLike) -> tuple[DemandModel, CovariateSampler]:
    metadata, blocks = read_blocks(path)
    _check_kind(metadata, DEMAND_KIND, path)
    _require(blocks, path, "phi", "zeta", "active", "pi_star", "s", "correlation")
    try:
        demand = DemandModel(
            d_x=metadata["d_x"],
            phi=blocks["phi"],
            zeta=blocks["zeta"],
            active=blocks["active"].astype(int),
            degree=metadata["degree"],
            sigma=metadata["sigma"],
            omega=metadata["omega"],
            pi_star=blocks["pi_star"],
            s=blocks["s"],
        )
        sampler = CovariateSampler(d_x=metadata["d_x"], correlation=blocks["correlation"],
                                   seed=metadata["covariate_seed"])
    except (KeyError, ValidationError) as e:
        raise ConfigError(f"需求模型文件内容无效: {path}", reason=str(e)) from e
    return demand, sampler


# ==================== 向量 ====================

def write_vector(values, path: PathLike, name: str = "values") -> Path:
    return write_blocks(path, {"kind": VECTOR_KIND, "name": name}, {name: np.asarray(values, dtype=float)})


def read_vector(path: PathLike) -> np.ndarray:
    """读取向量文件；也接受只含空格 / 换行分隔数值的纯文本."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"文件不存在: {path}")
    text = path.read_text(encoding="utf-8")
    if "@block" in text:
        _, blocks = read_blocks(path)
        if len(blocks) != 1:
            raise ConfigError(f"向量文件应只含一个数值块: {path}", blocks=list(blocks))
        return np.asarray(next(iter(blocks.values())), dtype=float).ravel()
    try:
        return np.array([float(t) for t in text.split()])
    except ValueError as e:
        raise ConfigError(f"向量文件含非数值: {path}") from e
