"""
@File       : run_config.py
@Description: 实验运行配置（YAML）的加载、校验与规范化输出.

@Time       : 2026/01/15 14:10
@Author     : hcy18
"""
from pathlib import Path
from typing import Any, Optional, Union

import yaml
from pydantic import Field, ValidationError

from covsaa.errors import ConfigError
from covsaa.schemas.base import StrictModel
from covsaa.schemas.experiment_schema import ExperimentConfig
from covsaa.utils.logger import app_logger as logger

PathLike = Union[str, Path]


class OutputSection(StrictModel):
    """输出路径；相对路径以 dir 为根."""

    dir: str = Field(default="out")
    results_csv: str = Field(default="results.csv")
    summary_csv: str = Field(default="summary.csv")
    instance_file: str = Field(default="instance.txt")
    demand_file: str = Field(default="demand.txt")
    metadata_file: str = Field(default="run_metadata.yaml")

    def path(self, name: str, out_dir: Optional[PathLike] = None) -> Path:
        """拼接输出路径；out_dir 覆盖配置中的 dir."""
        return Path(out_dir if out_dir is not None else self.dir) / getattr(self, name)


class RunConfig(ExperimentConfig):
    """完整运行配置 = 实验配置 + 输出路径."""

    output: OutputSection = Field(default_factory=OutputSection)

    def experiment_config(self) -> ExperimentConfig:
        return ExperimentConfig.model_validate(self.model_dump(exclude={"output"}))


def _format_errors(error: ValidationError) -> str:
    return "; ".join(f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in error.errors())


def parse_run_config(document: Any, source: str = "<memory>") -> RunConfig:
    """
    由已解析的 YAML 文档构造 RunConfig.

    Raises:
        ConfigError: 文档不是映射或校验失败（含未知键）
    """
    if document is None:
        document = {}
    if not isinstance(document, dict):
        raise ConfigError(f"配置文档顶层必须是映射: {source}")
    try:
        return RunConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigError(f"配置校验失败: {_format_errors(e)}", source=source) from e


def load_run_config(path: Optional[PathLike] = None) -> RunConfig:
    """
    加载 YAML 运行配置；path 为 None 时返回全部默认值.

    Args:
        path: 配置文件路径

    Returns:
        RunConfig

    Raises:
        ConfigError: 文件不存在、YAML 语法错误或校验失败
    """
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"配置文件不存在: {path}")
    try:
        with path.open("r", encoding="utf-8") as f:
            document = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"配置文件不是合法 YAML: {path}", reason=str(e)) from e
    config = parse_run_config(document, source=str(path))
    logger.info(f"配置已加载: {path}")
    return config


def with_overrides(config: RunConfig, seed: Optional[int] = None, threads: Optional[int] = None,
                   no_project: bool = False) -> RunConfig:
    """
    应用命令行覆盖项并重新校验.

    Args:
        config: 运行配置
        seed: 覆盖 experiment.master_seed
        threads: 覆盖 experiment.threads
        no_project: 关闭全部方法的情景投影（含 project_overrides）

    Returns:
        新的 RunConfig
    """
    document = config.model_dump()
    experiment = document["experiment"]
    if seed is not None:
        experiment["master_seed"] = seed
    if threads is not None:
        experiment["threads"] = threads
    if no_project:
        experiment["project"] = False
        experiment["project_overrides"] = {}
    return parse_run_config(document, source="<overrides>")


def run_config_document(config: RunConfig) -> dict[str, Any]:
    """规范化后的配置文档（全部字段展开，JSON 兼容类型）."""
    return config.model_dump(mode="json")


def dump_run_config(config: RunConfig, path: Optional[PathLike] = None) -> str:
    """
    输出规范化 YAML；load → dump → load 稳定.

    Args:
        config: 运行配置
        path: 不为 None 时同时写入文件

    Returns:
        YAML 文本
    """
    text = yaml.safe_dump(run_config_document(config), sort_keys=False, allow_unicode=True)
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    return text
