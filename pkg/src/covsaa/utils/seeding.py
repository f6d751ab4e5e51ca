"""
@File       : seeding.py
@Description: 命名随机数流. 每个用途一条独立的流，调度顺序不影响结果.

@Time       : 2026/01/07 09:12
@Author     : hcy18
"""
from enum import IntEnum

import numpy as np


class Stream(IntEnum):
    """随机数用途. 数值写进 spawn_key，改动会改变所有实验结果."""

    INSTANCE = 0
    DEMAND_MODEL = 1
    COVARIATES = 2
    ERRORS = 3
    EVALUATION = 4
    QUERY = 5
    CV_FOLDS = 6
    CORRELATION = 7
    CALIBRATION = 8


def seed_sequence(seed: int, *keys: int) -> np.random.SeedSequence:
    """由主种子和若干整数 key 构造 SeedSequence."""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))


def stream(seed: int, *keys: int) -> np.random.Generator:
    """
    获取命名随机数流.

    Args:
        seed: 主种子
        keys: 路径 key，例如 (replication, batch, Stream.EVALUATION)

    Returns:
        独立的 numpy Generator
    """
    return np.random.default_rng(seed_sequence(seed, *keys))


def derive_seed(seed: int, *keys: int) -> int:
    """派生一个 63 位整数种子（写入元数据或传给下游）."""
    state = seed_sequence(seed, *keys).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1])) & ((1 << 63) - 1)
