"""
@File       : errors.py
@Description: 异常体系. 每个异常携带 CLI 退出码.

@Time       : 2026/01/06 21:10
@Author     : hcy18
"""
from typing import Any, Optional

# CLI 退出码
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_INFEASIBLE = 4


class CovSaaError(Exception):
    """所有业务异常的基类."""

    exit_code: int = EXIT_CONFIG
    code: str = "COV0000"

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context = context

    def __str__(self) -> str:
        if not self.context:
            return self.message
        extra = ", ".join(f"{k}={v}" for k, v in self.context.items())
        return f"{self.message} ({extra})"


# ==================== 回归 ====================

class DimensionMismatch(CovSaaError, ValueError):
    code = "REG0001"


class RankDeficient(CovSaaError, ValueError):
    code = "REG0002"


class DegenerateDesign(CovSaaError, ValueError):
    code = "REG0003"


class KOutOfRange(CovSaaError, ValueError):
    code = "REG0004"


class NonpositiveDelta(CovSaaError, ValueError):
    code = "REG0005"


class DomainError(CovSaaError, ValueError):
    code = "REG0006"


class LeverageOne(CovSaaError, ValueError):
    code = "REG0007"


class IndexOutOfRange(CovSaaError, IndexError):
    code = "REG0008"


class EmptyGrid(CovSaaError, ValueError):
    code = "REG0009"


class TrueModelUnavailable(CovSaaError):
    code = "SCN0001"


# ==================== 求解器 ====================

class SolverError(CovSaaError):
    exit_code = EXIT_SOLVER
    code = "LP0000"


class NumericalBreakdown(SolverError):
    code = "LP0001"


class RecourseInfeasible(SolverError):
    code = "TS0001"


class RecourseUnbounded(SolverError):
    code = "TS0002"


class SizeCapExceeded(SolverError):
    code = "TS0003"


class IterationLimit(SolverError):
    """L-shaped 达到迭代上限. ``result`` 为当前最好的可行解（含 gap）."""

    code = "TS0004"

    def __init__(self, message: str, result: Optional[Any] = None, **context: Any):
        super().__init__(message, **context)
        self.result = result


class InfeasibleCandidate(CovSaaError):
    exit_code = EXIT_INFEASIBLE
    code = "EVL0001"


# ==================== 配置 / 输入 ====================

class BadConfig(CovSaaError, ValueError):
    code = "CFG0001"


class ConfigError(CovSaaError):
    code = "CFG0002"


class EmptyInput(CovSaaError, ValueError):
    code = "EVL0002"
