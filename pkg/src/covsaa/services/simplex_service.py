"""
@File       : simplex_service.py
@Description: 稠密有界变量两阶段修正单纯形法.

    - 显式维护 B⁻¹，换基时做秩一（eta）更新，每 refactor_interval 次换基重新求逆并检查条件数
    - Dantzig 定价，并列取最小下标；连续 3·(m+p) 次退化换基后切换到 Bland 规则
    - 比值检验包含入基变量自身的界翻转
    - 第一阶段使用带符号的人工变量，结束后将人工变量驱出基或固定为 0

@Time       : 2026/01/09 11:20
@Author     : hcy18
"""
from pathlib import Path
from typing import Literal, Optional, Sequence, Union

import numpy as np

from covsaa.config.settings import Settings, get_settings
from covsaa.errors import NumericalBreakdown
from covsaa.schemas.lp_schema import LpProblem, LpSolution
from covsaa.utils.logger import app_logger as logger

# 非基变量状态
LOWER, UPPER, FREE, BASIC = 0, 1, 2, 3

# 退化步长判定
DEGENERATE_STEP = 1e-12
# 驱出人工变量时主元的最小绝对值
DRIVE_OUT_PIVOT = 1e-9


class _RevisedSimplex:
    """单次求解的可变状态. 不跨调用共享."""

    def __init__(self, a: np.ndarray, b: np.ndarray, lower: np.ndarray, upper: np.ndarray, settings: Settings):
        self.a = a
        self.b = b
        self.lower = lower.copy()
        self.upper = upper.copy()
        self.m, self.n = a.shape
        self.feas_tol = settings.lp_feasibility_tol
        self.opt_tol = settings.lp_optimality_tol
        self.pivot_tol = settings.lp_pivot_tol
        self.refactor_interval = settings.lp_refactor_interval
        self.condition_limit = settings.lp_condition_limit
        self.max_iter = 50 * (self.m + self.n) + 1000

        self.x = np.zeros(self.n)
        self.status = np.full(self.n, LOWER, dtype=np.int64)
        self.basis = np.zeros(self.m, dtype=np.int64)
        self.binv = np.eye(self.m)
        self.iterations = 0
        self.since_refactor = 0
        for j in range(self.n):
            self.place_nonbasic(j)

    def place_nonbasic(self, j: int) -> None:
        """非基变量放在有限下界，否则有限上界，自由变量取 0."""
        if np.isfinite(self.lower[j]):
            self.x[j], self.status[j] = self.lower[j], LOWER
        elif np.isfinite(self.upper[j]):
            self.x[j], self.status[j] = self.upper[j], UPPER
        else:
            self.x[j], self.status[j] = 0.0, FREE

    def set_basis(self, basis: np.ndarray) -> None:
        self.basis = np.asarray(basis, dtype=np.int64).copy()
        self.status[self.basis] = BASIC
        self.refactor()

    def refactor(self) -> None:
        """重新求 B⁻¹ 并由非基变量值重算 x_B."""
        if self.m == 0:
            return
        matrix = self.a[:, self.basis]
        cond = np.linalg.cond(matrix)
        if not np.isfinite(cond) or cond > self.condition_limit:
            raise NumericalBreakdown("基矩阵条件数超限", cond=f"{cond:.3e}", iterations=self.iterations)
        self.binv = np.linalg.inv(matrix)
        nonbasic = self.status != BASIC
        self.x[self.basis] = self.binv @ (self.b - self.a[:, nonbasic] @ self.x[nonbasic])
        self.since_refactor = 0

    # ==================== 单次迭代 ====================

    def _price(self, reduced: np.ndarray, bland: bool) -> tuple[int, int]:
        movable = self.upper > self.lower
        can_up = ((self.status == LOWER) | (self.status == FREE)) & movable & (reduced < -self.opt_tol)
        can_down = ((self.status == UPPER) | (self.status == FREE)) & movable & (reduced > self.opt_tol)
        eligible = can_up | can_down
        if not np.any(eligible):
            return -1, 0
        if bland:
            j = int(np.argmax(eligible))
        else:
            j = int(np.argmax(np.where(eligible, np.abs(reduced), -1.0)))
        return j, (1 if can_up[j] else -1)

    def _ratio_test(self, j: int, direction: int, alpha: np.ndarray, bland: bool) -> tuple[float, int]:
        flip = self.upper[j] - self.lower[j]
        if self.m == 0:
            return flip, -1
        delta = -direction * alpha
        xb = self.x[self.basis]
        ratios = np.full(self.m, np.inf)
        dec = delta < -self.pivot_tol
        inc = delta > self.pivot_tol
        ratios[dec] = (xb[dec] - self.lower[self.basis][dec]) / -delta[dec]
        ratios[inc] = (self.upper[self.basis][inc] - xb[inc]) / delta[inc]
        ratios = np.maximum(ratios, 0.0)
        best = float(ratios.min())
        if flip <= best:
            return flip, -1
        ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, best))
        if bland:
            row = int(ties[np.argmin(self.basis[ties])])
        else:
            row = int(ties[np.argmax(np.abs(alpha[ties]))])
        return best, row

    def _move(self, j: int, direction: int, alpha: np.ndarray, step: float, row: int) -> None:
        if step > 0:
            self.x[self.basis] -= step * direction * alpha
            self.x[j] += direction * step
        if row < 0:
            # 界翻转，基不变
            if direction > 0:
                self.x[j], self.status[j] = self.upper[j], UPPER
            else:
                self.x[j], self.status[j] = self.lower[j], LOWER
            return
        leaving = int(self.basis[row])
        if -direction * alpha[row] < 0:
            self.x[leaving], self.status[leaving] = self.lower[leaving], LOWER
        else:
            self.x[leaving], self.status[leaving] = self.upper[leaving], UPPER
        self._pivot(row, j, alpha)

    def _pivot(self, row: int, j: int, alpha: np.ndarray) -> None:
        pivot_row = self.binv[row] / alpha[row]
        self.binv -= np.outer(alpha, pivot_row)
        self.binv[row] = pivot_row
        self.basis[row] = j
        self.status[j] = BASIC
        self.since_refactor += 1

    def run(self, cost: np.ndarray, phase: int) -> Literal["optimal", "unbounded"]:
        """
        在当前基上迭代至最优或无界.

        Args:
            cost: 扩展列上的目标系数
            phase: 阶段编号（只用于日志）

        Returns:
            optimal 或 unbounded
        """
        bland = False
        streak = 0
        degenerate_limit = 3 * (self.m + self.n)
        while True:
            if self.since_refactor >= self.refactor_interval:
                self.refactor()
            duals = cost[self.basis] @ self.binv if self.m else np.zeros(0)
            reduced = cost - duals @ self.a if self.m else cost.copy()
            j, direction = self._price(reduced, bland)
            if j < 0:
                return "optimal"
            if self.iterations >= self.max_iter:
                raise NumericalBreakdown("单纯形迭代次数超限", iterations=self.iterations, phase=phase)
            alpha = self.binv @ self.a[:, j] if self.m else np.zeros(0)
            step, row = self._ratio_test(j, direction, alpha, bland)
            if not np.isfinite(step):
                return "unbounded"
            self._move(j, direction, alpha, step, row)
            self.iterations += 1
            if step <= DEGENERATE_STEP:
                streak += 1
                if streak >= degenerate_limit and not bland:
                    bland = True
                    logger.debug(f"连续 {streak} 次退化换基，切换到 Bland 规则: phase={phase}")
            else:
                streak = 0

    def drive_out(self, first_artificial: int) -> None:
        """第一阶段后把仍在基中的人工变量换出；冗余行保留人工变量（固定为 0）."""
        for row in range(self.m):
            if self.basis[row] < first_artificial:
                continue
            candidates = np.flatnonzero(self.status[:first_artificial] != BASIC)
            if candidates.size == 0:
                break
            values = self.binv[row] @ self.a[:, candidates]
            best = int(np.argmax(np.abs(values)))
            if abs(values[best]) <= DRIVE_OUT_PIVOT:
                continue
            j = int(candidates[best])
            leaving = int(self.basis[row])
            self.x[leaving], self.status[leaving] = 0.0, LOWER
            self._pivot(row, j, self.binv @ self.a[:, j])
        self.upper[first_artificial:] = 0.0
        self.refactor()


def _solve_unconstrained(problem: LpProblem) -> LpSolution:
    """m = 0：每个变量独立取最优的界."""
    c, lo, hi = problem.objective, problem.lower, problem.upper
    x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
    x = np.where(c > 0, lo, np.where(c < 0, hi, x))
    if not np.all(np.isfinite(x)):
        return LpSolution(status="unbounded")
    return LpSolution(
        status="optimal",
        objective_value=float(c @ x),
        primal=x,
        dual=np.zeros(0),
        reduced_costs=c,
        basis=np.zeros(0, dtype=np.int64),
    )


def _warm_start(problem: LpProblem, basis: Sequence[int], settings: Settings) -> Optional[_RevisedSimplex]:
    basis = np.asarray(basis, dtype=np.int64)
    if basis.shape != (problem.m,) or len(np.unique(basis)) != problem.m:
        return None
    if np.any(basis < 0) or np.any(basis >= problem.p):
        return None
    simplex = _RevisedSimplex(problem.eq_matrix, problem.eq_rhs, problem.lower, problem.upper, settings)
    try:
        simplex.set_basis(basis)
    except (NumericalBreakdown, np.linalg.LinAlgError):
        return None
    xb = simplex.x[basis]
    tol = settings.lp_feasibility_tol
    if np.any(xb < problem.lower[basis] - tol) or np.any(xb > problem.upper[basis] + tol):
        return None
    return simplex


def solve_lp(problem: LpProblem, warm_basis: Optional[Sequence[int]] = None,
             settings: Optional[Settings] = None) -> LpSolution:
    """
    求解 min cᵀv s.t. Av = b, l ≤ v ≤ u.

    Args:
        problem: 标准型 LP
        warm_basis: 可选的初始基（m 个原始列下标）；原始可行时跳过第一阶段
        settings: 容差配置，默认取全局 Settings

    Returns:
        LpSolution。optimal 时 dual 为 y = c_B B⁻¹，reduced_costs 为 c − Aᵀy

    Raises:
        NumericalBreakdown: 基矩阵条件数超过上限或迭代次数超限
    """
    settings = settings or get_settings()
    if problem.m == 0:
        return _solve_unconstrained(problem)

    m, p = problem.m, problem.p
    a, b = problem.eq_matrix, problem.eq_rhs
    simplex = _warm_start(problem, warm_basis, settings) if warm_basis is not None else None
    n_artificial = 0
    if simplex is None:
        start = _RevisedSimplex(a, b, problem.lower, problem.upper, settings)
        residual = b - a @ start.x
        sign = np.where(residual >= 0, 1.0, -1.0)
        n_artificial = m
        simplex = _RevisedSimplex(
            np.hstack([a, np.diag(sign)]),
            b,
            np.concatenate([problem.lower, np.zeros(m)]),
            np.concatenate([problem.upper, np.full(m, np.inf)]),
            settings,
        )
        simplex.set_basis(np.arange(p, p + m))
        simplex.run(np.concatenate([np.zeros(p), np.ones(m)]), phase=1)
        infeasibility = float(np.sum(simplex.x[p:]))
        if infeasibility > settings.lp_feasibility_tol * (1.0 + float(np.max(np.abs(b)))):
            logger.debug(f"LP 不可行: phase1={infeasibility:.3e}, iterations={simplex.iterations}")
            return LpSolution(status="infeasible", iterations=simplex.iterations)
        simplex.drive_out(p)

    cost = np.concatenate([problem.objective, np.zeros(n_artificial)])
    outcome = simplex.run(cost, phase=2)
    if outcome == "unbounded":
        return LpSolution(status="unbounded", iterations=simplex.iterations)

    simplex.refactor()
    primal = np.clip(simplex.x[:p], problem.lower, problem.upper)
    duals = cost[simplex.basis] @ simplex.binv
    basis = simplex.basis if np.all(simplex.basis < p) else None
    return LpSolution(
        status="optimal",
        objective_value=float(problem.objective @ primal),
        primal=primal,
        dual=duals,
        reduced_costs=problem.objective - a.T @ duals,
        basis=basis,
        iterations=simplex.iterations,
    )


def _fixed(value: float) -> str:
    if np.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.12f}"


def dump_lp_problem(problem: LpProblem, path: Optional[Union[str, Path]] = None) -> str:
    """
    以定点数纯文本导出 LP，便于附在问题报告里.

    格式：首行 ``LP m p``；OBJECTIVE 一行；BOUNDS 每变量一行 ``lower upper``；
    ROWS 每约束一行 ``a_1 … a_p = b``。

    Args:
        problem: LP
        path: 给定时同时写入文件

    Returns:
        文本内容
    """
    lines = [f"LP {problem.m} {problem.p}", "OBJECTIVE", " ".join(_fixed(v) for v in problem.objective), "BOUNDS"]
    lines += [f"{_fixed(lo)} {_fixed(hi)}" for lo, hi in zip(problem.lower, problem.upper)]
    lines.append("ROWS")
    for row, rhs in zip(problem.eq_matrix, problem.eq_rhs):
        lines.append(" ".join(_fixed(v) for v in row) + f" = {_fixed(rhs)}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
