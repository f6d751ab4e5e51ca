"""
@File       : two_stage_service.py
@Description: 两阶段随机 LP：补偿函数求值、确定性等价求解与单割 L-shaped 分解.

@Time       : 2026/01/10 09:05
@Author     : hcy18
"""
from typing import NamedTuple, Optional

import numpy as np

from covsaa.config.settings import Settings, get_settings
from covsaa.errors import (
    DimensionMismatch,
    InfeasibleCandidate,
    IterationLimit,
    RecourseInfeasible,
    RecourseUnbounded,
    SizeCapExceeded,
)
from covsaa.schemas.lp_schema import LpProblem, LpSolution
from covsaa.schemas.scenario_schema import ScenarioSet
from covsaa.schemas.twostage_schema import SecondStageValue, SolveResult, TwoStageLp
from covsaa.services.simplex_service import solve_lp
from covsaa.utils.logger import app_logger as logger


def _check_z(model: TwoStageLp, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape != (model.d_z,):
        raise DimensionMismatch("第一阶段决策维数不匹配", expected=model.d_z, actual=z.shape)
    return z


def _check_y(model: TwoStageLp, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != model.d_y:
        raise DimensionMismatch("情景维数与模型不匹配", expected=model.d_y, actual=y.shape)
    return y


def recourse_problem(model: TwoStageLp, rhs: np.ndarray) -> LpProblem:
    """min c_vᵀv s.t. Wv = rhs, v ≥ 0."""
    return LpProblem.build(objective=model.c_v, eq_matrix=model.W, eq_rhs=rhs)


def _raise_for_status(solution: LpSolution, **context) -> None:
    if solution.status == "infeasible":
        raise RecourseInfeasible("第二阶段不可行，违反完全补偿假设", **context)
    if solution.status == "unbounded":
        raise RecourseUnbounded("第二阶段无界，对偶可行集为空", **context)


class _CachedBasis(NamedTuple):
    columns: np.ndarray
    binv: np.ndarray
    dual: np.ndarray


class RecourseBunch:
    """
    多右端项的补偿 LP 批量求解（bunching）.

    任一最优基对所有右端项都对偶可行，只要 B⁻¹·rhs ≥ 0 就是该右端项的最优基，
    此时 V = λᵀ·rhs。没有缓存基覆盖的右端项回退到 solve_lp 并把新基加入缓存。
    实例只在一次求解调用内使用。
    """

    def __init__(self, model: TwoStageLp, settings: Optional[Settings] = None):
        self.model = model
        self.settings = settings or get_settings()
        self.bases: list[_CachedBasis] = []
        self.hits = 0
        self.misses = 0

    def _assign(self, cached: _CachedBasis, rhs: np.ndarray, pending: np.ndarray,
                values: np.ndarray, duals: np.ndarray) -> np.ndarray:
        if pending.size == 0:
            return pending
        block = rhs[pending]
        xb = block @ cached.binv.T
        scale = 1.0 + np.max(np.abs(block), axis=1)
        covered = np.all(xb >= -self.settings.lp_feasibility_tol * scale[:, None], axis=1)
        hit = pending[covered]
        values[hit] = block[covered] @ cached.dual
        duals[hit] = cached.dual
        self.hits += hit.size
        return pending[~covered]

    def _solve_fresh(self, rhs: np.ndarray, index: int) -> tuple[LpSolution, Optional[_CachedBasis]]:
        warm = self.bases[-1].columns if self.bases else None
        solution = solve_lp(recourse_problem(self.model, rhs), warm_basis=warm, settings=self.settings)
        _raise_for_status(solution, scenario=index)
        self.misses += 1
        if solution.basis is None:
            return solution, None
        columns = np.asarray(solution.basis)
        cached = _CachedBasis(columns=columns, binv=np.linalg.inv(self.model.W[:, columns]), dual=solution.dual)
        self.bases.append(cached)
        return solution, cached

    def solve_many(self, rhs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """
        批量求 V 与对偶乘子.

        Args:
            rhs: S×m₂ 右端项 h(y_s) − Tz

        Returns:
            (长度 S 的 V，S×m₂ 的 λ)，按输入顺序
        """
        rhs = np.atleast_2d(rhs)
        count = rhs.shape[0]
        values = np.empty(count)
        duals = np.empty((count, self.model.m2))
        pending = np.arange(count)
        for cached in self.bases:
            pending = self._assign(cached, rhs, pending, values, duals)
        while pending.size:
            i = int(pending[0])
            pending = pending[1:]
            solution, cached = self._solve_fresh(rhs[i], i)
            values[i] = solution.objective_value
            duals[i] = solution.dual
            if cached is not None:
                pending = self._assign(cached, rhs, pending, values, duals)
        return values, duals


def second_stage_value(model: TwoStageLp, z, y) -> SecondStageValue:
    """
    V(z, y) = min { c_vᵀv : Wv = h(y) − Tz, v ≥ 0 }.

    Args:
        model: 两阶段模型
        z: 第一阶段决策
        y: 需求实现

    Returns:
        SecondStageValue，dual 满足 λᵀ(h(y) − Tz) = value

    Raises:
        RecourseInfeasible: 补偿 LP 不可行
    """
    z = _check_z(model, z)
    y = _check_y(model, y)
    solution = solve_lp(recourse_problem(model, model.h(y) - model.T @ z))
    _raise_for_status(solution)
    return SecondStageValue(value=solution.objective_value, dual=solution.dual)


def cost(model: TwoStageLp, z, y) -> float:
    """c(z, y) = c_zᵀz + V(z, y)."""
    z = _check_z(model, z)
    return float(model.c_z @ z) + second_stage_value(model, z, y).value


def check_first_stage(model: TwoStageLp, z, tol: Optional[float] = None) -> np.ndarray:
    """
    校验 z ∈ 𝒵.

    Raises:
        InfeasibleCandidate: z 不满足第一阶段约束
    """
    z = _check_z(model, z)
    tol = get_settings().lp_feasibility_tol if tol is None else tol
    stage = model.first_stage
    d_z = model.d_z
    if np.any(z < stage.lower[:d_z] - tol) or np.any(z > stage.upper[:d_z] + tol):
        raise InfeasibleCandidate("候选解超出第一阶段变量界", z=np.round(z, 6).tolist())
    if stage.m == 0:
        return z
    # 固定 z 后检查辅助变量能否满足第一阶段约束
    lower = stage.lower.copy()
    upper = stage.upper.copy()
    lower[:d_z] = np.clip(z, stage.lower[:d_z], stage.upper[:d_z])
    upper[:d_z] = lower[:d_z]
    feasibility = LpProblem(objective=np.zeros(stage.p), eq_matrix=stage.eq_matrix, eq_rhs=stage.eq_rhs,
                            lower=lower, upper=upper)
    if not solve_lp(feasibility).is_optimal:
        raise InfeasibleCandidate("候选解不满足第一阶段约束")
    return z


def _support(model: TwoStageLp, scenarios: ScenarioSet) -> tuple[np.ndarray, np.ndarray]:
    if scenarios.d_y != model.d_y:
        raise DimensionMismatch("情景维数与模型不匹配", expected=model.d_y, actual=scenarios.d_y)
    keep = scenarios.support_indices()
    return model.h(scenarios.points[keep]), scenarios.weights[keep]


def saa_objective(model: TwoStageLp, scenarios: ScenarioSet, z, bunch: Optional[RecourseBunch] = None) -> float:
    """
    Σ_i w_i·c(z, y_i).

    Args:
        model: 两阶段模型
        scenarios: 带权情景
        z: 第一阶段可行决策
        bunch: 可复用的补偿基缓存（同一模型）

    Returns:
        SAA 目标值
    """
    z = check_first_stage(model, z)
    h_values, weights = _support(model, scenarios)
    bunch = bunch or RecourseBunch(model)
    values, _ = bunch.solve_many(h_values - model.T @ z)
    return float(model.c_z @ z) + float(weights @ values)


def solve_extensive(model: TwoStageLp, scenarios: ScenarioSet, var_cap: Optional[int] = None) -> SolveResult:
    """
    确定性等价 LP：min c_zᵀz + Σ_s w_s c_vᵀv_s，s.t. z ∈ 𝒵，Tz + Wv_s = h(y_s)，v_s ≥ 0.

    权重为 0 的情景不进入模型。

    Args:
        model: 两阶段模型
        scenarios: 带权情景
        var_cap: 变量数上限，默认取配置

    Returns:
        SolveResult

    Raises:
        SizeCapExceeded: 变量数超过上限
    """
    var_cap = get_settings().extensive_var_cap if var_cap is None else var_cap
    h_values, weights = _support(model, scenarios)
    stage = model.first_stage
    count = weights.shape[0]
    p1, m1, m2, d_v = stage.p, stage.m, model.m2, model.d_v
    total = p1 + count * d_v
    if total > var_cap:
        raise SizeCapExceeded("确定性等价 LP 变量数超限", variables=total, cap=var_cap)

    a = np.zeros((m1 + count * m2, total))
    a[:m1, :p1] = stage.eq_matrix
    rhs = np.concatenate([stage.eq_rhs, h_values.ravel()])
    objective = np.concatenate([model.c_z, np.zeros(p1 - model.d_z), np.kron(weights, model.c_v)])
    for s in range(count):
        rows = slice(m1 + s * m2, m1 + (s + 1) * m2)
        a[rows, :model.d_z] = model.T
        a[rows, p1 + s * d_v: p1 + (s + 1) * d_v] = model.W
    problem = LpProblem(
        objective=objective,
        eq_matrix=a,
        eq_rhs=rhs,
        lower=np.concatenate([stage.lower, np.zeros(count * d_v)]),
        upper=np.concatenate([stage.upper, np.full(count * d_v, np.inf)]),
    )
    solution = solve_lp(problem)
    if solution.status == "infeasible":
        raise RecourseInfeasible("确定性等价 LP 不可行（第一阶段可行域为空）")
    if solution.status == "unbounded":
        raise RecourseUnbounded("确定性等价 LP 无界")
    logger.debug(f"确定性等价求解完成: scenarios={count}, variables={total}, iterations={solution.iterations}")
    return SolveResult(
        z_star=solution.primal[:model.d_z],
        objective=solution.objective_value,
        iterations=solution.iterations,
        method="extensive",
    )


class _Master:
    """L-shaped 主问题：变量 [第一阶段列, θ, 各割的剩余变量]."""

    def __init__(self, model: TwoStageLp):
        self.model = model
        # c_v ≥ 0 时 λ = 0 对偶可行，V ≥ 0 即 θ 的有效下界
        self.theta_floor = 0.0 if np.all(model.c_v >= 0) else -np.inf
        self.cut_slopes: list[np.ndarray] = []
        self.cut_offsets: list[float] = []

    def add_cut(self, slope: np.ndarray, offset: float) -> None:
        """θ + slopeᵀz ≥ offset."""
        self.cut_slopes.append(slope)
        self.cut_offsets.append(offset)

    def problem(self, with_theta: bool = True) -> LpProblem:
        stage = self.model.first_stage
        d_z, p1, m1 = self.model.d_z, stage.p, stage.m
        first_cost = np.concatenate([self.model.c_z, np.zeros(p1 - d_z)])
        if not with_theta:
            return LpProblem(objective=first_cost, eq_matrix=stage.eq_matrix, eq_rhs=stage.eq_rhs,
                             lower=stage.lower, upper=stage.upper)
        k = len(self.cut_slopes)
        a = np.zeros((m1 + k, p1 + 1 + k))
        a[:m1, :p1] = stage.eq_matrix
        for idx, slope in enumerate(self.cut_slopes):
            a[m1 + idx, :d_z] = slope
            a[m1 + idx, p1] = 1.0
            a[m1 + idx, p1 + 1 + idx] = -1.0
        return LpProblem(
            objective=np.concatenate([first_cost, [1.0], np.zeros(k)]),
            eq_matrix=a,
            eq_rhs=np.concatenate([stage.eq_rhs, self.cut_offsets]),
            lower=np.concatenate([stage.lower, [self.theta_floor], np.zeros(k)]),
            upper=np.concatenate([stage.upper, [np.inf], np.full(k, np.inf)]),
        )

    def solve(self, with_theta: bool = True) -> LpSolution:
        solution = solve_lp(self.problem(with_theta))
        if solution.status == "infeasible":
            raise RecourseInfeasible("L-shaped 主问题不可行（第一阶段可行域为空）")
        if solution.status == "unbounded":
            raise RecourseUnbounded("L-shaped 主问题无界")
        return solution


def solve_lshaped(model: TwoStageLp, scenarios: ScenarioSet, tol: Optional[float] = None,
                  max_iter: Optional[int] = None) -> SolveResult:
    """
    单割 L-shaped（Benders）分解.

    割平面 θ ≥ Σ_s w_s λ_sᵀ(h(y_s) − Tz)，λ_s 为补偿 LP 的最优对偶；
    (UB − LB)/max(1, |UB|) ≤ tol 时停止。完全补偿下不需要可行性割。

    Args:
        model: 两阶段模型
        scenarios: 带权情景
        tol: 相对 gap 容差，默认取配置
        max_iter: 迭代上限，默认取配置

    Returns:
        SolveResult，z_star 为上界对应的现任解

    Raises:
        IterationLimit: 达到迭代上限，异常的 result 携带现任解与 gap
    """
    settings = get_settings()
    tol = settings.lshaped_tol if tol is None else tol
    max_iter = settings.lshaped_max_iter if max_iter is None else max_iter
    if not tol > 0:
        raise DimensionMismatch("tol 必须为正数", tol=tol)
    h_values, weights = _support(model, scenarios)
    d_z = model.d_z
    bunch = RecourseBunch(model, settings)
    master = _Master(model)

    z = master.solve(with_theta=False).primal[:d_z]
    upper, lower = np.inf, -np.inf
    z_best = z
    iterations = 0
    while iterations < max_iter:
        iterations += 1
        values, duals = bunch.solve_many(h_values - model.T @ z)
        candidate = float(model.c_z @ z) + float(weights @ values)
        if candidate < upper:
            upper, z_best = candidate, z
        weighted = weights @ duals
        master.add_cut(slope=model.T.T @ weighted, offset=float(np.sum(weights * np.einsum("sm,sm->s", duals, h_values))))
        solution = master.solve()
        lower = max(lower, solution.objective_value)
        z = solution.primal[:d_z]
        gap = (upper - lower) / max(1.0, abs(upper))
        logger.debug(f"L-shaped iter={iterations}: LB={lower:.8g}, UB={upper:.8g}, gap={gap:.3e}")
        if gap <= tol:
            logger.debug(f"L-shaped 收敛: iterations={iterations}, bases={len(bunch.bases)}, "
                         f"hits={bunch.hits}, misses={bunch.misses}")
            return SolveResult(z_star=z_best, objective=upper, iterations=iterations, cuts=len(master.cut_slopes),
                               lower_bound=lower, upper_bound=upper, method="lshaped")

    incumbent = SolveResult(z_star=z_best, objective=upper, iterations=iterations, cuts=len(master.cut_slopes),
                            lower_bound=lower, upper_bound=upper, method="lshaped")
    raise IterationLimit("L-shaped 达到迭代上限", result=incumbent, gap=f"{incumbent.gap:.3e}")
