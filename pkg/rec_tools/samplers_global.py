"""
全局选择采样器

功能描述:
    - rejection_sample: 拒绝采样（Uₙ < r(Yₙ)/M 即接受）
    - astar_sample: A* 采样（维护 Tₙ/r(Yₙ) 的最小值，最小值 < Tₙ/M 时终止）
    - gprs_sample: 贪婪泊松拒绝采样（r(Yₙ) ≥ sha(Tₙ) 即接受）
    - astar_parallel / gprs_parallel: J 个速率 1/J 的子过程叠加（确定性交错）
    - astar_limited / gprs_limited: 步数受限的近似采样器
    - budget_for_tv / decode_global: 步数预算与 O(1) 解码

计数约定:
    steps K 为未触发终止的到达点数（A* 不计终止点；RS/GPRS 计入被接受的点）
"""

from __future__ import annotations

import heapq
import math
import sys
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

from .common_utils import get_logger
from .core_distributions import ContinuousDistribution, TargetProposalPair
from .divergences import StretchFunction
from .poisson_process import Arrival, GlobalArrivalGenerator, SeedStream, arrival_location

logger = get_logger(__name__)

_BOUND_SLACK = math.log1p(1e-12)
_LOG_FLOAT_MAX = math.log(sys.float_info.max)
MAX_BUDGET = 2 ** 63 - 1


@dataclass(frozen=True)
class RunResult:
    """
    一次全局采样的结果

    字段:
        sample: 输出样本
        selected_index: 选中的到达点序号 N（并行模式下为叠加过程中的位置）
        steps: 运行步数 K
        acceptance_uniform: 拒绝采样中被接受点的均匀数
        thread_tag: 并行模式下的 (j*, N_{j*})
        exhausted_budget: 限步模式下精确采样需要超过预算
        simulated: 实际生成的到达点总数（含终止点与并行模式中各线程的待处理点）
    """

    sample: float
    selected_index: int
    steps: int
    algorithm: str = ""
    acceptance_uniform: Optional[float] = None
    thread_tag: Optional[Tuple[int, int]] = None
    exhausted_budget: bool = False
    simulated: int = 0

    def as_dict(self) -> Dict[str, object]:
        return {
            "algorithm": self.algorithm,
            "sample": self.sample,
            "selected_index": self.selected_index,
            "steps": self.steps,
            "acceptance_uniform": self.acceptance_uniform,
            "thread_tag": list(self.thread_tag) if self.thread_tag else None,
            "exhausted_budget": self.exhausted_budget,
        }


def resolve_bound(pair: TargetProposalPair, M: Optional[float]) -> float:
    """M 缺省时取分布对的闭式上界；M < 1 不可能是合法上界"""
    if M is None:
        if not pair.bounded:
            raise ValueError(f"invalid bound: no finite sup bound known for {pair.describe()}")
        M = pair.sup_bound
    M = float(M)
    if not (math.isfinite(M) and M >= 1.0):
        raise ValueError(f"invalid bound: M must be finite and >= 1, got {M}")
    return M


def checked_log_ratio(pair: TargetProposalPair, y: float, log_m: float) -> float:
    log_r = float(pair.log_ratio(y))
    if log_r > log_m + _BOUND_SLACK:
        raise ValueError(f"invalid bound: ln r({y:.6g}) = {log_r:.6g} exceeds ln M = {log_m:.6g}")
    return log_r


def _time_key(arrival: Arrival, log_domain: bool) -> float:
    return arrival.log_time if log_domain else arrival.time


def astar_key(t: float, log_r: float) -> float:
    """线性域 A* 键 t/r；r 极小时 exp(−ln r) 溢出，键取 inf"""
    if -log_r >= _LOG_FLOAT_MAX:
        return math.inf
    return t * math.exp(-log_r)


# ---------------------------------------------------------------------------
# 串行精确采样器
# ---------------------------------------------------------------------------

def rejection_sample(pair: TargetProposalPair, M: Optional[float], seed) -> RunResult:
    """
    全局拒绝采样

    参数:
        pair: 目标/提议分布对
        M: 上界（≥ ‖r‖∞）
        seed: SeedStream 或整数种子

    返回:
        RunResult: N = K = 首个 Uₙ < r(Yₙ)/M 的序号
    """
    M = resolve_bound(pair, M)
    log_m = math.log(M)
    gen = GlobalArrivalGenerator(seed, pair.proposal)
    while True:
        a = gen.next()
        log_r = checked_log_ratio(pair, a.location, log_m)
        if a.extra_uniform < math.exp(log_r - log_m):
            return RunResult(a.location, a.index, a.index, "rs",
                             acceptance_uniform=a.extra_uniform, simulated=a.index)


def astar_sample(pair: TargetProposalPair, M: Optional[float], seed,
                 log_domain: bool = False) -> RunResult:
    """
    全局 A* 采样

    N = argminₙ Tₙ/r(Yₙ)；当前最小值严格小于 Tₙ/M 时终止，终止点不计入 K
    """
    M = resolve_bound(pair, M)
    log_m = math.log(M)
    gen = GlobalArrivalGenerator(seed, pair.proposal, log_domain=log_domain)
    best_key, best = math.inf, None
    while True:
        a = gen.next()
        t_key = _time_key(a, log_domain)
        threshold = t_key - log_m if log_domain else t_key / M
        if best_key < threshold:
            return RunResult(best.location, best.index, a.index - 1, "astar", simulated=a.index)
        log_r = checked_log_ratio(pair, a.location, log_m)
        if log_domain:
            key = t_key - log_r
        else:
            key = astar_key(t_key, log_r)
        if key < best_key:
            best_key, best = key, a


def gprs_accepts(log_r: float, t: float, stretch: StretchFunction) -> bool:
    h = stretch.sha(t)
    if h <= 0.0:
        return log_r > -math.inf
    return log_r >= math.log(h)


def gprs_sample(pair: TargetProposalPair, stretch: StretchFunction, seed,
                log_domain: bool = False) -> RunResult:
    """
    全局 GPRS：接受首个 r(Yₙ) ≥ sha(Tₙ) 的到达点，N = K

    判据在收缩空间中计算（比较 r 与 sha(T)，而非 σ(r) 与 T）
    """
    gen = GlobalArrivalGenerator(seed, pair.proposal, log_domain=log_domain)
    while True:
        a = gen.next()
        log_r = float(pair.log_ratio(a.location))
        if gprs_accepts(log_r, a.time, stretch):
            return RunResult(a.location, a.index, a.index, "gprs", simulated=a.index)


# ---------------------------------------------------------------------------
# 并行（叠加）采样器
# ---------------------------------------------------------------------------

class _MergedProcess:
    """
    J 个速率 1/J 的子过程按到达时间归并，子过程 j 的种子为 seed.fold_in(j)

    pop() 取出最早的待处理点；refill(j) 再为线程 j 生成下一个点。
    """

    def __init__(self, seed, proposal: ContinuousDistribution, threads: int):
        if threads < 1:
            raise ValueError(f"thread count must be >= 1, got {threads}")
        stream = SeedStream.coerce(seed)
        self.threads = threads
        self.gens = [GlobalArrivalGenerator(stream.fold_in(j), proposal, rate=1.0 / threads)
                     for j in range(threads)]
        self.heads: List[Tuple[float, int, Arrival]] = []
        for j in range(threads):
            self.refill(j)
        self.popped = 0

    def refill(self, j: int) -> None:
        a = self.gens[j].next()
        heapq.heappush(self.heads, (a.time, j, a))

    def pop(self) -> Tuple[int, Arrival]:
        _, j, arrival = heapq.heappop(self.heads)
        self.popped += 1
        return j, arrival

    @property
    def pending(self) -> int:
        return len(self.heads)


def astar_parallel(pair: TargetProposalPair, M: Optional[float], threads: int, seed) -> RunResult:
    """
    并行 A* 采样（J 个子过程共享当前最小值）

    steps 为各线程生成的到达点总数减一（各线程的终止点中只有全局最先的一个被扣除），
    期望为 M + J − 1；thread_tag = (j*, N_{j*})
    """
    M = resolve_bound(pair, M)
    log_m = math.log(M)
    proc = _MergedProcess(seed, pair.proposal, threads)
    best_key, best, best_tag, best_pos = math.inf, None, None, 0
    while True:
        j, a = proc.pop()
        if best_key < a.time / M:
            # 其余线程的待处理点时间不早于 a.time，同样满足终止条件
            simulated = proc.popped + proc.pending
            return RunResult(best.location, best_pos, simulated - 1, "astar-par",
                             thread_tag=best_tag, simulated=simulated)
        log_r = checked_log_ratio(pair, a.location, log_m)
        key = astar_key(a.time, log_r)
        if key < best_key:
            best_key, best, best_tag, best_pos = key, a, (j, a.index), proc.popped
        proc.refill(j)


def gprs_parallel(pair: TargetProposalPair, stretch: StretchFunction, threads: int, seed) -> RunResult:
    """
    并行 GPRS：叠加过程中首个满足 r(Y) ≥ sha(T) 的到达点

    steps = 归并弹出数 + (J − 1) 个待处理点，期望 ‖r‖∞ + J − 1
    """
    proc = _MergedProcess(seed, pair.proposal, threads)
    while True:
        j, a = proc.pop()
        log_r = float(pair.log_ratio(a.location))
        if gprs_accepts(log_r, a.time, stretch):
            total = proc.popped + proc.pending
            return RunResult(a.location, proc.popped, total, "gprs-par",
                             thread_tag=(j, a.index), simulated=total)
        proc.refill(j)


def decode_parallel(seed, thread_tag: Tuple[int, int], proposal: ContinuousDistribution) -> float:
    """由 (j*, N_{j*}) 重建并行采样的输出"""
    j, n = thread_tag
    return arrival_location(SeedStream.coerce(seed).fold_in(int(j)), int(n), proposal)


# ---------------------------------------------------------------------------
# 限步采样器
# ---------------------------------------------------------------------------

def astar_limited(pair: TargetProposalPair, M: Optional[float], budget: Optional[int], seed) -> RunResult:
    """
    步数受限 A*：在前 m 个到达点中取 Tₙ/r(Yₙ) 的最小者

    budget=None 表示无限预算（与 astar_sample 相同）。
    精确运行需要超过 m 步时 exhausted_budget=True（用第 m+1 个到达点的时间判断）。
    """
    if budget is None:
        exact = astar_sample(pair, M, seed)
        return RunResult(exact.sample, exact.selected_index, exact.steps, "astar-lim",
                         simulated=exact.simulated)
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    M = resolve_bound(pair, M)
    log_m = math.log(M)
    gen = GlobalArrivalGenerator(seed, pair.proposal)
    best_key, best = math.inf, None
    for _ in range(budget):
        a = gen.next()
        if best_key < a.time / M:
            return RunResult(best.location, best.index, a.index - 1, "astar-lim", simulated=a.index)
        log_r = checked_log_ratio(pair, a.location, log_m)
        key = astar_key(a.time, log_r)
        if key < best_key:
            best_key, best = key, a
    nxt = gen.next()
    exhausted = not best_key < nxt.time / M
    return RunResult(best.location, best.index, budget, "astar-lim",
                     exhausted_budget=exhausted, simulated=nxt.index)


def gprs_limited(pair: TargetProposalPair, stretch: StretchFunction, budget: Optional[int], seed) -> RunResult:
    """
    步数受限 GPRS：m 步内接受则与精确 GPRS 相同，否则返回第 m 个到达点
    """
    if budget is None:
        exact = gprs_sample(pair, stretch, seed)
        return RunResult(exact.sample, exact.selected_index, exact.steps, "gprs-lim",
                         simulated=exact.simulated)
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    gen = GlobalArrivalGenerator(seed, pair.proposal)
    a = None
    for _ in range(budget):
        a = gen.next()
        log_r = float(pair.log_ratio(a.location))
        if gprs_accepts(log_r, a.time, stretch):
            return RunResult(a.location, a.index, a.index, "gprs-lim", simulated=a.index)
    return RunResult(a.location, a.index, budget, "gprs-lim", exhausted_budget=True, simulated=budget)


def budget_for_tv(kl_bits: float, eps: float) -> int:
    """m = ⌈2^{(D_KL + 1)/ε}⌉；超过 2⁶³ − 1 抛出 OverflowError"""
    eps = float(eps)
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps must be in (0, 1], got {eps}")
    if kl_bits < 0.0:
        raise ValueError(f"kl_bits must be >= 0, got {kl_bits}")
    exponent = (float(kl_bits) + 1.0) / eps
    if exponent >= 63.0:
        raise OverflowError(f"budget overflow: 2^{exponent:.4g} exceeds 2^63 - 1")
    budget = math.ceil(2.0 ** exponent)
    if budget > MAX_BUDGET:
        raise OverflowError(f"budget overflow: {budget}")
    return int(budget)


def decode_global(seed, index: int, proposal: ContinuousDistribution) -> float:
    """由序号 N 重建串行全局采样的输出，O(1)"""
    return arrival_location(seed, index, proposal)


# 命令行 / 基准使用的算法名
GLOBAL_ALGORITHMS: Dict[str, Callable[..., RunResult]] = {
    "rs": rejection_sample,
    "astar": astar_sample,
    "gprs": gprs_sample,
    "astar-par": astar_parallel,
    "gprs-par": gprs_parallel,
    "astar-lim": astar_limited,
    "gprs-lim": gprs_limited,
}
