"""
分支定界采样器（一维拟凹密度比）

功能描述:
    - bnb_astar: 沿包含众数的分支运行 A*，记录最佳点的深度与堆路径
    - bnb_gprs: 沿包含众数的分支运行 GPRS，不需要上界 M
    - decode_bnb: 按 (深度, 路径比特) 重放分支，逐位重建编码端样本
    - heap_index: 路径比特 → 堆序号（根为 1，左 2H，右 2H+1）

路径约定: 众数 ≤ 样本点时保留左侧 (lo, y]，记比特 0；否则保留右侧 (y, hi]，记比特 1。
第 d 步左侧子区间的质量占比恰为该步的位置均匀数 Uᵈ，这也是堆路径编码的概率模型。
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple, Union

from .common_utils import debug_enabled, get_logger
from .core_distributions import ContinuousDistribution, TargetProposalPair, quantile_restricted
from .divergences import StretchFunction
from .poisson_process import (
    BranchArrivalGenerator,
    BranchState,
    WORD_LOCATION,
    SeedStream,
    next_branch_arrival,
    raw_to_uniform,
    split_on_sample,
)
from .samplers_global import astar_key, checked_log_ratio, gprs_accepts, resolve_bound

logger = get_logger(__name__)


@dataclass(frozen=True)
class BnbRunResult:
    """
    分支定界采样结果

    字段:
        sample: 输出样本
        depth: 被选中到达点的深度 δ
        path_bits: 长度为 δ 的路径比特
        steps: 未触发终止的到达点数 D（A* 不计终止点，GPRS 计入接受点）
        per_step_fraction: 每步保留比例 P(Bᵈ⁺¹)/P(Bᵈ)
        split_uniforms: 每步的位置均匀数 Uᵈ
        bound_mass: P(B_δ)
    """

    sample: float
    depth: int
    path_bits: Tuple[int, ...]
    steps: int
    per_step_fraction: Tuple[float, ...]
    split_uniforms: Tuple[float, ...]
    bound_mass: float
    algorithm: str = ""

    @property
    def heap_index(self) -> int:
        return heap_index(self.path_bits)

    def as_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "sample": self.sample,
            "depth": self.depth,
            "path_bits": "".join(str(b) for b in self.path_bits),
            "steps": self.steps,
            "bound_mass": self.bound_mass,
        }


def heap_index(path_bits: Sequence[int]) -> int:
    """根为 1；比特 0 → 2H，比特 1 → 2H + 1"""
    h = 1
    for bit in path_bits:
        if bit not in (0, 1):
            raise ValueError(f"path bits must be 0/1, got {bit}")
        h = 2 * h + int(bit)
    return h


def _require_mode(pair: TargetProposalPair) -> float:
    mode = float(pair.mode_point)
    if not math.isfinite(mode):
        raise ValueError(f"branch-and-bound needs a finite mode point, got {pair.mode_point}")
    return mode


def _spot_check_quasiconcave(pair: TargetProposalPair, y: float, mode: float) -> None:
    """在样本点、中点与众数三处检查密度比沿众数方向不减"""
    mid = 0.5 * (y + mode)
    r_y, r_mid, r_mode = (float(pair.log_ratio(v)) for v in (y, mid, mode))
    tol = 1e-9
    if r_y > r_mid + tol or r_mid > r_mode + tol:
        raise RuntimeError(
            f"quasiconcavity violated near y={y:.6g}: log r = {r_y:.6g}, {r_mid:.6g}, {r_mode:.6g}")


def _split(pair: TargetProposalPair, state: BranchState, y: float, u: float, mode: float,
           fractions: List[float], uniforms: List[float]) -> BranchState:
    if debug_enabled():
        _spot_check_quasiconcave(pair, y, mode)
    nxt = split_on_sample(state, y, mode, u=u)
    fractions.append(u if nxt.path_bits[-1] == 0 else 1.0 - u)
    uniforms.append(u)
    return nxt


def bnb_astar(pair: TargetProposalPair, M: Optional[float], seed, log_domain: bool = False) -> BnbRunResult:
    """
    分支定界 A* 采样

    参数:
        pair: 拟凹密度比的目标/提议分布对（需已知众数）
        M: 上界（缺省取闭式 ‖r‖∞）
        seed: SeedStream 或整数种子
        log_domain: 对数域累加时间

    返回:
        BnbRunResult
    """
    M = resolve_bound(pair, M)
    log_m = math.log(M)
    mode = _require_mode(pair)
    gen = BranchArrivalGenerator(SeedStream.coerce(seed), pair.proposal, log_domain)
    state = BranchState.root()
    best_key = math.inf
    best: Optional[Tuple[float, int, Tuple[int, ...], float]] = None
    fractions: List[float] = []
    uniforms: List[float] = []
    steps = 0
    while True:
        arrival, state = next_branch_arrival(state, gen)
        if log_domain:
            terminate = best_key < arrival.log_time - log_m
        else:
            terminate = best_key < arrival.time / M
        if terminate:
            break
        steps += 1
        log_r = checked_log_ratio(pair, arrival.location, log_m)
        if log_domain:
            key = arrival.log_time - log_r
        else:
            key = astar_key(arrival.time, log_r)
        if key < best_key:
            best_key = key
            best = (arrival.location, state.depth, state.path_bits, state.mass)
        state = _split(pair, state, arrival.location, arrival.location_uniform, mode, fractions, uniforms)

    sample, depth, path, mass = best
    return BnbRunResult(sample, depth, path, steps, tuple(fractions), tuple(uniforms), mass, "bnb-astar")


def bnb_gprs(pair: TargetProposalPair, stretch: StretchFunction, seed, log_domain: bool = False) -> BnbRunResult:
    """
    分支定界 GPRS：接受分支上首个 r(Yᵈ) ≥ sha(Tᵈ) 的到达点
    """
    mode = _require_mode(pair)
    gen = BranchArrivalGenerator(SeedStream.coerce(seed), pair.proposal, log_domain)
    state = BranchState.root()
    fractions: List[float] = []
    uniforms: List[float] = []
    steps = 0
    while True:
        arrival, state = next_branch_arrival(state, gen)
        steps += 1
        log_r = float(pair.log_ratio(arrival.location))
        if gprs_accepts(log_r, arrival.time, stretch):
            return BnbRunResult(arrival.location, state.depth, state.path_bits, steps,
                                tuple(fractions), tuple(uniforms), state.mass, "bnb-gprs")
        state = _split(pair, state, arrival.location, arrival.location_uniform, mode, fractions, uniforms)


def branch_split_uniforms(seed, depth: int) -> List[float]:
    """分支前 depth 步的位置均匀数（即各步左侧子区间的质量占比）"""
    stream = SeedStream.coerce(seed)
    if depth <= 0:
        return []
    return [float(u) for u in raw_to_uniform(stream.blocks(1, depth)[:, WORD_LOCATION])]


def decode_bnb(seed, depth: int, path_bits: Sequence[int],
               pair_or_proposal: Union[TargetProposalPair, ContinuousDistribution]) -> float:
    """
    重放分支并返回深度 depth 处到达点的位置

    参数:
        seed: 与编码端相同的种子
        depth: 深度 δ
        path_bits: 路径比特
        pair_or_proposal: 给出分布对时按众数规则校验每个比特

    异常:
        ValueError("corrupt path ..."): 比特与众数规则矛盾或长度不符
    """
    path = tuple(int(b) for b in path_bits)
    if depth < 0 or len(path) != depth:
        raise ValueError(f"corrupt path: {len(path)} bits for depth {depth}")
    if isinstance(pair_or_proposal, TargetProposalPair):
        pair: Optional[TargetProposalPair] = pair_or_proposal
        proposal = pair_or_proposal.proposal
        mode = _require_mode(pair_or_proposal)
    else:
        pair, proposal, mode = None, pair_or_proposal, math.nan
    gen = BranchArrivalGenerator(SeedStream.coerce(seed), proposal)
    state = BranchState.root()
    for d, bit in enumerate(path):
        _, u = gen.draw(d)
        y = quantile_restricted(proposal, state.lo, state.hi, u)
        if bit not in (0, 1):
            raise ValueError(f"corrupt path: bit {bit} at depth {d}")
        if pair is not None:
            expected = 0 if mode <= y else 1
            if bit != expected:
                raise ValueError(f"corrupt path: bit {bit} at depth {d} contradicts the mode side")
        if bit == 0:
            state = replace(state, depth=d + 1, hi=y, mass=state.mass * u, path_bits=state.path_bits + (0,))
        else:
            state = replace(state, depth=d + 1, lo=y, mass=state.mass * (1.0 - u), path_bits=state.path_bits + (1,))
    _, u = gen.draw(depth)
    return quantile_restricted(proposal, state.lo, state.hi, u)
