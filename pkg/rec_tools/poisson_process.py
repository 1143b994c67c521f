"""
可按种子寻址的时空泊松过程

功能描述:
    - SeedStream: 基于 numpy Philox 计数器的可折叠种子流，fold_in(n) 派生子流
    - GlobalArrivalGenerator: 按时间顺序生成均值测度为 P⊗λ 的泊松过程到达点
    - arrival_location: O(1) 重建第 n 个到达点的位置（解码使用）
    - BranchState / BranchArrivalGenerator: 单分支（BSP 树中跟随众数的分支）上的受限过程
    - split_on_sample: 按样本点切分区间并记录路径比特
    - log_domain_add_arrival: 对数域时间累加

随机数寻址方案（编码与解码必须一致）:
    key(stream) = SeedSequence(entropy=base_seed, spawn_key=path).generate_state(2, uint64)
    第 n 个到达点（n ≥ 1）使用 Philox4x64(key, counter=[n, 0, 0, 0]) 输出的 4 个 64 位字:
        word0 → 指数间隔 E = −ln u
        word1 → 位置均匀数（经分位数变换得到位置）
        word2 → 附加均匀数（拒绝采样的接受判据、排序均匀数编码）
        word3 → 保留
    均匀数 u = ((raw >> 12) + 0.5)·2⁻⁵²，取值为 (2k+1)/2⁵³，严格位于 (0,1)，且 1 − u 在浮点下精确。
    Philox 计数器逐块递增，所以批量读取 counter=[n0,...] 的连续输出与逐个随机访问逐位一致。
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace, field
from functools import lru_cache
from typing import Iterator, List, Optional, Tuple

import numpy as np

from .core_distributions import ContinuousDistribution, interval_mass, quantile_restricted

WORDS_PER_ARRIVAL = 4
WORD_TIME = 0
WORD_LOCATION = 1
WORD_EXTRA = 2
_BATCH = 64
_U_SCALE = 2.0 ** -52
_MIN_BRANCH_MASS = 1e-300


def raw_to_uniform(raw: np.ndarray) -> np.ndarray:
    """64 位原始字 → (0,1) 上的 53 位网格均匀数"""
    return ((np.asarray(raw, dtype=np.uint64) >> np.uint64(12)).astype(np.float64) + 0.5) * _U_SCALE


@lru_cache(maxsize=65536)
def _philox_key(base_seed: int, path: Tuple[int, ...]) -> Tuple[int, int]:
    state = np.random.SeedSequence(entropy=base_seed, spawn_key=path).generate_state(2, np.uint64)
    return int(state[0]), int(state[1])


@dataclass(frozen=True)
class SeedStream:
    """
    可折叠的确定性随机数流

    字段:
        base_seed: 64 位种子
        path: fold_in 路径（依次折叠的整数）
        position: draw_uniform / draw_exponential 的游标
    """

    base_seed: int
    path: Tuple[int, ...] = ()
    position: int = 0

    def __post_init__(self):
        if not 0 <= int(self.base_seed) < 2 ** 64:
            raise ValueError(f"seed out of 64-bit range: {self.base_seed}")

    @classmethod
    def coerce(cls, seed) -> "SeedStream":
        return seed if isinstance(seed, SeedStream) else cls(int(seed))

    def fold_in(self, n: int) -> "SeedStream":
        if n < 0:
            raise ValueError(f"fold_in needs a non-negative integer, got {n}")
        return SeedStream(self.base_seed, self.path + (int(n),), 0)

    @property
    def key(self) -> np.ndarray:
        return np.array(_philox_key(int(self.base_seed), self.path), dtype=np.uint64)

    def blocks(self, start: int, count: int) -> np.ndarray:
        """计数器 start .. start+count−1 的原始字，形状 (count, 4)"""
        if start < 0 or count < 0:
            raise ValueError("block range must be non-negative")
        counter = np.array([start, 0, 0, 0], dtype=np.uint64)
        bitgen = np.random.Philox(key=self.key, counter=counter)
        return bitgen.random_raw(WORDS_PER_ARRIVAL * count).reshape(count, WORDS_PER_ARRIVAL)

    def block(self, n: int) -> np.ndarray:
        return self.blocks(n, 1)[0]

    def uniform_at(self, n: int, word: int) -> float:
        return float(raw_to_uniform(self.block(n)[word]))

    def draw_uniform(self) -> Tuple[float, "SeedStream"]:
        u = self.uniform_at(self.position, 0)
        return u, replace(self, position=self.position + 1)

    def draw_exponential(self, rate: float = 1.0) -> Tuple[float, "SeedStream"]:
        if rate <= 0.0:
            raise ValueError(f"rate must be positive, got {rate}")
        u, nxt = self.draw_uniform()
        return -math.log(u) / rate, nxt

    def describe(self) -> str:
        return f"0x{int(self.base_seed):016x}" + "".join(f"/{p}" for p in self.path)


@dataclass(frozen=True)
class Arrival:
    """泊松过程的一个点：序号（从 1 开始）、位置、时间与对数时间"""

    index: int
    location: float
    time: float
    log_time: float = math.nan
    extra_uniform: float = math.nan
    location_uniform: float = math.nan


def log_domain_add_arrival(log_t_prev: float, delta: float) -> float:
    """
    ln(exp(log_t_prev) + delta)，最大值平移的稳定形式

    log_t_prev = −∞ 时精确返回 ln(delta)
    """
    if not delta > 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    return float(np.logaddexp(log_t_prev, math.log(delta)))


def arrival_location(seed, n: int, proposal: ContinuousDistribution) -> float:
    """
    O(1) 重建第 n 个全局到达点的位置，与顺序生成逐位一致

    参数:
        seed: SeedStream 或整数种子
        n: 到达序号（≥ 1）
        proposal: 提议分布 P
    """
    if n < 1:
        raise ValueError(f"arrival index must be >= 1, got {n}")
    stream = SeedStream.coerce(seed)
    return float(proposal.quantile(stream.uniform_at(n, WORD_LOCATION)))


class GlobalArrivalGenerator:
    """
    全局时间齐次泊松过程（均值测度 rate·P⊗λ）

    每个生成器单线程独占；输出只依赖 (seed, 调用序列)。
    rate = 1/J 用于并行采样中的子过程。
    """

    def __init__(self, seed, proposal: ContinuousDistribution, rate: float = 1.0,
                 log_domain: bool = False):
        if rate <= 0.0:
            raise ValueError(f"rate must be positive, got {rate}")
        self.stream = SeedStream.coerce(seed)
        self.proposal = proposal
        self.rate = float(rate)
        self.log_domain = log_domain
        self.index = 0
        self.time = 0.0
        self.log_time = -math.inf
        self._buffer: Optional[np.ndarray] = None
        self._buffer_start = 1

    def _uniforms(self, n: int) -> np.ndarray:
        buf = self._buffer
        if buf is None or not self._buffer_start <= n < self._buffer_start + len(buf):
            self._buffer_start = n
            buf = self._buffer = raw_to_uniform(self.stream.blocks(n, _BATCH))
        return buf[n - self._buffer_start]

    def next(self) -> Arrival:
        n = self.index + 1
        u_time, u_loc, u_extra, _ = self._uniforms(n)
        delta = -math.log(float(u_time)) / self.rate
        self.index = n
        if self.log_domain:
            self.log_time = log_domain_add_arrival(self.log_time, delta)
            self.time = math.exp(self.log_time)
        else:
            self.time += delta
            self.log_time = math.log(self.time)
        location = float(self.proposal.quantile(float(u_loc)))
        return Arrival(n, location, self.time, self.log_time, float(u_extra), float(u_loc))

    def __iter__(self) -> Iterator[Arrival]:
        while True:
            yield self.next()

    def take(self, k: int) -> List[Arrival]:
        return [self.next() for _ in range(k)]


def next_global_arrival(gen: GlobalArrivalGenerator, proposal: Optional[ContinuousDistribution] = None) -> Arrival:
    """Δₙ ∼ Exp(1)，Tₙ = Tₙ₋₁ + Δₙ，Yₙ = quantile(P, Uₙ)"""
    if proposal is not None and not proposal.same_law(gen.proposal):
        raise ValueError("generator was initialised with a different proposal")
    return gen.next()


def extra_uniforms(seed, count: int) -> np.ndarray:
    """第 1..count 个到达点的附加均匀数（word2），批量生成"""
    stream = SeedStream.coerce(seed)
    out = np.empty(count, dtype=np.float64)
    for start in range(1, count + 1, 4096):
        k = min(4096, count + 1 - start)
        out[start - 1:start - 1 + k] = raw_to_uniform(stream.blocks(start, k)[:, WORD_EXTRA])
    return out


# ---------------------------------------------------------------------------
# 单分支受限过程
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BranchState:
    """
    BSP 树中一条分支的状态

    字段:
        depth: 深度 d（根为 0）
        lo, hi: 保留区间 (lo, hi]
        time: 累积时间 Tᵈ
        path_bits: 路径比特（0 = 保留左侧/较小，1 = 保留右侧/较大）
        mass: P((lo, hi])，等于各步保留比例之积
        log_time: 对数域模式下的 ln Tᵈ
    """

    depth: int = 0
    lo: float = -math.inf
    hi: float = math.inf
    time: float = 0.0
    path_bits: Tuple[int, ...] = ()
    mass: float = 1.0
    log_time: float = -math.inf

    @classmethod
    def root(cls) -> "BranchState":
        return cls()


@dataclass
class BranchArrivalGenerator:
    """第 d 步使用计数器 d+1 的随机块；解码端按同样的寻址重放分支"""

    seed: SeedStream
    proposal: ContinuousDistribution
    log_domain: bool = False
    last_location_uniform: float = field(default=math.nan, init=False)

    def __post_init__(self):
        self.seed = SeedStream.coerce(self.seed)

    def draw(self, depth: int) -> Tuple[float, float]:
        """返回第 depth 步的 (E, U)"""
        u_time, u_loc = raw_to_uniform(self.seed.block(depth + 1)[:2])
        return -math.log(float(u_time)), float(u_loc)


def next_branch_arrival(state: BranchState, gen: BranchArrivalGenerator,
                        proposal: Optional[ContinuousDistribution] = None) -> Tuple[Arrival, BranchState]:
    """
    分支上的下一个到达点

    Eᵈ ∼ Exp(1)，time += Eᵈ / mass，location = quantile_restricted(P, lo, hi, Uᵈ)
    """
    proposal = proposal or gen.proposal
    if not state.mass > _MIN_BRANCH_MASS:
        raise RuntimeError(f"branch exhausted: mass {state.mass:.3g} at depth {state.depth}")
    e, u = gen.draw(state.depth)
    delta = e / state.mass
    if gen.log_domain:
        log_time = log_domain_add_arrival(state.log_time, delta)
        time = math.exp(log_time)
    else:
        time = state.time + delta
        log_time = math.log(time)
    location = quantile_restricted(proposal, state.lo, state.hi, u)
    gen.last_location_uniform = u
    arrival = Arrival(state.depth + 1, location, time, log_time, math.nan, u)
    return arrival, replace(state, time=time, log_time=log_time)


def split_on_sample(state: BranchState, y_pivot: float, mode_point: float,
                    proposal: Optional[ContinuousDistribution] = None,
                    u: Optional[float] = None) -> BranchState:
    """
    在样本点处切分并保留包含众数的一侧

    参数:
        state: 当前分支
        y_pivot: 切分点（本步的样本位置）
        mode_point: 密度比众数 m；m ≤ y_pivot 时保留 (lo, y]，否则保留 (y, hi]
        proposal: 重新计算质量所用的提议分布（给定 u 时可省略）
        u: 本步的位置均匀数；给定时保留比例精确取 u 或 1 − u

    返回:
        BranchState: depth + 1，路径追加 0（左）或 1（右）
    """
    if not state.lo <= y_pivot <= state.hi:
        raise ValueError(f"pivot {y_pivot} outside branch ({state.lo}, {state.hi}]")
    if mode_point <= y_pivot:
        lo, hi, bit = state.lo, y_pivot, 0
    else:
        lo, hi, bit = y_pivot, state.hi, 1
    if u is not None:
        fraction = u if bit == 0 else 1.0 - u
        mass = state.mass * fraction
    elif proposal is not None:
        mass = interval_mass(proposal, lo, hi)
    else:
        raise ValueError("split_on_sample needs either the proposal or the split uniform")
    return replace(state, depth=state.depth + 1, lo=lo, hi=hi, mass=mass,
                   path_bits=state.path_bits + (bit,))
