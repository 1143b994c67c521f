"""
样本序号的熵编码

功能描述:
    - BitString / BitReader: 比特串及其序列化格式（8 字节小端比特数 + MSB 优先打包字节）
    - ExactIntervalCoder / ExactIntervalDecoder: 有理数精确区间（算术）编码，码长 ≤ −lb 宽度 + 2
    - zeta_encode / zeta_decode: 在 pmf ∝ k^−α 下对正整数做算术编码（可带逃逸符号）
    - elias_gamma_* / elias_delta_*: Elias gamma / delta 码
    - encode_heap_path / decode_heap_path: 以每步保留比例为概率模型的堆路径编码
    - encode_bnb_run / decode_bnb_run: 分支定界采样的两段码 zeta(深度+1) ‖ 堆路径
    - sorted_uniform_encode / sorted_uniform_decode: 拒绝采样的排序均匀数编码

所有编码器自定界：多个码直接拼接后可以依次解码。
"""

from __future__ import annotations

import math
import struct
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np
from scipy import special

from .common_utils import get_logger
from .core_distributions import LB_E, ContinuousDistribution, TargetProposalPair
from .poisson_process import arrival_location, extra_uniforms

logger = get_logger(__name__)

EULER_GAMMA = float(np.euler_gamma)
DEFAULT_N_MAX = 2 ** 32
_DIRECT_SUM_LIMIT = 10 ** 6
ESCAPE = 0


# ---------------------------------------------------------------------------
# 比特串
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BitString:
    """不可变比特串（MSB 优先），bits 为仅含 '0'/'1' 的字符串"""

    bits: str = ""

    def __post_init__(self):
        if self.bits.strip("01"):
            raise ValueError(f"bit string may only contain 0/1, got {self.bits[:32]!r}")

    def __len__(self) -> int:
        return len(self.bits)

    def __add__(self, other: "BitString") -> "BitString":
        return BitString(self.bits + other.bits)

    def __str__(self) -> str:
        return self.bits

    @classmethod
    def from_int(cls, value: int, width: int) -> "BitString":
        if width == 0:
            if value != 0:
                raise ValueError(f"value {value} does not fit in 0 bits")
            return cls("")
        if not 0 <= value < (1 << width):
            raise ValueError(f"value {value} does not fit in {width} bits")
        return cls(format(value, f"0{width}b"))

    @classmethod
    def concat(cls, parts: Iterable["BitString"]) -> "BitString":
        return cls("".join(p.bits for p in parts))

    def to_bytes(self) -> bytes:
        """8 字节小端比特数 + 打包字节（每字节 MSB 优先，末字节低位补 0）"""
        arr = np.frombuffer(self.bits.encode("ascii"), dtype=np.uint8) - ord("0")
        return struct.pack("<Q", len(self.bits)) + np.packbits(arr).tobytes()

    @classmethod
    def from_bytes(cls, payload: bytes) -> "BitString":
        if len(payload) < 8:
            raise ValueError("corrupt code: missing 8-byte length header")
        (n_bits,) = struct.unpack("<Q", payload[:8])
        body = payload[8:]
        if len(body) != (n_bits + 7) // 8:
            raise ValueError(f"corrupt code: {len(body)} bytes for {n_bits} bits")
        arr = np.unpackbits(np.frombuffer(body, dtype=np.uint8))[:n_bits]
        return cls((arr + ord("0")).astype(np.uint8).tobytes().decode("ascii"))

    def to_hex(self) -> str:
        return self.to_bytes().hex()

    @classmethod
    def from_hex(cls, text: str) -> "BitString":
        return cls.from_bytes(bytes.fromhex(text.strip()))


class BitReader:
    """顺序读取 BitString"""

    def __init__(self, bits: Union[BitString, str]):
        self.bits = bits.bits if isinstance(bits, BitString) else str(bits)
        self.pos = 0

    def read(self) -> int:
        if self.pos >= len(self.bits):
            raise ValueError("truncated code: read past the end of the bit string")
        bit = self.bits[self.pos]
        self.pos += 1
        return 1 if bit == "1" else 0

    def read_int(self, width: int) -> int:
        value = 0
        for _ in range(width):
            value = (value << 1) | self.read()
        return value

    @property
    def remaining(self) -> int:
        return len(self.bits) - self.pos


def _reader(source: Union[BitString, BitReader, str]) -> BitReader:
    return source if isinstance(source, BitReader) else BitReader(source)


# ---------------------------------------------------------------------------
# 精确区间编码
# ---------------------------------------------------------------------------

def _as_fraction(value) -> Fraction:
    return value if isinstance(value, Fraction) else Fraction(value)


class ExactIntervalCoder:
    """
    无限精度区间编码器

    push(lo, hi) 把当前区间 [low, low + width) 收缩到其子区间 [lo, hi)（相对坐标）。
    finalize() 选最小的 L 使某个长度 2^−L 的二进区间落在最终区间内，输出其 L 位下标。
    """

    def __init__(self):
        self.low = Fraction(0)
        self.width = Fraction(1)

    def push(self, lo, hi) -> None:
        lo, hi = _as_fraction(lo), _as_fraction(hi)
        if not 0 <= lo < hi <= 1:
            raise ValueError(f"sub-interval must satisfy 0 <= lo < hi <= 1, got [{lo}, {hi})")
        self.low += self.width * lo
        self.width *= hi - lo

    def finalize(self) -> BitString:
        low, high = self.low, self.low + self.width
        num, den = low.numerator, low.denominator
        length = 0
        while True:
            scale = 1 << length
            k = -((-num * scale) // den)
            if Fraction(k + 1, scale) <= high:
                return BitString.from_int(k, length)
            length += 1


class ExactIntervalDecoder:
    """
    与 ExactIntervalCoder 配对的增量解码器

    只在已读前缀对应的二进区间完全落入某个符号子区间时才确定该符号，
    因此读取的比特数恰为编码器输出的 L 位。
    """

    def __init__(self, source: Union[BitString, BitReader, str]):
        self.reader = _reader(source)
        self.low = Fraction(0)
        self.width = Fraction(1)
        self.code_low = Fraction(0)
        self.code_width = Fraction(1)

    def _read_bit(self) -> None:
        bit = self.reader.read()
        self.code_width /= 2
        if bit:
            self.code_low += self.code_width

    def decode_symbol(self, locate: Callable[[Fraction], int],
                      bounds: Callable[[int], Tuple[Fraction, Fraction]]) -> int:
        """
        参数:
            locate: 相对位置 x ∈ [0,1) → 包含 x 的符号
            bounds: 符号 → 相对子区间 [lo, hi)
        """
        while True:
            rel_lo = (self.code_low - self.low) / self.width
            rel_hi = (self.code_low + self.code_width - self.low) / self.width
            symbol = locate(min(max(rel_lo, Fraction(0)), Fraction(1)))
            lo, hi = bounds(symbol)
            if lo <= rel_lo and rel_hi <= hi:
                self.low += self.width * lo
                self.width *= hi - lo
                return symbol
            self._read_bit()

    def finish(self) -> None:
        """读到前缀区间落入最终区间为止"""
        while not (self.low <= self.code_low and self.code_low + self.code_width <= self.low + self.width):
            self._read_bit()


# ---------------------------------------------------------------------------
# Elias gamma / delta
# ---------------------------------------------------------------------------

def elias_gamma_encode(n: int) -> BitString:
    """⌊lb n⌋ 个 0 后接 n 的二进制，长度 2⌊lb n⌋ + 1"""
    n = int(n)
    if n < 1:
        raise ValueError(f"elias gamma needs n >= 1, got {n}")
    return BitString("0" * (n.bit_length() - 1) + format(n, "b"))


def elias_gamma_decode(source: Union[BitString, BitReader, str]) -> int:
    reader = _reader(source)
    zeros = 0
    while reader.read() == 0:
        zeros += 1
    return (1 << zeros) | reader.read_int(zeros)


def elias_delta_encode(n: int) -> BitString:
    n = int(n)
    if n < 1:
        raise ValueError(f"elias delta needs n >= 1, got {n}")
    width = n.bit_length()
    return elias_gamma_encode(width) + BitString(format(n, "b")[1:])


def elias_delta_decode(source: Union[BitString, BitReader, str]) -> int:
    reader = _reader(source)
    width = elias_gamma_decode(reader)
    return (1 << (width - 1)) | reader.read_int(width - 1)


# ---------------------------------------------------------------------------
# zeta 编码
# ---------------------------------------------------------------------------

def _mpf_to_fraction(x: mpmath.mpf) -> Fraction:
    man, exp = int(x.man), int(x.exp)
    return Fraction(man * (1 << exp)) if exp >= 0 else Fraction(man, 1 << -exp)


class ZetaModel:
    """
    截断 zeta 分布 q(k) ∝ k^−α（1 ≤ k ≤ n_max）

    累积和 Σ_{k≤n} k^−α = ζ(α) − ζ(α, n+1) 用 mpmath 高精度计算后精确转成有理数，
    保证编解码两端得到相同且严格单调的区间。escape=True 时归一化常数取 ζ(α)，
    [cum(n_max)/ζ(α), 1) 作为逃逸区间，逃逸后用 Elias delta 直接编码 n。
    """

    def __init__(self, alpha: float, n_max: int = DEFAULT_N_MAX, escape: bool = True):
        alpha = float(alpha)
        if not (alpha > 1.0 and math.isfinite(alpha)):
            raise ValueError(f"zeta exponent must be > 1, got {alpha}")
        if n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {n_max}")
        self.alpha = alpha
        self.n_max = int(n_max)
        self.escape = escape
        self._ctx = mpmath.MPContext()
        self._ctx.dps = 30 + int(math.ceil(alpha * math.log10(self.n_max + 1)))
        self._lock = threading.Lock()
        self._cum_cache = {}
        with self._lock:
            self._zeta_alpha = self._ctx.zeta(self._ctx.mpf(alpha))
        self.total = _mpf_to_fraction(self._zeta_alpha) if escape else self.cum(self.n_max)
        self._cap = self.cum(self.n_max) / self.total

    def cum(self, n: int) -> Fraction:
        if n <= 0:
            return Fraction(0)
        cached = self._cum_cache.get(n)
        if cached is not None:
            return cached
        with self._lock:
            ctx = self._ctx
            value = self._zeta_alpha - ctx.zeta(ctx.mpf(self.alpha), n + 1)
            out = _mpf_to_fraction(ctx.mpf(value))
        if len(self._cum_cache) < 4096:
            self._cum_cache[n] = out
        return out

    def bounds(self, symbol: int) -> Tuple[Fraction, Fraction]:
        if symbol == ESCAPE:
            return self._cap, Fraction(1)
        return self.cum(symbol - 1) / self.total, self.cum(symbol) / self.total

    def locate(self, x: Fraction) -> int:
        if self.escape and x >= self._cap:
            return ESCAPE
        lo, hi = 1, self.n_max
        while lo < hi:
            mid = (lo + hi) // 2
            if self.cum(mid) / self.total > x:
                hi = mid
            else:
                lo = mid + 1
        return lo


@lru_cache(maxsize=64)
def get_zeta_model(alpha: float, n_max: int = DEFAULT_N_MAX, escape: bool = True) -> ZetaModel:
    return ZetaModel(alpha, n_max, escape)


def zeta_encode(n: int, alpha: float, n_max: int = DEFAULT_N_MAX, escape: bool = True) -> BitString:
    """
    在截断 zeta 分布下编码正整数 n

    参数:
        n: ≥ 1
        alpha: 指数 α > 1
        n_max: 截断上限
        escape: n > n_max 时是否走逃逸符号 + Elias delta

    异常:
        ValueError("index exceeds cap ..."): escape=False 且 n > n_max
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"zeta code needs n >= 1, got {n}")
    model = get_zeta_model(float(alpha), int(n_max), bool(escape))
    coder = ExactIntervalCoder()
    if n > model.n_max:
        if not escape:
            raise ValueError(f"index exceeds cap: {n} > n_max={model.n_max}")
        coder.push(*model.bounds(ESCAPE))
        return coder.finalize() + elias_delta_encode(n)
    coder.push(*model.bounds(n))
    return coder.finalize()


def zeta_decode(source: Union[BitString, BitReader, str], alpha: float,
                n_max: int = DEFAULT_N_MAX, escape: bool = True) -> int:
    model = get_zeta_model(float(alpha), int(n_max), bool(escape))
    reader = _reader(source)
    decoder = ExactIntervalDecoder(reader)
    symbol = decoder.decode_symbol(model.locate, model.bounds)
    decoder.finish()
    if symbol == ESCAPE:
        return elias_delta_decode(reader)
    return symbol


@lru_cache(maxsize=256)
def zeta_normalizer(alpha: float, n_max: int) -> float:
    """Z = Σ_{k≤n_max} k^−α：前 10⁶ 项直接求和，其余用 Hurwitz zeta 补尾"""
    m = min(int(n_max), _DIRECT_SUM_LIMIT)
    ks = np.arange(1, m + 1, dtype=float)
    z = float(np.sum(ks[::-1] ** -alpha))
    if n_max > m:
        z += float(special.zeta(alpha, m + 1) - special.zeta(alpha, n_max + 1))
    return z


def zeta_ideal_length(n: int, alpha: float, n_max: int = DEFAULT_N_MAX) -> float:
    """−lb q(n) = α·lb n + lb Z"""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return alpha * math.log2(n) + math.log2(zeta_normalizer(alpha, n_max))


def global_index_alpha(info_bits: float) -> float:
    """全局序号的 zeta 指数 α = 1 + 1/(I + 1)"""
    return 1.0 + 1.0 / (max(info_bits, 0.0) + 1.0)


def bnb_depth_alpha(divergence_bits: float, algorithm: str = "bnb-gprs") -> float:
    """
    深度码的 zeta 指数 α = 1 + 1/(E[D] 上界 + 2)

    GPRS: E[D] ≤ (D_KL + 2 + (1+γ)·lb e)/(lb e − 1)
    A*:   E[D] ≤ (lb M + 2)/(lb e − 1)，此时 divergence_bits 传 lb M
    """
    div = max(float(divergence_bits), 0.0)
    if algorithm in ("bnb-gprs", "gprs"):
        bound = (div + 2.0 + (1.0 + EULER_GAMMA) * LB_E) / (LB_E - 1.0)
    elif algorithm in ("bnb-astar", "astar"):
        bound = (div + 2.0) / (LB_E - 1.0)
    else:
        raise ValueError(f"unknown branch-and-bound algorithm {algorithm!r}")
    return 1.0 + 1.0 / (bound + 2.0)


def sorted_uniform_alpha(info_bits: float) -> float:
    """排序均匀数秩的 zeta 指数 α = 1 + 1/(I + lb 2.5)"""
    return 1.0 + 1.0 / (max(info_bits, 0.0) + math.log2(2.5))


# ---------------------------------------------------------------------------
# 堆路径与分支定界两段码
# ---------------------------------------------------------------------------

def _left_probability(fraction: float, bit: int) -> Fraction:
    f = Fraction(fraction)
    if not 0 < f < 1:
        raise ValueError(f"step fraction must lie in (0, 1), got {fraction}")
    return f if bit == 0 else 1 - f


def encode_heap_path(fractions: Sequence[float], path_bits: Sequence[int]) -> BitString:
    """
    以每步保留比例为概率对路径比特做精确区间编码

    参数:
        fractions: 每步所走一侧的概率 P(Bᵈ⁺¹)/P(Bᵈ)
        path_bits: 路径比特；比特 0 对应区间 [0, p_left)，比特 1 对应 [p_left, 1)
    """
    if len(fractions) < len(path_bits):
        raise ValueError(f"need one fraction per path bit ({len(fractions)} < {len(path_bits)})")
    coder = ExactIntervalCoder()
    for frac, bit in zip(fractions, path_bits):
        p_left = _left_probability(frac, bit)
        if bit == 0:
            coder.push(0, p_left)
        else:
            coder.push(p_left, 1)
    return coder.finalize()


def decode_heap_path(source: Union[BitString, BitReader, str], depth: int,
                     mass_oracle: Callable[[int, Tuple[int, ...]], float]) -> Tuple[int, ...]:
    """
    参数:
        source: 码流
        depth: 路径长度
        mass_oracle: (d, 已解出的前缀) → 第 d 步左侧概率
    """
    decoder = ExactIntervalDecoder(_reader(source))
    path: List[int] = []
    for d in range(depth):
        p_left = _as_fraction(mass_oracle(d, tuple(path)))
        if not 0 < p_left < 1:
            raise ValueError(f"step fraction must lie in (0, 1), got {p_left}")
        bit = decoder.decode_symbol(lambda x: 0 if x < p_left else 1,
                                    lambda s: (Fraction(0), p_left) if s == 0 else (p_left, Fraction(1)))
        path.append(bit)
    decoder.finish()
    return tuple(path)


def encode_bnb_run(run, depth_alpha: float, n_max: int = DEFAULT_N_MAX) -> BitString:
    """两段码：zeta(δ + 1) ‖ 堆路径"""
    head = zeta_encode(run.depth + 1, depth_alpha, n_max)
    return head + encode_heap_path(run.per_step_fraction[:run.depth], run.path_bits)


def decode_bnb_run(source: Union[BitString, BitReader, str], seed,
                   pair_or_proposal: Union[TargetProposalPair, ContinuousDistribution],
                   depth_alpha: float, n_max: int = DEFAULT_N_MAX) -> Tuple[int, Tuple[int, ...], float]:
    """
    返回:
        (depth, path_bits, sample)
    """
    from .samplers_bnb import branch_split_uniforms, decode_bnb

    reader = _reader(source)
    depth = zeta_decode(reader, depth_alpha, n_max) - 1
    uniforms = branch_split_uniforms(seed, depth)
    path = decode_heap_path(reader, depth, lambda d, _prefix: uniforms[d])
    return depth, path, decode_bnb(seed, depth, path, pair_or_proposal)


# ---------------------------------------------------------------------------
# 并行序号编码
# ---------------------------------------------------------------------------

def thread_index_width(threads: int) -> int:
    return (int(threads) - 1).bit_length()


def encode_parallel_index(thread_tag: Tuple[int, int], threads: int, alpha: float,
                          n_max: int = DEFAULT_N_MAX) -> BitString:
    """⌈lb J⌉ 位线程号 ‖ zeta(N_j)"""
    j, n = thread_tag
    return BitString.from_int(int(j), thread_index_width(threads)) + zeta_encode(n, alpha, n_max)


def decode_parallel_index(source: Union[BitString, BitReader, str], threads: int, alpha: float,
                          n_max: int = DEFAULT_N_MAX) -> Tuple[int, int]:
    reader = _reader(source)
    j = reader.read_int(thread_index_width(threads))
    return j, zeta_decode(reader, alpha, n_max)


# ---------------------------------------------------------------------------
# 排序均匀数编码（拒绝采样）
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SortedUniformCode:
    """L = ⌈lb N⌉，J′ = U_N 在前 2^L 个接受均匀数中的秩"""

    L: int
    rank: int
    bits: BitString


def sorted_uniform_encode(seed, pair: TargetProposalPair, M: Optional[float], info_bits: float,
                          run=None) -> SortedUniformCode:
    """
    参数:
        seed: 种子
        pair: 目标/提议分布对
        M: 拒绝采样上界
        info_bits: 计算 zeta 指数用的信息量 I（比特）
        run: 已有的拒绝采样结果（缺省时重新运行）

    码: EliasGamma(L + 1) ‖ zeta(J′; α = 1 + 1/(I + lb 2.5), n_max = 2^L)
    """
    if run is None:
        from .samplers_global import rejection_sample
        run = rejection_sample(pair, M, seed)
    n = int(run.selected_index)
    L = (n - 1).bit_length()
    window = 1 << L
    us = extra_uniforms(seed, window)
    u_n = us[n - 1]
    idx = np.arange(1, window + 1)
    rank = 1 + int(np.count_nonzero((us < u_n) | ((us == u_n) & (idx < n))))
    bits = elias_gamma_encode(L + 1) + zeta_encode(rank, sorted_uniform_alpha(info_bits), window, escape=False)
    return SortedUniformCode(L, rank, bits)


def sorted_uniform_decode(source: Union[BitString, BitReader, str], seed,
                          proposal: ContinuousDistribution, info_bits: float) -> Tuple[int, float]:
    """
    返回:
        (N, sample)
    """
    reader = _reader(source)
    L = elias_gamma_decode(reader) - 1
    window = 1 << L
    rank = zeta_decode(reader, sorted_uniform_alpha(info_bits), window, escape=False)
    order = np.argsort(extra_uniforms(seed, window), kind="stable")
    n = int(order[rank - 1]) + 1
    return n, arrival_location(seed, n, proposal)


# ---------------------------------------------------------------------------
# 界
# ---------------------------------------------------------------------------

def geometric_log_bound(p: float) -> float:
    """K ∼ Geom(p) 时 E[lb K] ≤ e^p·lb(1 + 1/p)"""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must be in (0, 1], got {p}")
    return math.exp(p) * math.log2(1.0 + 1.0 / p)


def zeta_entropy_bound(mean_lb: float) -> float:
    """E[lb N] + lb(E[lb N] + 1) + 1"""
    return mean_lb + math.log2(mean_lb + 1.0) + 1.0
