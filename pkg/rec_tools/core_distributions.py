"""
一维连续分布与目标/提议分布对

功能描述:
    - ContinuousDistribution: 高斯 / 拉普拉斯 / 均匀分布，提供 log_density、cdf、sf、quantile、isf
    - TargetProposalPair: 目标 Q 与提议 P，附带对数密度比、众数点与上界 M
    - 区间截断分位数 quantile_restricted 与区间质量 interval_mass（BnB 分支重参数化使用）
    - 实验构造器：AWGN 信道对、固定 KL / D∞ 的 Lambert-W 构造、过度分散提议分布

所有内部对数均为自然对数（nats），只有在报告边界才换算为比特。
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import optimize, special

ArrayLike = Union[float, np.ndarray]

LN2 = math.log(2.0)
LB_E = 1.0 / LN2
_SQRT_2PI = math.sqrt(2.0 * math.pi)
_MIN_MASS = 1e-300
# 区间质量相对端点尾概率损失超过 6 位有效数字时改用数值积分
_CANCELLATION = 1e-6
_GL_NODES, _GL_WEIGHTS = leggauss(16)

GAUSSIAN = "gaussian"
LAPLACE = "laplace"
UNIFORM = "uniform"


# ---------------------------------------------------------------------------
# 标准正态：ndtr / ndtri + 一步牛顿修正
# ---------------------------------------------------------------------------

def _std_normal_pdf(z: ArrayLike) -> ArrayLike:
    return np.exp(-0.5 * np.square(z)) / _SQRT_2PI


def _std_normal_lower_quantile(q: ArrayLike) -> ArrayLike:
    """q <= 0.5 时的标准正态分位数（下尾精度）"""
    x = special.ndtri(q)
    with np.errstate(divide="ignore", invalid="ignore"):
        step = (special.ndtr(x) - q) / _std_normal_pdf(x)
    step = np.where(np.isfinite(step), step, 0.0)
    return x - step


def std_normal_quantile(p: ArrayLike) -> ArrayLike:
    """标准正态分位数；上半部分利用对称性在尾部空间计算"""
    p = np.asarray(p, dtype=float)
    upper = p > 0.5
    q = np.where(upper, 1.0 - p, p)
    x = _std_normal_lower_quantile(q)
    out = np.where(upper, -x, x)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class ContinuousDistribution:
    """
    一维连续分布

    kind 取值:
        - "gaussian": params = (mean, variance)
        - "laplace":  params = (location, scale)
        - "uniform":  params = (lo, hi)
    """

    kind: str
    params: Tuple[float, float]

    def __post_init__(self):
        a, b = (float(v) for v in self.params)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ValueError(f"{self.kind} parameters must be finite, got {self.params}")
        if self.kind in (GAUSSIAN, LAPLACE) and b <= 0.0:
            raise ValueError(f"{self.kind} needs a positive second parameter, got {b}")
        if self.kind == UNIFORM and not a < b:
            raise ValueError(f"uniform needs lo < hi, got {self.params}")
        if self.kind not in (GAUSSIAN, LAPLACE, UNIFORM):
            raise ValueError(f"unknown distribution kind: {self.kind}")
        object.__setattr__(self, "params", (a, b))

    # 构造器
    @classmethod
    def gaussian(cls, mean: float, variance: float) -> "ContinuousDistribution":
        return cls(GAUSSIAN, (mean, variance))

    @classmethod
    def laplace(cls, location: float, scale: float) -> "ContinuousDistribution":
        return cls(LAPLACE, (location, scale))

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "ContinuousDistribution":
        return cls(UNIFORM, (lo, hi))

    # 基本量
    @property
    def loc(self) -> float:
        a, b = self.params
        return 0.5 * (a + b) if self.kind == UNIFORM else a

    @property
    def scale(self) -> float:
        a, b = self.params
        if self.kind == GAUSSIAN:
            return math.sqrt(b)
        if self.kind == LAPLACE:
            return b
        return b - a

    @property
    def median(self) -> float:
        return self.loc

    def describe(self) -> str:
        a, b = self.params
        tag = {GAUSSIAN: "gauss", LAPLACE: "laplace", UNIFORM: "uniform"}[self.kind]
        return f"{tag}:{a:g},{b:g}"

    # 密度与分布函数（标量或 numpy 数组）
    def log_density(self, y: ArrayLike) -> ArrayLike:
        a, b = self.params
        y = np.asarray(y, dtype=float)
        if self.kind == GAUSSIAN:
            out = -0.5 * math.log(2.0 * math.pi * b) - np.square(y - a) / (2.0 * b)
        elif self.kind == LAPLACE:
            out = -math.log(2.0 * b) - np.abs(y - a) / b
        else:
            inside = (y >= a) & (y <= b)
            out = np.where(inside, -math.log(b - a), -np.inf)
        return out[()] if np.ndim(out) == 0 else out

    def density(self, y: ArrayLike) -> ArrayLike:
        return np.exp(self.log_density(y))

    def cdf(self, y: ArrayLike) -> ArrayLike:
        a, b = self.params
        y = np.asarray(y, dtype=float)
        if self.kind == GAUSSIAN:
            out = special.ndtr((y - a) / math.sqrt(b))
        elif self.kind == LAPLACE:
            z = (y - a) / b
            with np.errstate(over="ignore"):
                out = np.where(z < 0.0, 0.5 * np.exp(np.minimum(z, 0.0)),
                               1.0 - 0.5 * np.exp(-np.maximum(z, 0.0)))
        else:
            out = np.clip((y - a) / (b - a), 0.0, 1.0)
        return out[()] if np.ndim(out) == 0 else out

    def sf(self, y: ArrayLike) -> ArrayLike:
        """生存函数 1 - cdf，在上尾保持相对精度"""
        a, b = self.params
        y = np.asarray(y, dtype=float)
        if self.kind == GAUSSIAN:
            out = special.ndtr(-(y - a) / math.sqrt(b))
        elif self.kind == LAPLACE:
            z = (y - a) / b
            out = np.where(z > 0.0, 0.5 * np.exp(-np.maximum(z, 0.0)),
                           1.0 - 0.5 * np.exp(np.minimum(z, 0.0)))
        else:
            out = np.clip((b - y) / (b - a), 0.0, 1.0)
        return out[()] if np.ndim(out) == 0 else out

    def quantile(self, p: ArrayLike) -> ArrayLike:
        a, b = self.params
        p = np.asarray(p, dtype=float)
        if self.kind == GAUSSIAN:
            out = a + math.sqrt(b) * std_normal_quantile(p)
        elif self.kind == LAPLACE:
            with np.errstate(divide="ignore"):
                lower = a + b * np.log(2.0 * np.minimum(p, 0.5))
                upper = a - b * np.log(2.0 * (1.0 - np.maximum(p, 0.5)))
            out = np.where(p <= 0.5, lower, upper)
        else:
            out = a + p * (b - a)
        return out[()] if np.ndim(out) == 0 else out

    def isf(self, s: ArrayLike) -> ArrayLike:
        """上尾分位数：返回 y 使 sf(y) = s"""
        a, b = self.params
        s = np.asarray(s, dtype=float)
        if self.kind == GAUSSIAN:
            out = a - math.sqrt(b) * std_normal_quantile(s)
        elif self.kind == LAPLACE:
            with np.errstate(divide="ignore"):
                upper = a - b * np.log(2.0 * np.minimum(s, 0.5))
                lower = a + b * np.log(2.0 * (1.0 - np.maximum(s, 0.5)))
            out = np.where(s <= 0.5, upper, lower)
        else:
            out = b - s * (b - a)
        return out[()] if np.ndim(out) == 0 else out

    def same_law(self, other: "ContinuousDistribution") -> bool:
        return self.kind == other.kind and self.params == other.params


# ---------------------------------------------------------------------------
# 区间质量与截断分位数
# ---------------------------------------------------------------------------

def _gl_mass(dist: ContinuousDistribution, lo: float, hi: float) -> float:
    """窄区间上的 16 点 Gauss-Legendre 密度积分（拉普拉斯在峰值处分段）"""
    if dist.kind == LAPLACE and lo < dist.loc < hi:
        return _gl_mass(dist, lo, dist.loc) + _gl_mass(dist, dist.loc, hi)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    return float(half * np.dot(_GL_WEIGHTS, dist.density(mid + half * _GL_NODES)))


def _interval_mass_detail(dist: ContinuousDistribution, lo: float, hi: float) -> Tuple[float, bool]:
    """返回 (质量, 是否走窄区间积分路径)"""
    if not hi > lo:
        return 0.0, False
    med = dist.median
    if lo >= med:
        a, b = float(dist.sf(lo)), float(dist.sf(hi))
        mass = a - b
        scale = a
    elif hi <= med:
        a, b = float(dist.cdf(hi)), float(dist.cdf(lo))
        mass = a - b
        scale = a
    else:
        mass = 1.0 - float(dist.cdf(lo)) - float(dist.sf(hi))
        scale = 1.0
    if math.isfinite(lo) and math.isfinite(hi) and mass < _CANCELLATION * scale:
        return min(max(_gl_mass(dist, lo, hi), 0.0), 1.0), True
    return min(max(mass, 0.0), 1.0), False


def interval_mass(dist: ContinuousDistribution, lo: float, hi: float) -> float:
    """
    区间 (lo, hi] 的概率质量

    参数:
        dist: 分布
        lo, hi: 区间端点，可为 ±inf

    返回:
        float: cdf(hi) - cdf(lo)，截断到 [0, 1]；退化区间返回 0
    """
    return _interval_mass_detail(dist, lo, hi)[0]


def _narrow_inverse(dist: ContinuousDistribution, lo: float, hi: float, mass: float, u: float) -> float:
    target = mass * u
    y = lo + u * (hi - lo)
    for _ in range(12):
        g = _gl_mass(dist, lo, y) - target
        if abs(g) <= 1e-15 * mass:
            break
        dens = float(dist.density(y))
        if dens <= 0.0:
            break
        y = min(max(y - g / dens, lo), hi)
    return y


def quantile_restricted(dist: ContinuousDistribution, lo: float, hi: float, u: float) -> float:
    """
    截断到 (lo, hi] 的广义逆变换 F⁻¹(F(lo) + (F(hi) − F(lo))·u)

    区间位于中位数右侧时在生存函数空间中计算，保证深层分支的尾部精度。
    (lo, hi) = (−∞, ∞) 时与 dist.quantile(u) 逐位相同。
    """
    u = float(u)
    if not math.isfinite(u) or not 0.0 <= u <= 1.0:
        raise ValueError(f"u must be a finite probability, got {u}")
    if not lo < hi:
        raise ValueError(f"empty restriction: ({lo}, {hi}]")
    mass, narrow = _interval_mass_detail(dist, lo, hi)
    if mass < _MIN_MASS:
        raise ValueError(f"empty restriction: mass {mass:.3g} on ({lo}, {hi}]")
    if narrow:
        y = _narrow_inverse(dist, lo, hi, mass, u)
    elif lo >= dist.median:
        y = float(dist.isf(float(dist.sf(lo)) - mass * u))
    else:
        y = float(dist.quantile(float(dist.cdf(lo)) + mass * u))
    return min(max(y, lo), hi)


# ---------------------------------------------------------------------------
# 目标/提议分布对
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TargetProposalPair:
    """
    目标 Q 与提议 P

    字段:
        target, proposal: 分布
        mode_point: 密度比 r = dQ/dP 的最大值点（未知时为 nan）
        sup_bound: M ≥ ‖r‖∞（自然尺度），无界或未知时为 None
    """

    target: ContinuousDistribution
    proposal: ContinuousDistribution
    mode_point: float
    sup_bound: Optional[float] = None
    notes: Tuple[str, ...] = field(default=(), compare=False)

    def log_ratio(self, y: ArrayLike) -> ArrayLike:
        lq = self.target.log_density(y)
        lp = self.proposal.log_density(y)
        with np.errstate(invalid="ignore"):
            out = np.where(np.isneginf(lq), -np.inf, lq - lp)
        return out[()] if np.ndim(out) == 0 else out

    def ratio(self, y: ArrayLike) -> ArrayLike:
        return np.exp(self.log_ratio(y))

    @property
    def identical(self) -> bool:
        return self.target.same_law(self.proposal)

    @property
    def bounded(self) -> bool:
        return self.sup_bound is not None and math.isfinite(self.sup_bound)

    def describe(self) -> str:
        return f"Q={self.target.describe()} P={self.proposal.describe()}"


def _gaussian_mode_and_log_sup(q: ContinuousDistribution, p: ContinuousDistribution) -> Tuple[float, float]:
    (mq, vq), (mp, vp) = q.params, p.params
    nu = (mq * vp - mp * vq) / (vp - vq)
    log_sup = 0.5 * math.log(vp / vq) + (mq - mp) ** 2 / (2.0 * (vp - vq))
    return nu, log_sup


def grid_argmax_log_ratio(pair: TargetProposalPair, n_grid: int = 4001) -> Tuple[float, float]:
    """
    在提议分布分位数网格上搜索 log r 的最大值，再用黄金分割法精修

    返回:
        (argmax, max_log_ratio)
    """
    grid_p = np.linspace(1e-9, 1.0 - 1e-9, n_grid)
    ys = np.unique(np.concatenate([pair.proposal.quantile(grid_p), pair.target.quantile(grid_p)]))
    vals = pair.log_ratio(ys)
    i = int(np.argmax(vals))
    if 0 < i < len(ys) - 1 and vals[i] > vals[i - 1] and vals[i] > vals[i + 1]:
        res = optimize.minimize_scalar(lambda t: -float(pair.log_ratio(t)),
                                       bracket=(ys[i - 1], ys[i], ys[i + 1]), method="golden")
        if res.success and -res.fun >= vals[i]:
            return float(res.x), float(-res.fun)
    return float(ys[i]), float(vals[i])


def make_pair(target: ContinuousDistribution, proposal: ContinuousDistribution) -> TargetProposalPair:
    """
    构造目标/提议分布对，尽可能给出闭式众数与上界

    支持的闭式:
        - 同分布: r ≡ 1
        - 高斯/高斯（目标方差更小）
        - 拉普拉斯/拉普拉斯（目标尺度更小）
        - 均匀 ⊆ 均匀
    其余组合: 无上界，众数由网格搜索得到（不可用于 BnB）
    """
    if target.same_law(proposal):
        return TargetProposalPair(target, proposal, target.median, 1.0)

    if target.kind == GAUSSIAN and proposal.kind == GAUSSIAN:
        vq, vp = target.params[1], proposal.params[1]
        if vq < vp:
            nu, log_sup = _gaussian_mode_and_log_sup(target, proposal)
            return TargetProposalPair(target, proposal, nu, math.exp(log_sup))
        return TargetProposalPair(target, proposal, math.nan, None, ("unbounded ratio",))

    if target.kind == LAPLACE and proposal.kind == LAPLACE:
        (mq, bq), (mp, bp) = target.params, proposal.params
        if bq < bp:
            log_sup = math.log(bp / bq) + abs(mq - mp) / bp
            return TargetProposalPair(target, proposal, mq, math.exp(log_sup))
        return TargetProposalPair(target, proposal, math.nan, None, ("unbounded ratio",))

    if target.kind == UNIFORM and proposal.kind == UNIFORM:
        (lq, hq), (lp, hp) = target.params, proposal.params
        if lp <= lq and hq <= hp:
            return TargetProposalPair(target, proposal, 0.5 * (lq + hq), (hp - lp) / (hq - lq))
        return TargetProposalPair(target, proposal, math.nan, None, ("target not dominated",))

    mode, _ = grid_argmax_log_ratio(TargetProposalPair(target, proposal, math.nan, None))
    return TargetProposalPair(target, proposal, mode, None, ("numeric mode",))


# ---------------------------------------------------------------------------
# 实验构造器
# ---------------------------------------------------------------------------

def awgn_mutual_information_bits(sigma2: float, rho2: float) -> float:
    """I(x; y) = ½·lb((σ² + ρ²)/ρ²)"""
    return 0.5 * math.log2((sigma2 + rho2) / rho2)


def awgn_sigma2_for_mi(mi_bits: float, rho2: float = 1.0) -> float:
    """由互信息反解源方差 σ²"""
    return rho2 * math.expm1(2.0 * mi_bits * LN2)


def make_awgn_pair(x: float, sigma2: float, rho2: float, overdispersion: float = 0.0) -> TargetProposalPair:
    """
    AWGN 信道的目标/提议分布对

    参数:
        x: 源符号
        sigma2: 源方差 σ²
        rho2: 噪声方差 ρ²
        overdispersion: 提议分布额外方差 Δ²（默认 0，即边缘分布 N(0, σ² + ρ²)）

    返回:
        TargetProposalPair: Q = N(x, ρ²)，P = N(0, σ² + ρ² + Δ²)，
        众数 ν = x·(σ²+ρ²+Δ²)/(σ²+Δ²)，上界为闭式 ‖r‖∞
    """
    if not (sigma2 > 0.0 and rho2 > 0.0 and math.isfinite(sigma2) and math.isfinite(rho2)):
        raise ValueError(f"sigma2 and rho2 must be finite and positive, got {sigma2}, {rho2}")
    if overdispersion < 0.0:
        raise ValueError(f"overdispersion must be >= 0, got {overdispersion}")
    return make_pair(ContinuousDistribution.gaussian(float(x), rho2),
                     ContinuousDistribution.gaussian(0.0, sigma2 + rho2 + overdispersion))


def overdispersion_opt(sigma2: float, rho2: float) -> float:
    """Δ²_opt = σ·sqrt(ρ² + σ²)"""
    if sigma2 < 0.0 or rho2 <= 0.0:
        raise ValueError(f"need sigma2 >= 0 and rho2 > 0, got {sigma2}, {rho2}")
    return math.sqrt(sigma2) * math.sqrt(rho2 + sigma2)


def overdispersed_proposal(sigma2: float, rho2: float) -> ContinuousDistribution:
    """返回过度分散的提议分布 N(0, σ² + ρ² + Δ²_opt)"""
    return ContinuousDistribution.gaussian(0.0, sigma2 + rho2 + overdispersion_opt(sigma2, rho2))


def lambert_w0(x: float) -> float:
    """
    Lambert W 主分支 (w ≥ −1)

    先取 scipy.special.lambertw 的实部，再做一步 Halley 修正。
    """
    x = float(x)
    branch_point = -math.exp(-1.0)
    if not math.isfinite(x) or x < branch_point * (1.0 + 1e-15):
        raise ValueError(f"domain error: lambert_w0 needs x >= -1/e, got {x}")
    if x <= branch_point:
        return -1.0
    w = float(special.lambertw(x, 0).real)
    if w > -1.0 + 1e-6:
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denom != 0.0 and math.isfinite(denom):
            w -= f / denom
    return w


def make_fixed_kl_pair(kappa_bits: float, delta_bits: float) -> TargetProposalPair:
    """
    构造 P = N(0,1)、Q = N(μ_δ, σ²_δ)，使 D_KL(Q‖P) = κ 且 D∞(Q‖P) = δ（比特）

    b = 2ln2·δ − 1
    σ²_δ = exp(W((b − 2ln2·κ)·e^b) − b)
    μ_δ = sqrt(2(1 − σ²_δ)(ln2·δ + ½ ln σ²_δ))

    不可行的 (κ, δ) 抛出 ValueError("infeasible (κ, δ) ...")
    """
    kappa, delta = float(kappa_bits), float(delta_bits)
    if not (kappa > 0.0 and delta >= kappa):
        raise ValueError(f"infeasible (κ, δ) = ({kappa}, {delta}): need δ ≥ κ > 0")
    b = 2.0 * LN2 * delta - 1.0
    arg = (b - 2.0 * LN2 * kappa) * math.exp(b)
    try:
        w = lambert_w0(arg)
    except ValueError:
        raise ValueError(f"infeasible (κ, δ) = ({kappa}, {delta}): Lambert-W argument {arg:.4g} < -1/e")
    log_sigma2 = w - b
    sigma2 = math.exp(log_sigma2)
    operand = 2.0 * (-math.expm1(log_sigma2)) * (LN2 * delta + 0.5 * log_sigma2)
    if not (0.0 < sigma2 < 1.0) or operand < 0.0:
        raise ValueError(f"infeasible (κ, δ) = ({kappa}, {delta}): sqrt operand {operand:.4g}")
    mu = math.sqrt(operand)
    return make_pair(ContinuousDistribution.gaussian(mu, sigma2), ContinuousDistribution.gaussian(0.0, 1.0))


def parse_distribution(spec: str) -> ContinuousDistribution:
    """
    解析命令行分布描述

    格式: gauss:MEAN,VAR | laplace:LOC,SCALE | uniform:LO,HI
    """
    try:
        name, args = spec.strip().split(":", 1)
        a, b = (float(v) for v in args.split(","))
    except ValueError:
        raise ValueError(f"bad distribution spec {spec!r}; expected e.g. gauss:0,1")
    name = name.lower()
    if name in ("gauss", "gaussian", "normal"):
        return ContinuousDistribution.gaussian(a, b)
    if name == "laplace":
        return ContinuousDistribution.laplace(a, b)
    if name in ("uniform", "unif"):
        return ContinuousDistribution.uniform(a, b)
    raise ValueError(f"unknown distribution family {name!r}")
