"""
宽度函数、散度与 GPRS 伸缩函数

功能描述:
    - WidthFunction: w_P(h) = P[r(Y) ≥ h]、w_Q(h) = Q[r(Y) ≥ h] 及生存函数 S(h) = w_Q(h) − h·w_P(h)
    - width_gaussian / width_laplace: 闭式宽度函数；width_empirical: 分层蒙特卡洛宽度
    - kl_divergence / renyi_inf / csd: KL、Rényi-∞ 与信道模拟散度（均以比特返回）
    - csd_gap_product_gaussian: d 维乘积高斯的 D_CS − D_KL
    - ncx2_cdf: 非中心卡方分布函数（泊松混合级数）
    - solve_stretch: 积分收缩 ODE sha′ = w_Q(sha) − sha·w_P(sha) 并制表，得到 σ 与 σ⁻¹
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
import pandas as pd
from numpy.polynomial.legendre import leggauss
from scipy import integrate, interpolate, optimize, special, stats

from .common_utils import get_logger
from .core_distributions import (
    ArrayLike,
    GAUSSIAN,
    LAPLACE,
    LN2,
    UNIFORM,
    TargetProposalPair,
    grid_argmax_log_ratio,
)

logger = get_logger(__name__)

EULER_GAMMA = float(np.euler_gamma)
_U_FLOOR = -40.0


class QuadratureError(RuntimeError):
    """数值积分未达到要求精度"""

    def __init__(self, message: str, achieved_tol: float):
        super().__init__(f"{message} (achieved tolerance {achieved_tol:.3g})")
        self.achieved_tol = achieved_tol


# ---------------------------------------------------------------------------
# 特殊函数
# ---------------------------------------------------------------------------

def digamma(x: float) -> float:
    """ψ(x)，x > 0"""
    x = float(x)
    if not x > 0.0:
        raise ValueError(f"domain error: digamma needs x > 0, got {x}")
    return float(special.digamma(x))


def ncx2_cdf(x: ArrayLike, k: int, lam: float, tail: float = 1e-14) -> ArrayLike:
    """
    非中心卡方分布函数 P[χ²_k(λ) ≤ x]

    Σ_j Poisson(j; λ/2)·P[χ²_{k+2j} ≤ x]，j 从 0 起求和，只在泊松上尾概率低于 tail 处截断；
    低 j 项主导分布函数的下尾，不能丢弃
    """
    if k < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {k}")
    if lam < 0.0:
        raise ValueError(f"noncentrality must be >= 0, got {lam}")
    x_arr = np.maximum(np.asarray(x, dtype=float), 0.0)
    if lam == 0.0:
        out = special.chdtr(k, x_arr)
    else:
        half = 0.5 * lam
        j_hi = int(stats.poisson.isf(tail, half)) + 1
        js = np.arange(0, j_hi + 1)
        weights = stats.poisson.pmf(js, half)
        central = special.chdtr(k + 2.0 * js[:, None], x_arr.reshape(1, -1))
        out = (weights[:, None] * central).sum(axis=0).reshape(x_arr.shape)
        out = np.clip(out, 0.0, 1.0)
    return out[()] if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# 宽度函数
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WidthFunction:
    """
    宽度函数对 (w_P, w_Q)

    字段:
        w_p, w_q: h ↦ 概率，接受标量或数组
        source: closed_form_gaussian / closed_form_laplace / identity / empirical
        log_h_max: ln ‖r‖∞（宽度在其右侧为 0）
        breakpoints: 宽度函数的不光滑点（h 值），积分时作为分段点
        n_samples: 经验宽度的样本数
    """

    w_p: Callable[[ArrayLike], ArrayLike]
    w_q: Callable[[ArrayLike], ArrayLike]
    source: str
    log_h_max: float
    breakpoints: Tuple[float, ...] = ()
    n_samples: Optional[int] = None
    sorted_ratios: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def h_max(self) -> float:
        return math.exp(self.log_h_max) if self.log_h_max < 709.0 else math.inf

    def survival(self, h: ArrayLike) -> ArrayLike:
        """S(h) = w_Q(h) − h·w_P(h)"""
        return self.w_q(h) - np.asarray(h, dtype=float) * self.w_p(h)

    def knee(self) -> float:
        """w_P 首次降到 0.5 以下的 h"""
        def g(u):
            return float(self.w_p(math.exp(u))) - 0.5
        lo, hi = _U_FLOOR, self.log_h_max
        if g(lo) <= 0.0:
            return math.exp(lo)
        if g(hi) > 0.0:
            return self.h_max
        return math.exp(optimize.brentq(g, lo, hi, xtol=1e-12))


def _as_h(h: ArrayLike) -> np.ndarray:
    return np.asarray(h, dtype=float)


def _finish(out: np.ndarray) -> ArrayLike:
    return out[()] if np.ndim(out) == 0 else out


def _std_normal_interval(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Φ(b) − Φ(a)，按区间所在一侧选择 cdf 或 sf 相减"""
    right = a >= 0.0
    left = b <= 0.0
    mid = 1.0 - special.ndtr(a) - special.ndtr(-b)
    out = np.where(right, special.ndtr(-a) - special.ndtr(-b),
                   np.where(left, special.ndtr(b) - special.ndtr(a), mid))
    return np.clip(out, 0.0, 1.0)


def width_identity() -> WidthFunction:
    """Q = P：r ≡ 1，w_P = w_Q = 1[h ≤ 1]"""
    def w(h):
        return _finish(np.where(_as_h(h) <= 1.0, 1.0, 0.0))
    return WidthFunction(w, w, "identity", 0.0, (1.0,))


def _gaussian_standardized(pair: TargetProposalPair) -> Tuple[float, float]:
    q, p = pair.target, pair.proposal
    if q.kind != GAUSSIAN or p.kind != GAUSSIAN:
        raise ValueError("width_gaussian needs a Gaussian/Gaussian pair")
    (mq, vq), (mp, vp) = q.params, p.params
    return (mq - mp) / math.sqrt(vp), vq / vp


def _gaussian_width_1d(mu: float, s2: float) -> WidthFunction:
    one_minus = 1.0 - s2
    m = mu / one_minus
    s = math.sqrt(s2 / one_minus)
    sig = math.sqrt(s2)
    offset = -math.log(s2) + mu * mu / one_minus
    log_h_max = 0.5 * offset

    def _interval(h):
        h = _as_h(h)
        with np.errstate(divide="ignore"):
            t = np.where(h > 0.0, -2.0 * np.log(np.where(h > 0.0, h, 1.0)) + offset, np.inf)
        half = s * np.sqrt(np.maximum(t, 0.0))
        return t, m - half, m + half

    def w_p(h):
        t, a, b = _interval(h)
        return _finish(np.where(t >= 0.0, _std_normal_interval(a, b), 0.0))

    def w_q(h):
        t, a, b = _interval(h)
        return _finish(np.where(t >= 0.0, _std_normal_interval((a - mu) / sig, (b - mu) / sig), 0.0))

    return WidthFunction(w_p, w_q, "closed_form_gaussian", log_h_max)


def gaussian_product_width(mu_norm2: float, s2: float, d: int) -> WidthFunction:
    """
    d 维各向同性高斯宽度（P = N(0, I)，Q = N(μ, s²I)），通过非中心卡方分布函数计算

    参数:
        mu_norm2: ‖μ‖²
        s2: 目标方差 s² < 1
        d: 维数
    """
    if not 0.0 < s2 < 1.0:
        raise ValueError(f"unbounded ratio: product width needs 0 < sigma2 < 1, got {s2}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    one_minus = 1.0 - s2
    scale_p = s2 / one_minus
    lam_p = mu_norm2 / one_minus ** 2
    lam_q = mu_norm2 * s2 / one_minus ** 2
    offset = -d * math.log(s2) + mu_norm2 / one_minus

    def _t(h):
        h = _as_h(h)
        with np.errstate(divide="ignore"):
            return np.where(h > 0.0, -2.0 * np.log(np.where(h > 0.0, h, 1.0)) + offset, np.inf)

    def w_p(h):
        t = _t(h)
        val = ncx2_cdf(np.where(np.isfinite(t), np.maximum(t, 0.0) * scale_p, 0.0), d, lam_p)
        return _finish(np.where(t >= 0.0, np.where(np.isinf(t), 1.0, val), 0.0))

    def w_q(h):
        t = _t(h)
        val = ncx2_cdf(np.where(np.isfinite(t), np.maximum(t, 0.0) / one_minus, 0.0), d, lam_q)
        return _finish(np.where(t >= 0.0, np.where(np.isinf(t), 1.0, val), 0.0))

    return WidthFunction(w_p, w_q, "closed_form_gaussian", 0.5 * offset)


def width_gaussian(pair: TargetProposalPair) -> WidthFunction:
    """
    高斯/高斯宽度函数

    标准化后 μ̃ = (μ_Q − μ_P)/σ_P，σ̃² = σ_Q²/σ_P²；{r ≥ h} 是以 m̃ = μ̃/(1−σ̃²) 为中心、
    半径 s·sqrt(t) 的区间，其中 s² = σ̃²/(1−σ̃²)，t = −2 ln h − ln σ̃² + μ̃²/(1−σ̃²)。
    """
    if pair.identical:
        return width_identity()
    mu, s2 = _gaussian_standardized(pair)
    if s2 >= 1.0:
        raise ValueError(f"unbounded ratio: target variance ratio {s2:.6g} >= 1")
    return _gaussian_width_1d(mu, s2)


def _laplace_interval_mass(loc: float, scale: float, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    za = (a - loc) / scale
    zb = (b - loc) / scale
    with np.errstate(over="ignore"):
        cdf = lambda z: np.where(z < 0.0, 0.5 * np.exp(np.minimum(z, 0.0)), 1.0 - 0.5 * np.exp(-np.maximum(z, 0.0)))
        sf = lambda z: np.where(z > 0.0, 0.5 * np.exp(-np.maximum(z, 0.0)), 1.0 - 0.5 * np.exp(np.minimum(z, 0.0)))
        out = np.where(za >= 0.0, sf(za) - sf(zb),
                       np.where(zb <= 0.0, cdf(zb) - cdf(za), 1.0 - cdf(za) - sf(zb)))
    return np.clip(out, 0.0, 1.0)


def width_laplace(pair: TargetProposalPair) -> WidthFunction:
    """
    拉普拉斯/拉普拉斯宽度函数（标准化为 P = L(0,1)，Q = L(m, s)，0 < s < 1）

    c = ln(s·h)，分支点 c = −|m|/s：
        c ≤ −|m|/s:        w_P = 1 − exp(s·c/(1−s))·cosh(|m|/(1−s))
        −|m|/s < c ≤ |m|:  w_P = exp((s²·c − |m|)/(1−s²))·sinh(s(|m| − c)/(1−s²))
        c > |m|:           w_P = 0
    w_Q 为同一超水平区间在 Q 下的质量。
    """
    q, p = pair.target, pair.proposal
    if q.kind != LAPLACE or p.kind != LAPLACE:
        raise ValueError("width_laplace needs a Laplace/Laplace pair")
    (mq, bq), (mp, bp) = q.params, p.params
    m = abs(mq - mp) / bp
    s = bq / bp
    if not 0.0 < s < 1.0:
        raise ValueError(f"laplace width needs target scale ratio s in (0, 1), got {s:.6g}")
    one_m, one_p, one_m2 = 1.0 - s, 1.0 + s, 1.0 - s * s
    c_branch = -m / s

    def _c(h):
        h = _as_h(h)
        with np.errstate(divide="ignore"):
            return np.where(h > 0.0, np.log(s * np.where(h > 0.0, h, 1.0)), -np.inf)

    def w_p(h):
        c = _c(h)
        c1 = np.minimum(c, c_branch)
        with np.errstate(over="ignore", invalid="ignore"):
            # exp(s c/(1−s))·cosh(m/(1−s)) 写成两个指数之和
            tail = 0.5 * (np.exp((s * c1 + m) / one_m) + np.exp((s * c1 - m) / one_m))
            branch1 = 1.0 - tail
            c2 = np.clip(c, c_branch, m)
            x = (s * s * c2 - m) / one_m2
            y = s * (m - c2) / one_m2
            branch2 = 0.5 * np.exp(x + y) * -np.expm1(-2.0 * y)
        out = np.where(c <= c_branch, branch1, np.where(c <= m, branch2, 0.0))
        out = np.where(np.isneginf(c), 1.0, out)
        return _finish(np.clip(out, 0.0, 1.0))

    def w_q(h):
        c = _c(h)
        cc = np.clip(c, -1e300, m)
        hi = (m - s * cc) / one_m
        lo = np.where(cc >= c_branch, (s * cc + m) / one_p, (s * cc + m) / one_m)
        mass = _laplace_interval_mass(m, s, lo, hi)
        out = np.where(c > m, 0.0, np.where(np.isneginf(c), 1.0, mass))
        return _finish(out)

    log_h_max = m - math.log(s)
    h_branch = math.exp(c_branch) / s
    return WidthFunction(w_p, w_q, "closed_form_laplace", log_h_max, (h_branch,))


def width_empirical(pair: TargetProposalPair, n: int) -> WidthFunction:
    """
    经验宽度函数：在 P、Q 的分位数网格 (i − ½)/n 上计算密度比，取生存比例
    """
    if n < 1000:
        raise ValueError(f"width_empirical needs n >= 1000, got {n}")
    grid = (np.arange(n) + 0.5) / n
    r_p = np.sort(pair.ratio(pair.proposal.quantile(grid)))
    r_q = np.sort(pair.ratio(pair.target.quantile(grid)))

    def w_p(h):
        h = _as_h(h)
        return _finish((n - np.searchsorted(r_p, h, side="left")) / n)

    def w_q(h):
        h = _as_h(h)
        return _finish((n - np.searchsorted(r_q, h, side="left")) / n)

    top = float(r_p[-1])
    log_h_max = math.log(top) if top > 0.0 else -math.inf
    return WidthFunction(w_p, w_q, "empirical", log_h_max, n_samples=n, sorted_ratios=r_p)


def width_for_pair(pair: TargetProposalPair, n_empirical: int = 100_000) -> WidthFunction:
    """按分布族选择宽度函数：同分布 → 恒等；高斯/拉普拉斯 → 闭式；其余 → 经验"""
    if pair.identical:
        return width_identity()
    kinds = (pair.target.kind, pair.proposal.kind)
    if kinds == (GAUSSIAN, GAUSSIAN):
        return width_gaussian(pair)
    if kinds == (LAPLACE, LAPLACE):
        return width_laplace(pair)
    return width_empirical(pair, n_empirical)


# ---------------------------------------------------------------------------
# KL / Rényi-∞ / 信道模拟散度
# ---------------------------------------------------------------------------

def kl_divergence_nats(pair: TargetProposalPair, n_nodes: int = 256) -> float:
    if pair.identical:
        return 0.0
    q, p = pair.target, pair.proposal
    if q.kind == GAUSSIAN and p.kind == GAUSSIAN:
        (mq, vq), (mp, vp) = q.params, p.params
        return 0.5 * (vq / vp + (mq - mp) ** 2 / vp - 1.0 - math.log(vq / vp))
    if q.kind == LAPLACE and p.kind == LAPLACE:
        (mq, bq), (mp, bp) = q.params, p.params
        d = abs(mq - mp)
        return math.log(bp / bq) + (bq * math.exp(-d / bq) + d) / bp - 1.0
    if q.kind == UNIFORM and p.kind == UNIFORM:
        (lq, hq), (lp, hp) = q.params, p.params
        if lp <= lq and hq <= hp:
            return math.log((hp - lp) / (hq - lq))
        raise ValueError("divergent integral: target not dominated by proposal")
    # Q 分位数空间中的 Gauss-Legendre 求积
    nodes, weights = leggauss(n_nodes)
    u = 0.5 * (nodes + 1.0)
    vals = pair.log_ratio(q.quantile(u))
    total = 0.5 * float(np.dot(weights, vals))
    if not math.isfinite(total):
        raise ValueError(f"divergent integral for {pair.describe()}")
    return max(total, 0.0)


def kl_divergence(pair: TargetProposalPair) -> float:
    """D_KL(Q‖P)，单位比特"""
    return kl_divergence_nats(pair) / LN2


def renyi_inf(pair: TargetProposalPair) -> float:
    """
    D∞(Q‖P) = lb ‖r‖∞，单位比特

    已知闭式上界时直接取对数；否则在网格上取最大值并用黄金分割法精修；无界返回 +inf
    """
    if pair.identical:
        return 0.0
    if pair.bounded:
        return math.log2(pair.sup_bound)
    if "unbounded ratio" in pair.notes or "target not dominated" in pair.notes:
        return math.inf
    _, log_sup = grid_argmax_log_ratio(pair)
    return log_sup / LN2 if math.isfinite(log_sup) else math.inf


def _empirical_csd_nats(width: WidthFunction) -> float:
    r = width.sorted_ratios
    n = len(r)
    # 在 (r_(k), r_(k+1)] 上 w_P = (n − k − 1)/n，逐段精确积分
    edges = np.concatenate([[0.0], r])
    lengths = np.diff(edges)
    levels = (n - np.arange(n)) / n
    return float(np.dot(lengths, special.entr(levels)))


def _integrate_entr(width: WidthFunction, quad_tol: float) -> Tuple[float, float]:
    u_hi = width.log_h_max
    cuts = [_U_FLOOR, u_hi]
    try:
        cuts.append(math.log(width.knee()))
    except (ValueError, RuntimeError):
        pass
    for h in width.breakpoints:
        if h > 0.0:
            cuts.append(math.log(h))
    cuts = sorted({c for c in cuts if _U_FLOOR <= c <= u_hi})

    def f(u):
        return float(special.entr(width.w_p(math.exp(u)))) * math.exp(u)

    total, err = 0.0, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b <= a:
                continue
            val, abserr = integrate.quad(f, a, b, epsabs=quad_tol * LN2, epsrel=quad_tol, limit=500)
            total += val
            err += abserr
    return total, err


def csd_from_width(width: WidthFunction, quad_tol: float = 1e-9) -> float:
    """−∫₀^∞ w_P lb w_P dh（比特），在 u = ln h 空间分段自适应积分"""
    if width.source == "identity":
        return 0.0
    if width.source == "empirical":
        return _empirical_csd_nats(width) / LN2
    total, err = _integrate_entr(width, quad_tol)
    tol_nats = max(quad_tol * LN2, quad_tol * abs(total))
    if err > 100.0 * tol_nats:
        raise QuadratureError("channel simulation divergence quadrature did not converge", err / LN2)
    return total / LN2


def csd(pair: TargetProposalPair, quad_tol: float = 1e-9, width: Optional[WidthFunction] = None) -> float:
    """信道模拟散度 D_CS(Q‖P)，单位比特"""
    width = width if width is not None else width_for_pair(pair)
    return csd_from_width(width, quad_tol)


def kl_sandwich(kl_bits: float) -> Tuple[float, float]:
    """D_KL ≤ D_CS ≤ D_KL + lb(D_KL + 1) + 1 的上下界"""
    return kl_bits, kl_bits + math.log2(kl_bits + 1.0) + 1.0


def laplace_csd_closed_form(s: float) -> float:
    """D_CS(L(0,s)‖L(0,1)) = (s + ψ(1/s) + γ − 1)/ln2 比特"""
    if not 0.0 < s <= 1.0:
        raise ValueError(f"scale ratio must be in (0, 1], got {s}")
    return (s + digamma(1.0 / s) + EULER_GAMMA - 1.0) / LN2


def csd_gap_product_gaussian(mu: float, sigma2: float, d: int, quad_tol: float = 1e-9) -> float:
    """
    Q = N(μ, σ²)^⊗d，P = N(0,1)^⊗d 时的 D_CS − D_KL（比特）
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if not 0.0 < sigma2 < 1.0:
        raise ValueError(f"unbounded ratio: sigma2 must be in (0, 1), got {sigma2}")
    width = gaussian_product_width(d * mu * mu, sigma2, d)
    dcs = csd_from_width(width, quad_tol)
    kl = d * 0.5 * (sigma2 + mu * mu - 1.0 - math.log(sigma2)) / LN2
    return dcs - kl


# ---------------------------------------------------------------------------
# 伸缩函数（GPRS）
# ---------------------------------------------------------------------------

class StretchFunction:
    """
    收缩函数 sha = σ⁻¹ 的表格及其逆 σ

    sha 由三次 Hermite 样条（节点导数为 S(sha)）插值；σ 由单调 PCHIP 反插值。
    表格在 sha′ 下溢或停止增长处截断，之后 sha 保持为 h_max 直到 t_max。
    构造后不可变，可并发读取。
    """

    def __init__(self, t_knots: np.ndarray, h_knots: np.ndarray, slopes: np.ndarray,
                 t_max: float, truncated: bool):
        self.t_knots = np.asarray(t_knots, dtype=float)
        self.h_knots = np.asarray(h_knots, dtype=float)
        self.slopes = np.asarray(slopes, dtype=float)
        self.t_max = float(t_max)
        self.truncated = truncated
        self.h_max = float(self.h_knots[-1])
        self._t_end = float(self.t_knots[-1])
        self._sha = interpolate.CubicHermiteSpline(self.t_knots, self.h_knots, self.slopes)
        self._sigma = interpolate.PchipInterpolator(self.h_knots, self.t_knots)

    def sha(self, t: float) -> float:
        t = float(t)
        if t > self.t_max:
            raise RuntimeError(f"t_max too small: time {t:.6g} beyond stretch table end {self.t_max:.6g}")
        if t <= 0.0:
            return 0.0
        if t >= self._t_end:
            return self.h_max
        return min(float(self._sha(t)), self.h_max)

    def sha_prime(self, t: float) -> float:
        if t >= self._t_end:
            return 0.0
        return min(max(float(self._sha(t, 1)), 0.0), 1.0)

    def sigma(self, h: float) -> float:
        h = float(h)
        if h <= 0.0:
            return 0.0
        if h > self.h_max or (h == self.h_max and self.truncated):
            return math.inf
        return float(self._sigma(h))

    def table(self) -> pd.DataFrame:
        return pd.DataFrame({"h": self.h_knots, "sigma_h": self.t_knots, "sha_prime": self.slopes})


def default_t_max(width: WidthFunction) -> float:
    return 1e6 * max(1.0, width.h_max if math.isfinite(width.h_max) else 1.0)


def solve_stretch(pair: TargetProposalPair, width: Optional[WidthFunction] = None,
                  t_max: Optional[float] = None, ode_tol: float = 1e-9,
                  method: str = "RK45") -> StretchFunction:
    """
    积分收缩 ODE 并制表

    参数:
        pair: 目标/提议分布对
        width: 宽度函数（默认按分布族选择）
        t_max: 表格时间上限（默认 10⁶·max(1, ‖r‖∞)）
        ode_tol: 自适应 Runge-Kutta 的相对容差
        method: solve_ivp 方法名（RK45 / DOP853）

    返回:
        StretchFunction
    """
    width = width if width is not None else width_for_pair(pair)
    if not math.isfinite(width.log_h_max):
        raise ValueError("unbounded ratio: stretch table needs a finite ‖r‖∞")
    t_max = float(t_max) if t_max is not None else default_t_max(width)
    if not t_max > 0.0:
        raise ValueError(f"t_max must be positive, got {t_max}")
    h_cap = width.h_max

    def rhs(_t, y):
        h = min(max(float(y[0]), 0.0), h_cap)
        return [min(max(float(width.survival(h)), 0.0), 1.0)]

    t_lin = min(t_max, 50.0)
    grid = np.linspace(0.0, t_lin, 2001)
    if t_max > t_lin:
        grid = np.unique(np.concatenate([grid, np.geomspace(t_lin, t_max, 1500)]))
    sol = integrate.solve_ivp(rhs, (0.0, t_max), [0.0], method=method, t_eval=grid,
                              rtol=ode_tol, atol=ode_tol * 1e-3 * max(1.0, h_cap))
    if sol.status < 0:
        raise RuntimeError(f"shrink ODE integration failed: {sol.message}")
    ts = sol.t
    hs = np.clip(sol.y[0], 0.0, h_cap)
    slopes = np.clip(np.asarray(width.survival(hs), dtype=float), 0.0, 1.0)

    keep = [0]
    for i in range(1, len(ts)):
        if hs[i] > hs[keep[-1]] and slopes[keep[-1]] > 1e-300:
            keep.append(i)
        else:
            break
    truncated = len(keep) < len(ts)
    idx = np.array(keep)
    if len(idx) < 2:
        raise RuntimeError("shrink ODE produced a degenerate table")
    if truncated:
        logger.debug("stretch table truncated at t=%.4g, h_max=%.6g", ts[idx[-1]], hs[idx[-1]])
    return StretchFunction(ts[idx], hs[idx], slopes[idx], t_max, truncated)


def dump_stretch_table(stretch: StretchFunction, file_path: str) -> str:
    """把 σ 表写成 CSV（列：h, sigma_h, sha_prime）"""
    from .common_utils import get_file_manager
    return get_file_manager().save_csv(stretch.table(), file_path, kind="stretch")


def divergence_summary(pair: TargetProposalPair) -> Dict[str, Any]:
    """KL、Rényi-∞、D_CS 与夹逼界（比特）；D_CS 不可用时为 None"""
    kl = kl_divergence(pair)
    lower, upper = kl_sandwich(kl)
    d_inf = renyi_inf(pair)
    try:
        d_cs: Optional[float] = csd(pair)
    except ValueError as e:
        logger.info("channel simulation divergence unavailable: %s", e)
        d_cs = None
    return {
        "target": pair.target.describe(),
        "proposal": pair.proposal.describe(),
        "kl_bits": kl,
        "renyi_inf_bits": d_inf if math.isfinite(d_inf) else None,
        "csd_bits": d_cs,
        "sandwich": [lower, upper],
        "mode_point": pair.mode_point if math.isfinite(pair.mode_point) else None,
        "sup_bound": pair.sup_bound,
    }
