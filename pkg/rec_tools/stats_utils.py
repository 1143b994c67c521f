"""
统计工具：汇总统计量与拟合优度检验

功能描述:
    - summarize: 均值、标准误、中位数与四分位数（median-unbiased 插值）
    - ks_one_sample / ks_two_sample: 针对目标分布的 KS 检验
    - geometric_chi_square: 步数直方图对 Geom(p) 的卡方检验（尾部合并）
    - binned_tv: 等质量分箱的总变差距离
"""

from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .core_distributions import ContinuousDistribution

QUANTILE_METHOD = "median_unbiased"


def summarize(values: Sequence[float]) -> Dict[str, float]:
    """
    汇总统计量

    返回:
        Dict: mean, se（ddof=1，单样本时为 0）, median, q25, q75, n
    """
    arr = np.asarray(values, dtype=float)
    n = arr.size
    if n == 0:
        raise ValueError("cannot summarize an empty sample")
    se = float(arr.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    q25, median, q75 = np.quantile(arr, [0.25, 0.5, 0.75], method=QUANTILE_METHOD)
    return {
        "mean": float(arr.mean()),
        "se": se,
        "median": float(median),
        "q25": float(q25),
        "q75": float(q75),
        "n": n,
    }


def within_se(values: Sequence[float], target: float, k: float = 3.0) -> Tuple[bool, float, float]:
    """样本均值是否在 target ± k·SE 内，返回 (是否通过, 均值, SE)"""
    s = summarize(values)
    return abs(s["mean"] - target) <= k * s["se"], s["mean"], s["se"]


def target_draws(dist: ContinuousDistribution, n: int, seed: int) -> np.ndarray:
    """逆 CDF 参考样本"""
    rng = np.random.default_rng(seed)
    return np.asarray(dist.quantile(rng.random(n)), dtype=float)


def ks_one_sample(samples: Sequence[float], dist: ContinuousDistribution) -> Tuple[float, float]:
    res = stats.kstest(np.asarray(samples, dtype=float), dist.cdf)
    return float(res.statistic), float(res.pvalue)


def ks_two_sample(samples: Sequence[float], dist: ContinuousDistribution, seed: int = 0,
                  n_reference: Optional[int] = None) -> Tuple[float, float]:
    """与 n_reference 个逆 CDF 参考样本做两样本 KS 检验"""
    samples = np.asarray(samples, dtype=float)
    reference = target_draws(dist, n_reference or samples.size, seed)
    res = stats.ks_2samp(samples, reference)
    return float(res.statistic), float(res.pvalue)


def geometric_chi_square(counts: Sequence[int], p: float, min_expected: float = 5.0) -> Tuple[float, float, int]:
    """
    K ∼ Geom(p)（支撑 {1, 2, ...}）的卡方拟合检验

    期望频数低于 min_expected 的尾部合并为一箱。

    返回:
        (统计量, p 值, 箱数)
    """
    ks = np.asarray(counts, dtype=int)
    n = ks.size
    if n == 0:
        raise ValueError("empty sample")
    k_max = 1
    while n * stats.geom.pmf(k_max + 1, p) >= min_expected:
        k_max += 1
    observed = np.array([np.count_nonzero(ks == k) for k in range(1, k_max + 1)]
                        + [np.count_nonzero(ks > k_max)], dtype=float)
    expected = n * np.append(stats.geom.pmf(np.arange(1, k_max + 1), p), stats.geom.sf(k_max, p))
    res = stats.chisquare(observed, expected)
    return float(res.statistic), float(res.pvalue), len(observed)


def binned_tv(samples: Sequence[float], dist: ContinuousDistribution, n_bins: int = 64) -> float:
    """按 dist 等质量分箱后经验分布与均匀箱频的总变差"""
    u = np.asarray(dist.cdf(np.asarray(samples, dtype=float)), dtype=float)
    idx = np.clip((u * n_bins).astype(int), 0, n_bins - 1)
    freq = np.bincount(idx, minlength=n_bins) / max(len(idx), 1)
    return float(0.5 * np.abs(freq - 1.0 / n_bins).sum())


def least_squares_slope(x: Sequence[float], y: Sequence[float]) -> float:
    slope, _ = np.polyfit(np.asarray(x, dtype=float), np.asarray(y, dtype=float), 1)
    return float(slope)
