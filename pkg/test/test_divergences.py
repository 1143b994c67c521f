"""
散度、宽度函数与伸缩表测试
"""

import math
import os
import sys

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
from scipy import integrate, stats

from rec_tools.core_distributions import ContinuousDistribution, make_pair
from rec_tools.divergences import (
    EULER_GAMMA,
    csd,
    csd_from_width,
    csd_gap_product_gaussian,
    digamma,
    divergence_summary,
    kl_divergence,
    kl_sandwich,
    laplace_csd_closed_form,
    ncx2_cdf,
    renyi_inf,
    solve_stretch,
    width_empirical,
    width_for_pair,
)
from rec_tools.stats_utils import least_squares_slope

LN2 = math.log(2.0)
NARROW = make_pair(ContinuousDistribution.gaussian(1.0, 0.0625), ContinuousDistribution.gaussian(0.0, 1.0))


def test_special_functions():
    assert math.isclose(digamma(1.0), -EULER_GAMMA, rel_tol=1e-14)
    assert math.isclose(digamma(0.5), -EULER_GAMMA - 2.0 * LN2, rel_tol=1e-14)
    try:
        digamma(0.0)
    except ValueError as e:
        assert "domain error" in str(e)
    else:
        raise AssertionError("digamma(0) should raise")
    xs = np.array([0.5, 3.0, 10.0, 40.0])
    assert np.allclose(ncx2_cdf(xs, 3, 2.0), stats.ncx2.cdf(xs, 3, 2.0), atol=1e-10)
    assert np.allclose(ncx2_cdf(xs, 8, 25.0), stats.ncx2.cdf(xs, 8, 25.0), atol=1e-10)
    assert np.allclose(ncx2_cdf(xs, 2, 0.0), stats.chi2.cdf(xs, 2), atol=1e-14)
    print("✓ digamma / 非中心卡方")


def test_ncx2_lower_tail():
    # d = 64 乘积高斯面板的参数：λ = 64/0.75²
    lam = 64.0 / 0.75 ** 2
    xs = np.array([10.0, 23.0, 60.0, 120.0, 200.0])
    assert np.allclose(ncx2_cdf(xs, 64, lam), stats.ncx2.cdf(xs, 64, lam), rtol=1e-6, atol=0.0)
    deep = float(ncx2_cdf(1.0, 64, lam))
    assert deep > 0.0 and math.isclose(deep, float(stats.ncx2.cdf(1.0, 64, lam)), rel_tol=1e-3)
    print(f"✓ 非中心卡方下尾 (k=64, λ={lam:.1f}, F(1) = {deep:.3g})")


def test_kl_closed_forms_match_quadrature():
    for q, p in ((ContinuousDistribution.laplace(0.3, 0.5), ContinuousDistribution.laplace(0.0, 1.0)),
                 (ContinuousDistribution.gaussian(1.0, 0.0625), ContinuousDistribution.gaussian(0.0, 1.0))):
        pair = make_pair(q, p)
        lo, hi = float(q.quantile(1e-12)), float(q.quantile(1.0 - 1e-12))
        numeric, _ = integrate.quad(lambda y: float(q.density(y)) * float(pair.log_ratio(y)),
                                    lo, hi, points=[q.loc], limit=200)
        assert math.isclose(kl_divergence(pair), numeric / LN2, rel_tol=1e-7), pair.describe()
    assert kl_divergence(make_pair(ContinuousDistribution.gaussian(0.0, 1.0),
                                   ContinuousDistribution.gaussian(0.0, 1.0))) == 0.0
    print("✓ KL 闭式与数值积分一致")


def test_renyi_inf():
    assert math.isclose(renyi_inf(NARROW), math.log2(NARROW.sup_bound), rel_tol=1e-14)
    wide = make_pair(ContinuousDistribution.gaussian(0.0, 2.0), ContinuousDistribution.gaussian(0.0, 1.0))
    assert renyi_inf(wide) == math.inf
    print("✓ Rényi-∞")


def test_laplace_csd_closed_form():
    assert abs(laplace_csd_closed_form(1.0)) < 1e-14
    for s in (0.2, 0.5, 0.8):
        pair = make_pair(ContinuousDistribution.laplace(0.0, s), ContinuousDistribution.laplace(0.0, 1.0))
        quad = csd(pair)
        closed = laplace_csd_closed_form(s)
        assert abs(quad - closed) < 1e-6, (s, quad, closed)
    print("✓ 拉普拉斯 D_CS 闭式与积分一致")


def test_sandwich():
    assert kl_sandwich(1.0) == (1.0, 3.0)
    pairs = [NARROW,
             make_pair(ContinuousDistribution.gaussian(0.0, 0.25), ContinuousDistribution.gaussian(0.0, 1.0)),
             make_pair(ContinuousDistribution.laplace(2.0, 0.1), ContinuousDistribution.laplace(0.0, 1.0))]
    for pair in pairs:
        kl = kl_divergence(pair)
        lower, upper = kl_sandwich(kl)
        value = csd(pair)
        assert lower - 1e-9 <= value <= upper + 1e-9, (pair.describe(), kl, value)
    same = make_pair(ContinuousDistribution.gaussian(0.0, 1.0), ContinuousDistribution.gaussian(0.0, 1.0))
    assert csd(same) == 0.0
    print("✓ D_KL ≤ D_CS ≤ D_KL + lb(D_KL+1) + 1")


def test_empirical_width_close_to_closed_form():
    closed = csd(NARROW)
    empirical = csd_from_width(width_empirical(NARROW, 100_000))
    assert abs(closed - empirical) < 0.01, (closed, empirical)
    try:
        width_empirical(NARROW, 10)
    except ValueError:
        pass
    else:
        raise AssertionError("tiny empirical grids should be rejected")
    print(f"✓ 经验宽度 D_CS {empirical:.4f} ≈ 闭式 {closed:.4f}")


def test_product_gaussian_gap():
    mu, s2 = 0.5, 0.25
    pair = make_pair(ContinuousDistribution.gaussian(mu, s2), ContinuousDistribution.gaussian(0.0, 1.0))
    one_d = csd(pair) - kl_divergence(pair)
    assert abs(csd_gap_product_gaussian(mu, s2, 1) - one_d) < 1e-5
    gaps = [csd_gap_product_gaussian(mu, s2, d) for d in (1, 16)]
    assert 0.0 <= gaps[0] < gaps[1]
    try:
        csd_gap_product_gaussian(mu, 1.5, 2)
    except ValueError as e:
        assert "unbounded ratio" in str(e)
    else:
        raise AssertionError("sigma2 >= 1 should be rejected")
    print(f"✓ 乘积高斯间隙 d=1: {gaps[0]:.4f}，d=16: {gaps[1]:.4f}")


def test_product_gap_slope_over_dimensions():
    mu, s2 = 1.0, 0.25
    kl_1d = kl_divergence(make_pair(ContinuousDistribution.gaussian(mu, s2), ContinuousDistribution.gaussian(0.0, 1.0)))
    dims = [1, 2, 4, 8, 16, 32, 64]
    gaps = [csd_gap_product_gaussian(mu, s2, d) for d in dims]
    for d, gap in zip(dims, gaps):
        lower, upper = kl_sandwich(d * kl_1d)
        assert 0.0 <= gap <= upper - lower, (d, gap)
    assert all(a < b for a, b in zip(gaps, gaps[1:])), gaps
    slope = least_squares_slope(np.log2(dims), gaps)
    assert 0.4 <= slope <= 0.6, slope
    print(f"✓ D_CS − D_KL 对 lb d 的斜率 {slope:.3f}，d=64 间隙 {gaps[-1]:.3f}")


def test_width_function_shape():
    width = width_for_pair(NARROW)
    hs = np.linspace(0.0, width.h_max * 1.1, 200)
    wp = np.asarray(width.w_p(hs))
    wq = np.asarray(width.w_q(hs))
    assert wp[0] == 1.0 and wq[0] == 1.0
    assert np.all(np.diff(wp) <= 1e-15) and np.all(np.diff(wq) <= 1e-15)
    assert wp[-1] == 0.0
    # Q 在 {r ≥ h} 上的质量不小于 h 倍的 P 质量
    assert np.all(np.asarray(width.survival(hs)) >= -1e-12)
    print("✓ 宽度函数单调且 S(h) ≥ 0")


def test_stretch_function():
    stretch = solve_stretch(NARROW)
    assert stretch.sha(0.0) == 0.0
    ts = [0.1, 0.5, 1.0, 2.0]
    hs = [stretch.sha(t) for t in ts]
    assert all(a < b for a, b in zip(hs, hs[1:]))
    assert all(h <= stretch.h_max for h in hs)
    for t, h in zip(ts, hs):
        assert abs(stretch.sigma(h) - t) < 1e-3, (t, h)
    assert 0.0 <= stretch.sha_prime(0.5) <= 1.0
    assert stretch.sigma(stretch.h_max * 2.0) == math.inf
    assert stretch.h_max <= NARROW.sup_bound * (1.0 + 1e-9)
    try:
        stretch.sha(stretch.t_max * 2.0)
    except RuntimeError as e:
        assert "t_max too small" in str(e)
    else:
        raise AssertionError("sha beyond t_max should raise")
    table = stretch.table()
    assert list(table.columns) == ["h", "sigma_h", "sha_prime"]
    assert table["h"].is_monotonic_increasing
    wide = make_pair(ContinuousDistribution.gaussian(0.0, 2.0), ContinuousDistribution.gaussian(0.0, 1.0))
    try:
        solve_stretch(wide)
    except ValueError:
        pass
    else:
        raise AssertionError("unbounded pairs have no stretch table")
    print(f"✓ 伸缩表 {len(table)} 个节点，h_max = {stretch.h_max:.4f}")


def test_divergence_summary():
    summary = divergence_summary(NARROW)
    assert summary["target"] == "gauss:1,0.0625"
    assert summary["sandwich"][0] == summary["kl_bits"]
    assert summary["kl_bits"] <= summary["csd_bits"] <= summary["sandwich"][1]
    wide = divergence_summary(make_pair(ContinuousDistribution.gaussian(0.0, 2.0),
                                        ContinuousDistribution.gaussian(0.0, 1.0)))
    assert wide["renyi_inf_bits"] is None and wide["csd_bits"] is None and wide["sup_bound"] is None
    print("✓ 散度汇总")


if __name__ == "__main__":
    print("=== 散度测试 ===\n")
    test_special_functions()
    test_ncx2_lower_tail()
    test_kl_closed_forms_match_quadrature()
    test_renyi_inf()
    test_laplace_csd_closed_form()
    test_sandwich()
    test_empirical_width_close_to_closed_form()
    test_product_gaussian_gap()
    test_product_gap_slope_over_dimensions()
    test_width_function_shape()
    test_stretch_function()
    test_divergence_summary()
    print("\n全部通过")
