"""
全局采样器测试：拒绝采样、A*、GPRS 及并行 / 限步变体
"""

import math
import os
import sys

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from rec_tools.core_distributions import ContinuousDistribution, awgn_sigma2_for_mi, make_awgn_pair, make_pair
from rec_tools.divergences import solve_stretch
from rec_tools.poisson_process import SeedStream, arrival_location
from rec_tools.samplers_global import (
    astar_limited,
    astar_parallel,
    astar_sample,
    budget_for_tv,
    decode_global,
    decode_parallel,
    gprs_limited,
    gprs_parallel,
    gprs_sample,
    rejection_sample,
)
from rec_tools.samplers_bnb import bnb_astar
from rec_tools.stats_utils import ks_one_sample, summarize

# x = 0，σ² = 3，ρ² = 1：‖r‖∞ = 2
PAIR = make_awgn_pair(0.0, 3.0, 1.0)
STRETCH = solve_stretch(PAIR)
P = PAIR.proposal
TRIALS = 2000


def _seed(i: int) -> SeedStream:
    return SeedStream(0xC0FFEE).fold_in(i)


def test_serial_mean_runtime():
    for name, run in (("rs", lambda s: rejection_sample(PAIR, None, s)),
                      ("astar", lambda s: astar_sample(PAIR, None, s)),
                      ("gprs", lambda s: gprs_sample(PAIR, STRETCH, s))):
        steps = [run(_seed(i)).steps for i in range(TRIALS)]
        mean = summarize(steps)["mean"]
        assert abs(mean - 2.0) < 0.25, (name, mean)
        print(f"✓ {name} 平均步数 {mean:.3f}（理论值 2）")


def test_outputs_follow_target():
    for name, run in (("rs", lambda s: rejection_sample(PAIR, None, s)),
                      ("astar", lambda s: astar_sample(PAIR, None, s)),
                      ("gprs", lambda s: gprs_sample(PAIR, STRETCH, s))):
        samples = [run(_seed(10_000 + i)).sample for i in range(TRIALS)]
        _, p_value = ks_one_sample(samples, PAIR.target)
        assert p_value > 1e-3, (name, p_value)
        print(f"✓ {name} 输出服从目标分布 (KS p = {p_value:.3f})")


def test_decode_global_reproduces_sample():
    for i in range(50):
        seed = _seed(i)
        for run in (rejection_sample(PAIR, None, seed), astar_sample(PAIR, None, seed),
                    gprs_sample(PAIR, STRETCH, seed)):
            assert decode_global(seed, run.selected_index, P) == run.sample
    rs = rejection_sample(PAIR, None, _seed(3))
    assert rs.steps == rs.selected_index and rs.acceptance_uniform is not None
    print("✓ 由序号 N 重建样本")


def test_astar_log_domain_matches_linear():
    for i in range(100):
        lin = astar_sample(PAIR, None, _seed(i))
        log = astar_sample(PAIR, None, _seed(i), log_domain=True)
        assert (lin.selected_index, lin.steps) == (log.selected_index, log.steps)
    print("✓ A* 对数域与线性时间结果一致")


def test_astar_far_from_narrow_target():
    # MI = 8 比特：远离目标的提议点 −ln r 超过 709，线性域键不能溢出
    pair = make_awgn_pair(0.0, awgn_sigma2_for_mi(8.0), 1.0)
    for i in range(20):
        s = _seed(50_000 + i)
        serial = astar_sample(pair, None, s)
        assert serial.sample == astar_sample(pair, None, s, log_domain=True).sample
        assert decode_global(s, serial.selected_index, pair.proposal) == serial.sample
        par = astar_parallel(pair, None, 4, s)
        assert decode_parallel(s, tuple(par.thread_tag), pair.proposal) == par.sample
        lim = astar_limited(pair, None, 100_000, s)
        assert lim.sample == serial.sample and not lim.exhausted_budget
        bnb = bnb_astar(pair, None, s)
        assert bnb.sample == bnb_astar(pair, None, s, log_domain=True).sample
    print("✓ MI = 8 比特时 A* / 并行 / 限步 / BnB A* 均正常终止")


def test_parallel_variants():
    threads = 4
    steps = []
    for i in range(1000):
        seed = _seed(i)
        run = astar_parallel(PAIR, None, threads, seed)
        assert decode_parallel(seed, run.thread_tag, P) == run.sample
        j, n = run.thread_tag
        assert 0 <= j < threads and n >= 1
        steps.append(run.steps)
        g = gprs_parallel(PAIR, STRETCH, threads, seed)
        assert decode_parallel(seed, g.thread_tag, P) == g.sample
        assert g.steps >= threads
    mean = summarize(steps)["mean"]
    # 期望 ‖r‖∞ + J − 1
    assert abs(mean - 5.0) < 0.6, mean
    # 单线程的叠加过程就是子过程 0
    one = astar_parallel(PAIR, None, 1, _seed(7))
    assert one.sample == arrival_location(_seed(7).fold_in(0), one.thread_tag[1], P)
    try:
        astar_parallel(PAIR, None, 0, _seed(0))
    except ValueError:
        pass
    else:
        raise AssertionError("zero threads should be rejected")
    print(f"✓ 并行 A* 平均步数 {mean:.3f}（理论值 5）")


def test_limited_matches_exact_with_large_budget():
    for i in range(200):
        seed = _seed(i)
        exact = astar_sample(PAIR, None, seed)
        lim = astar_limited(PAIR, None, 10_000, seed)
        assert (lim.sample, lim.selected_index, lim.steps) == (exact.sample, exact.selected_index, exact.steps)
        assert not lim.exhausted_budget
        g_exact = gprs_sample(PAIR, STRETCH, seed)
        g_lim = gprs_limited(PAIR, STRETCH, 10_000, seed)
        assert (g_lim.sample, g_lim.steps) == (g_exact.sample, g_exact.steps)
    print("✓ 大预算时限步变体与精确采样一致")


def test_limited_budget_of_one():
    exhausted = 0
    for i in range(200):
        seed = _seed(i)
        g = gprs_limited(PAIR, STRETCH, 1, seed)
        assert g.selected_index == 1 and g.steps == 1
        assert g.sample == arrival_location(seed, 1, P)
        a = astar_limited(PAIR, None, 1, seed)
        assert a.selected_index == 1 and a.steps == 1
        exhausted += int(a.exhausted_budget)
    assert 0 < exhausted < 200
    print(f"✓ 预算为 1：A* 有 {exhausted}/200 次需要更多步")


def test_budget_for_tv():
    assert budget_for_tv(1.0, 0.25) == 256
    assert budget_for_tv(0.0, 1.0) == 2
    try:
        budget_for_tv(20.0, 0.25)
    except OverflowError as e:
        assert "budget overflow" in str(e)
    else:
        raise AssertionError("budget beyond 2^63 should overflow")
    for bad in (0.0, 1.5):
        try:
            budget_for_tv(1.0, bad)
        except ValueError:
            continue
        raise AssertionError(f"eps={bad} should be rejected")
    print("✓ 限步预算")


def test_invalid_bound():
    for M in (0.5, math.inf):
        try:
            rejection_sample(PAIR, M, _seed(0))
        except ValueError as e:
            assert "invalid bound" in str(e)
        else:
            raise AssertionError(f"M={M} should be rejected")
    # M 小于 ‖r‖∞：在众数附近的到达点上被发现
    raised = False
    for i in range(50):
        try:
            astar_sample(PAIR, 1.5, _seed(i))
        except ValueError as e:
            assert "invalid bound" in str(e)
            raised = True
            break
    assert raised
    wide = make_pair(ContinuousDistribution.gaussian(0.0, 2.0), ContinuousDistribution.gaussian(0.0, 1.0))
    try:
        astar_sample(wide, None, _seed(0))
    except ValueError as e:
        assert "invalid bound" in str(e)
    else:
        raise AssertionError("unbounded pairs need an explicit bound")
    print("✓ 非法上界被拒绝")


def test_identical_pair_accepts_first_arrival():
    same = make_pair(P, P)
    stretch = solve_stretch(same)
    for i in range(20):
        assert rejection_sample(same, None, _seed(i)).steps == 1
        assert gprs_sample(same, stretch, _seed(i)).steps == 1
    print("✓ Q = P 时首个到达点即被接受")


if __name__ == "__main__":
    print("=== 全局采样器测试 ===\n")
    test_serial_mean_runtime()
    test_outputs_follow_target()
    test_decode_global_reproduces_sample()
    test_astar_log_domain_matches_linear()
    test_astar_far_from_narrow_target()
    test_parallel_variants()
    test_limited_matches_exact_with_large_budget()
    test_limited_budget_of_one()
    test_budget_for_tv()
    test_invalid_bound()
    test_identical_pair_accepts_first_arrival()
    print("\n全部通过")
