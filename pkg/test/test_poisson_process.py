"""
泊松过程与种子流测试
"""

import math
import os
import sys

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np

from rec_tools.core_distributions import ContinuousDistribution
from rec_tools.poisson_process import (
    BranchArrivalGenerator,
    BranchState,
    GlobalArrivalGenerator,
    SeedStream,
    WORD_EXTRA,
    WORD_LOCATION,
    arrival_location,
    extra_uniforms,
    log_domain_add_arrival,
    next_branch_arrival,
    next_global_arrival,
    raw_to_uniform,
    split_on_sample,
)

P = ContinuousDistribution.gaussian(0.0, 1.0)


def test_seed_stream_addressing():
    s = SeedStream(0xC0FFEE)
    assert np.array_equal(s.block(7), s.blocks(5, 4)[2])
    assert np.array_equal(s.fold_in(3).block(1), SeedStream(0xC0FFEE).fold_in(3).block(1))
    assert not np.array_equal(s.fold_in(3).block(1), s.fold_in(4).block(1))
    assert not np.array_equal(s.block(1), SeedStream(0xC0FFEF).block(1))
    u, nxt = s.draw_uniform()
    assert nxt.position == 1 and u == s.uniform_at(0, 0)
    for bad in (-1, 2 ** 64):
        try:
            SeedStream(bad)
        except ValueError:
            continue
        raise AssertionError(f"seed {bad} should be rejected")
    assert s.fold_in(2).describe() == "0x0000000000c0ffee/2"
    print("✓ 种子流计数器寻址")


def test_uniform_grid():
    raw = np.array([0, 2 ** 64 - 1, 2 ** 63], dtype=np.uint64)
    u = raw_to_uniform(raw)
    assert u[0] > 0.0 and u[1] < 1.0
    # 奇数网格上 1 − u 精确
    assert np.all((1.0 - u) + u == 1.0)
    assert np.all(1.0 - (1.0 - u) == u)
    print("✓ 53 位均匀数网格")


def test_global_generator_is_deterministic():
    a = GlobalArrivalGenerator(42, P).take(200)
    b = GlobalArrivalGenerator(42, P).take(200)
    assert [x.location for x in a] == [x.location for x in b]
    assert [x.time for x in a] == [x.time for x in b]
    times = [x.time for x in a]
    assert all(t1 < t2 for t1, t2 in zip(times, times[1:]))
    assert [x.index for x in a] == list(range(1, 201))
    # 超过一个批次后仍可 O(1) 重建位置
    for n in (1, 2, 63, 64, 65, 130, 200):
        assert arrival_location(42, n, P) == a[n - 1].location
    extras = extra_uniforms(42, 200)
    assert np.array_equal(extras, [x.extra_uniform for x in a])
    assert extras[99] == SeedStream(42).uniform_at(100, WORD_EXTRA)
    print("✓ 全局到达点确定性与位置重建")


def test_next_global_arrival_checks_proposal():
    gen = GlobalArrivalGenerator(5, P)
    first = next_global_arrival(gen, ContinuousDistribution.gaussian(0.0, 1.0))
    second = next_global_arrival(gen)
    assert (first.index, second.index) == (1, 2)
    assert second.location == arrival_location(5, 2, P)
    try:
        next_global_arrival(gen, ContinuousDistribution.laplace(0.0, 1.0))
    except ValueError as e:
        assert "different proposal" in str(e)
    else:
        raise AssertionError("mismatched proposal should be rejected")
    assert gen.index == 2
    print("✓ next_global_arrival 校验提议分布")


def test_log_domain_agrees():
    lin = GlobalArrivalGenerator(7, P).take(50)
    log = GlobalArrivalGenerator(7, P, log_domain=True).take(50)
    for x, y in zip(lin, log):
        assert x.location == y.location
        assert math.isclose(x.time, y.time, rel_tol=1e-12)
    assert log_domain_add_arrival(-math.inf, 2.5) == math.log(2.5)
    assert math.isclose(log_domain_add_arrival(math.log(3.0), 2.0), math.log(5.0), rel_tol=1e-15)
    try:
        log_domain_add_arrival(0.0, 0.0)
    except ValueError:
        pass
    else:
        raise AssertionError("delta = 0 should be rejected")
    print("✓ 对数域时间累加")


def test_rate_scales_times():
    base = GlobalArrivalGenerator(11, P).take(20)
    slow = GlobalArrivalGenerator(11, P, rate=0.25).take(20)
    for x, y in zip(base, slow):
        assert math.isclose(y.time, 4.0 * x.time, rel_tol=1e-12)
        assert x.location == y.location
    print("✓ 子过程速率")


def test_exponential_gaps():
    gaps = np.diff([0.0] + [a.time for a in GlobalArrivalGenerator(2024, P).take(20000)])
    assert abs(gaps.mean() - 1.0) < 0.05
    assert abs(gaps.var() - 1.0) < 0.1
    print(f"✓ 到达间隔均值 {gaps.mean():.3f}")


def test_branch_uses_global_block():
    seed = SeedStream(5).fold_in(1)
    gen = BranchArrivalGenerator(seed, P)
    arrival, state = next_branch_arrival(BranchState.root(), gen)
    glob = GlobalArrivalGenerator(seed, P).next()
    assert arrival.location == glob.location
    assert math.isclose(arrival.time, glob.time, rel_tol=1e-15)
    assert gen.last_location_uniform == seed.uniform_at(1, WORD_LOCATION)
    assert state.depth == 0 and state.time == arrival.time
    print("✓ 分支第 0 步与全局第 1 个到达点共用随机块")


def test_split_rule():
    root = BranchState.root()
    u = 0.25
    y = float(P.quantile(u))
    left = split_on_sample(root, y, mode_point=y - 1.0, u=u)
    assert (left.lo, left.hi, left.path_bits, left.mass) == (-math.inf, y, (0,), 0.25)
    right = split_on_sample(root, y, mode_point=y + 1.0, u=u)
    assert (right.lo, right.hi, right.path_bits, right.mass) == (y, math.inf, (1,), 0.75)
    # 众数恰好在切分点上时保留左侧
    tie = split_on_sample(root, y, mode_point=y, u=u)
    assert tie.path_bits == (0,)
    by_measure = split_on_sample(root, y, mode_point=y + 1.0, proposal=P)
    assert math.isclose(by_measure.mass, 0.75, rel_tol=1e-12)
    try:
        split_on_sample(right, y - 1.0, mode_point=0.0, u=0.5)
    except ValueError:
        pass
    else:
        raise AssertionError("pivot outside the branch should be rejected")
    print("✓ 切分规则")


def test_branch_descent():
    gen = BranchArrivalGenerator(SeedStream(99), P)
    state = BranchState.root()
    mode = 0.7
    for _ in range(30):
        arrival, state = next_branch_arrival(state, gen)
        assert state.lo <= arrival.location <= state.hi
        state = split_on_sample(state, arrival.location, mode, u=gen.last_location_uniform)
        assert state.lo <= mode <= state.hi or mode == state.hi
    assert state.depth == 30 and len(state.path_bits) == 30
    assert 0.0 < state.mass < 0.1
    print(f"✓ 分支下降 30 层，剩余质量 {state.mass:.3g}")


if __name__ == "__main__":
    print("=== 泊松过程测试 ===\n")
    test_seed_stream_addressing()
    test_uniform_grid()
    test_global_generator_is_deterministic()
    test_next_global_arrival_checks_proposal()
    test_log_domain_agrees()
    test_rate_scales_times()
    test_exponential_gaps()
    test_branch_uses_global_block()
    test_split_rule()
    test_branch_descent()
    print("\n全部通过")
