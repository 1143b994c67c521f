"""
扫描与命令行测试（小规模运行）
"""

import asyncio
import contextlib
import io
import json
import math
import os
import sys

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import pandas as pd

from rec_tools.bench_cli import main, parse_algorithms, parse_grid
from rec_tools.bench_runner import (
    ALGORITHMS,
    BNB_ALGORITHMS,
    SKIPPED_RUNTIME,
    STAT_COLUMNS,
    SweepConfig,
    default_mi_grid,
    run_awgn_sweep,
    run_divergence_report,
    run_fixedkl_sweep,
    trial_stream,
)


def _frame(result) -> pd.DataFrame:
    assert result["status"] == "success", result
    return pd.read_csv(io.StringIO(result["csv"]), comment="#")


def _expect_value_error(fn):
    try:
        fn()
    except ValueError:
        return
    raise AssertionError("expected ValueError")


def test_parse_grid():
    grid = parse_grid("0.1..12:24")
    assert len(grid) == 24 and grid[0] == 0.1 and math.isclose(grid[-1], 12.0)
    assert tuple(grid) == default_mi_grid()
    assert parse_grid("3,5, 10") == [3.0, 5.0, 10.0]
    assert parse_grid("1..2:1") == [1.0]
    for bad in ("a..b:3", "1..2:0", "1,x"):
        _expect_value_error(lambda: parse_grid(bad))
    assert parse_algorithms("gprs, bnb-gprs") == ("gprs", "bnb-gprs")
    _expect_value_error(lambda: parse_algorithms("gprs,nope"))
    _expect_value_error(lambda: parse_algorithms("gprs", BNB_ALGORITHMS))
    print("✓ 网格与算法列表解析")


def test_config_validation():
    SweepConfig(experiment="awgn").validate()
    SweepConfig(experiment="fixedkl", algorithms=BNB_ALGORITHMS).validate()
    for config in (SweepConfig(experiment="awgn", mi_bits=(2.0, 1.0)),
                   SweepConfig(experiment="awgn", mi_bits=(13.0,)),
                   SweepConfig(experiment="awgn", trials=0),
                   SweepConfig(experiment="fixedkl", algorithms=("gprs",)),
                   SweepConfig(experiment="fixedkl", algorithms=BNB_ALGORITHMS, delta_bits=(1.0,)),
                   SweepConfig(experiment="divergences", dims=(0, 1)),
                   SweepConfig(experiment="nope")):
        _expect_value_error(config.validate)
    assert trial_stream(1, 2, 3).path == (2, 3)
    print("✓ 扫描配置校验")


def test_awgn_sweep_small():
    config = SweepConfig(experiment="awgn", trials=20, seed=7, mi_bits=(0.5, 2.0),
                         algorithms=ALGORITHMS, threads=2, mi_cap_bits=1.0, deterministic=True)
    result = asyncio.run(run_awgn_sweep(config))
    frame = _frame(result)
    assert list(frame.columns) == STAT_COLUMNS
    assert len(frame) == 2 * len(ALGORITHMS) == result["rows"]
    first = frame[frame["setting"] == "mi=0.5"]
    assert (first["trials"] == 20).all()
    assert (first["steps_mean"] >= 1.0).all() and (first["bits_mean"] > 0.0).all()
    second = frame[frame["setting"] == "mi=2"]
    skipped = second[second["skipped_reason"] == SKIPPED_RUNTIME]
    assert set(skipped["algorithm"]) == set(ALGORITHMS) - set(BNB_ALGORITHMS)
    assert (skipped["trials"] == 0).all() and skipped["steps_mean"].isna().all()
    # 线程数不影响输出
    config_one = SweepConfig(experiment="awgn", trials=20, seed=7, mi_bits=(0.5, 2.0),
                             algorithms=ALGORITHMS, threads=1, mi_cap_bits=1.0, deterministic=True)
    assert asyncio.run(run_awgn_sweep(config_one))["csv"] == result["csv"]
    print(f"✓ AWGN 小规模扫描 {len(frame)} 行，与线程数无关")


def test_awgn_timing_column():
    config = SweepConfig(experiment="awgn", trials=4, mi_bits=(1.0,), algorithms=("bnb-gprs",),
                         timing=True, deterministic=True)
    frame = _frame(asyncio.run(run_awgn_sweep(config)))
    assert list(frame.columns) == STAT_COLUMNS + ["seconds"]
    assert (frame["seconds"] >= 0.0).all()
    print("✓ 耗时列")


def test_fixedkl_sweep_small():
    config = SweepConfig(experiment="fixedkl", trials=10, seed=11, delta_bits=(3.0, 10.0),
                         algorithms=BNB_ALGORITHMS, threads=2)
    result = asyncio.run(run_fixedkl_sweep(config))
    assert result["csv"].startswith("# fixed-KL sweep generated")
    frame = _frame(result)
    assert list(frame["setting"]) == ["delta=3", "delta=3", "delta=10", "delta=10"]
    assert (frame["steps_mean"] >= 1.0).all()
    bad = SweepConfig(experiment="fixedkl", trials=10, delta_bits=(2.0,), algorithms=BNB_ALGORITHMS)
    failed = asyncio.run(run_fixedkl_sweep(bad))
    assert failed["status"] == "error" and "infeasible" in failed["message"]
    print("✓ 固定 KL 小规模扫描；不可行 δ 报错")


def test_divergence_report_small():
    config = SweepConfig(experiment="divergences", neg_log_scales=(0.0, 1.0), dims=(1, 2, 4),
                         deterministic=True)
    result = asyncio.run(run_divergence_report(config))
    frame = _frame(result)
    assert result["failed_rows"] == 0 and len(frame) == 5
    assert result["panel_b_slope"] is not None
    panel_a = frame[frame["panel"] == "A"]
    assert (abs(panel_a["dcs_closed_bits"] - panel_a["dcs_quad_bits"]) < 1e-6).all()
    assert (frame["lower_bits"] <= frame["dcs_quad_bits"] + 1e-9).all()
    assert (frame["dcs_quad_bits"] <= frame["upper_bits"] + 1e-9).all()
    print(f"✓ 散度报告，面板 B 斜率 {result['panel_b_slope']:.3f}")


def _run_cli(argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue(), err.getvalue()


def test_cli_div_summary():
    code, out, _ = _run_cli(["div", "summary", "--target", "laplace:0,0.5", "--proposal", "laplace:0,1"])
    assert code == 0
    payload = json.loads(out)
    assert payload["status"] == "success" and payload["csd_bits"] is not None
    code, _, err = _run_cli(["div", "summary", "--target", "cauchy:0,1", "--proposal", "gauss:0,1"])
    assert code == 1 and '"status": "error"' in err
    print("✓ recsim div summary")


def test_cli_sample_decode_roundtrip():
    args = ["--alg", "bnb-gprs", "--target", "gauss:1,0.0625", "--proposal", "gauss:0,1", "--seed", "7"]
    code, out, _ = _run_cli(["sample"] + args)
    assert code == 0
    encoded = json.loads(out)
    code, out, _ = _run_cli(["decode"] + args + ["--hex", encoded["code_hex"]])
    assert code == 0
    decoded = json.loads(out)
    assert decoded["sample"] == encoded["sample"]
    assert decoded["depth"] == encoded["depth"]
    print("✓ recsim sample / decode 往返")


if __name__ == "__main__":
    print("=== 扫描与命令行测试 ===\n")
    test_parse_grid()
    test_config_validation()
    test_awgn_sweep_small()
    test_awgn_timing_column()
    test_fixedkl_sweep_small()
    test_divergence_report_small()
    test_cli_div_summary()
    test_cli_sample_decode_roundtrip()
    print("\n全部通过")
