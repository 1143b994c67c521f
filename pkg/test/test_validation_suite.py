"""
验证套件测试：极小规模的单项检查，外加一次 quick 规模的完整运行
"""

import asyncio
import math
import os
import sys

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np

from rec_tools.divergences import kl_divergence, renyi_inf
from rec_tools.validation_suite import (
    CHECK_IDS,
    CHECKS,
    SCALES,
    CheckResult,
    ValidationScale,
    awgn_fixture,
    centered_pair_for_kl,
    centered_pair_for_lb_m,
    check_bnb_bounds,
    check_codelength,
    check_decodability,
    check_divergences,
    check_geometric_runtime,
    check_roundtrips,
    run_validation,
)

TINY = ValidationScale("tiny", 50, 20, 20, 5, 20, 5, 50, 10, 2)


def test_fixtures():
    assert math.isclose(awgn_fixture().sup_bound, 2.0, rel_tol=1e-12)
    assert abs(kl_divergence(centered_pair_for_kl(1.0)) - 1.0) < 1e-9
    assert abs(renyi_inf(centered_pair_for_lb_m(3.0)) - 3.0) < 1e-12
    print("✓ 夹具")


def test_check_result_is_json_ready():
    r = CheckResult("exactness", "demo", np.bool_(True), {"x": np.float64(math.nan), "n": np.int64(3)}, (1.0, math.inf))
    d = r.as_dict()
    assert d["passed"] is True
    assert d["measured"] == {"x": "nan", "n": 3}
    assert d["tolerance"] == [1.0, "inf"]
    print("✓ 检查结果可序列化")


def test_roundtrip_checks_pass():
    results = check_roundtrips(TINY, 0xC0FFEE)
    exact = [r for r in results if "round trip" in r.name]
    assert len(exact) == 5
    assert all(r.passed for r in exact), [r.as_dict() for r in exact if not r.passed]
    decodability = check_decodability(TINY, 0xC0FFEE)[0]
    assert decodability.passed, decodability.as_dict()
    print("✓ 往返与解码检查")


def test_check_registry():
    assert len(CHECKS) == 13
    assert "selection-lower-bound" in CHECK_IDS and len(set(CHECK_IDS)) == 14
    bad = asyncio.run(run_validation(scale="huge"))
    assert bad["status"] == "error"
    print("✓ 检查注册表")

def test_geometric_runtime_marks_smoke_scale():
    quick = check_geometric_runtime(TINY, 0xC0FFEE)
    assert len(quick) == 2
    for r in quick:
        assert "smoke-level: 2 bins" in r.tolerance["p_value"]
    wide = ValidationScale("wide", 50, 20, 20, 5, 20, 5, 50, 10, 15)
    for r in check_geometric_runtime(wide, 0xC0FFEE):
        assert "smoke" not in r.tolerance["p_value"]
    assert SCALES["quick"].min_chi_bins < SCALES["full"].min_chi_bins == 15
    print("✓ 快速规模的卡方结果标为冒烟级")


def test_numeric_checks_do_not_crash():
    results = check_bnb_bounds(TINY, 0xC0FFEE) + asyncio.run(check_codelength(TINY, 0xC0FFEE))
    assert {r.id for r in results} == {"bnb-steps", "bnb-information", "codelength"}
    for r in results:
        assert "range error" not in str(r.measured), r.as_dict()
        assert isinstance(r.measured, dict), r.as_dict()
        assert all(math.isfinite(v) for k, v in r.measured.items() if k in ("mean", "bits_mean")), r.as_dict()
    print("✓ 分支定界与码长检查无数值异常")


def test_divergence_checks_pass():
    results = check_divergences(TINY, 0xC0FFEE)
    assert len(results) == 4
    assert all(r.passed for r in results), [r.as_dict() for r in results if not r.passed]
    print("✓ 散度检查")


def test_quick_validation_passes():
    report = asyncio.run(run_validation(scale="quick"))
    assert report["status"] == "success"
    errors = [c for c in report["checks"] if c["id"] == "ERROR"]
    assert not errors, errors
    assert report["missing_ids"] == []
    assert report["passed"] is True, [c for c in report["checks"] if not c["passed"]]
    print(f"✓ quick 规模整体通过（{report['message']}）")


if __name__ == "__main__":
    print("=== 验证套件测试 ===\n")
    test_fixtures()
    test_check_result_is_json_ready()
    test_roundtrip_checks_pass()
    test_check_registry()
    test_geometric_runtime_marks_smoke_scale()
    test_numeric_checks_do_not_crash()
    test_divergence_checks_pass()
    test_quick_validation_passes()
    print("\n全部通过")
