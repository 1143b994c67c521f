"""
公共工具测试：种子解析、环境变量配置、路径规则与文件读写
"""

import os
import sys
import tempfile

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import pandas as pd

from rec_tools.common_utils import (
    FileManager,
    format_csv,
    get_config,
    parse_seed,
    reset_config,
)


def test_parse_seed():
    assert parse_seed("0xC0FFEE") == 0xC0FFEE
    assert parse_seed("12345") == 12345
    assert parse_seed(7) == 7
    assert parse_seed(str(2 ** 64 - 1)) == 2 ** 64 - 1
    for bad in ("-1", str(2 ** 64), "0xZZ"):
        try:
            parse_seed(bad)
        except ValueError:
            continue
        raise AssertionError(f"parse_seed({bad!r}) should fail")
    print("✓ 种子解析")


def test_env_config():
    saved = {k: os.environ.get(k) for k in ("RECSIM_THREADS", "RECSIM_MI_CAP", "RECSIM_DEBUG")}
    try:
        os.environ["RECSIM_THREADS"] = "3"
        os.environ["RECSIM_MI_CAP"] = "6.5"
        os.environ["RECSIM_DEBUG"] = "yes"
        reset_config()
        cfg = get_config()
        assert cfg.threads == 3
        assert cfg.mi_cap_bits == 6.5
        assert cfg.debug is True

        os.environ["RECSIM_THREADS"] = "not-a-number"
        os.environ["RECSIM_MI_CAP"] = "??"
        reset_config()
        cfg = get_config()
        assert cfg.threads >= 1
        assert cfg.mi_cap_bits == 8.0
    finally:
        for k, v in saved.items():
            if v is None:
                os.environ.pop(k, None)
            else:
                os.environ[k] = v
        reset_config()
    print("✓ 环境变量配置")


def test_output_paths():
    cfg = get_config()
    data = cfg.local_data_path
    assert cfg.resolve_output_path("bench/a.csv") == str(data / "bench" / "a.csv")
    assert cfg.resolve_output_path("local_data/codes/b.bits") == str(data / "codes" / "b.bits")
    assert cfg.resolve_output_path("awgn.csv", kind="bench") == str(cfg.bench_path / "awgn.csv")
    assert cfg.resolve_output_path("out.bits", kind="codes") == str(cfg.codes_path / "out.bits")
    assert cfg.resolve_output_path("gauss.csv", kind="stretch") == str(cfg.stretch_path / "gauss.csv")
    assert cfg.resolve_output_path("runs/x.csv", kind="bench") == str(data / "runs" / "x.csv")
    assert cfg.resolve_output_path("a/../b.csv") == str(data / "b.csv")
    absolute = os.path.abspath(os.sep + "tmp" + os.sep + "x.csv")
    assert cfg.resolve_output_path(absolute, kind="bench") == absolute
    for bad, kind in (("", None), ("  ", "bench"), ("../x.csv", None), ("bench/../../x.csv", "bench"),
                      ("local_data", None), ("x.csv", "plots")):
        try:
            cfg.resolve_output_path(bad, kind)
        except ValueError:
            continue
        raise AssertionError(f"resolve_output_path({bad!r}, {kind!r}) should fail")
    print("✓ 输出路径规则")


def test_csv_and_bytes_roundtrip():
    fm = FileManager(get_config())
    frame = pd.DataFrame({"setting": ["mi=1"], "value": [1.0 / 3.0]})
    text = format_csv(frame, ["generated now"], "%.10g")
    assert text.splitlines()[0] == "# generated now"
    assert text.splitlines()[1] == "setting,value"
    assert text.splitlines()[2] == "mi=1,0.3333333333"

    with tempfile.TemporaryDirectory() as tmp:
        path = fm.save_csv(frame, os.path.join(tmp, "sub", "t.csv"), (), "%.10g")
        back = pd.read_csv(path, comment="#")
        assert list(back.columns) == ["setting", "value"]
        assert abs(back["value"][0] - 1.0 / 3.0) < 1e-9

        payload = bytes(range(17))
        p = fm.save_bytes(payload, os.path.join(tmp, "c.bits"))
        assert fm.load_bytes(p) == payload

        j = fm.save_json_data({"a": [1, 2], "中文": True}, os.path.join(tmp, "r.json"))
        assert fm.load_json_data(j) == {"a": [1, 2], "中文": True}
        assert fm.load_json_data(os.path.join(tmp, "missing.json")) == {}
    print("✓ CSV / 比特文件 / JSON 读写")


if __name__ == "__main__":
    print("=== 公共工具测试 ===\n")
    test_parse_seed()
    test_env_config()
    test_output_paths()
    test_csv_and_bytes_roundtrip()
    print("\n全部通过")
