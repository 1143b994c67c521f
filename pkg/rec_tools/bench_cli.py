"""
recsim 命令行

用法:
  recsim bench awgn --mi 0.1..12:24 --trials 1000 --seed 0xC0FFEE --algs gprs,bnb-gprs --out awgn.csv
  recsim bench fixedkl --kappa 2 --delta 3,5,10,15,20,25 --trials 1000
  recsim div report --out div.csv
  recsim div stretch --target gauss:1,0.0625 --proposal gauss:0,1 --out stretch.csv
  recsim div summary --target laplace:0,0.5 --proposal laplace:0,1
  recsim validate --scale quick --json report.json
  recsim sample --alg bnb-gprs --target gauss:1,0.0625 --proposal gauss:0,1 --seed 7 --encode out.bits
  recsim decode --alg bnb-gprs --target gauss:1,0.0625 --proposal gauss:0,1 --seed 7 --in out.bits

CSV/JSON 写到 stdout（未给 --out 时），进度写到 stderr。退出码: 0 成功，1 失败。
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .bench_runner import (
    ALGORITHMS,
    BNB_ALGORITHMS,
    SweepConfig,
    run_awgn_sweep,
    run_divergence_report,
    run_fixedkl_sweep,
)
from .coding import BitString
from .common_utils import get_file_manager, get_logger, parse_seed
from .core_distributions import make_pair, parse_distribution
from .divergences import divergence_summary, dump_stretch_table, solve_stretch
from .sample_codec import CODEC_ALGORITHMS, CodecParams, decode_sample, sample_and_encode
from .validation_suite import SCALES, run_validation

logger = get_logger(__name__)

DEFAULT_SEED = "0xC0FFEE"


def parse_grid(text: str) -> List[float]:
    """
    解析网格: 'a..b:n' 为含端点的 n 点等距网格，'x,y,z' 为显式列表

    异常:
        ValueError: 格式错误或点数 < 1
    """
    s = text.strip()
    if ".." in s:
        try:
            span, count = s.split(":", 1)
            lo, hi = span.split("..", 1)
            n = int(count)
            lo_f, hi_f = float(lo), float(hi)
        except ValueError:
            raise ValueError(f"bad grid {text!r}; expected 'a..b:n'")
        if n < 1:
            raise ValueError(f"grid needs at least one point, got {n}")
        if n == 1:
            return [lo_f]
        return [float(v) for v in np.linspace(lo_f, hi_f, n)]
    try:
        return [float(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"bad grid {text!r}; expected a comma-separated list")


def parse_algorithms(text: str, allowed: Sequence[str] = ALGORITHMS) -> tuple:
    algs = tuple(a.strip() for a in text.split(",") if a.strip())
    unknown = [a for a in algs if a not in allowed]
    if unknown or not algs:
        raise ValueError(f"unknown algorithms {unknown}; choose from {', '.join(allowed)}")
    return algs


def _run_async(coro) -> Any:
    try:
        return asyncio.run(coro)
    except RuntimeError:
        # 已有事件循环时的回退
        loop = asyncio.new_event_loop()
        try:
            asyncio.set_event_loop(loop)
            return loop.run_until_complete(coro)
        finally:
            loop.close()


def _print_json(payload: Dict[str, Any], stream=None) -> None:
    print(json.dumps(payload, ensure_ascii=False, indent=2), file=stream or sys.stdout, flush=True)


def _finish_sweep(result: Dict[str, Any]) -> int:
    if result.get("status") != "success":
        _print_json(result, sys.stderr)
        return 1
    csv_text = result.pop("csv", None)
    if csv_text is not None:
        sys.stdout.write(csv_text)
        sys.stdout.flush()
        _print_json(result, sys.stderr)
    else:
        _print_json(result)
    return 0


def _sweep_config(args: argparse.Namespace, experiment: str) -> SweepConfig:
    config = SweepConfig(
        experiment=experiment,
        trials=args.trials,
        seed=parse_seed(args.seed),
        out_path=args.out,
        threads=args.threads,
        deterministic=args.deterministic,
        timing=args.timing,
        dump_stretch_dir=args.dump_stretch,
        parallel_threads=args.j,
        eps=args.eps,
    )
    if experiment == "awgn":
        config.mi_bits = tuple(parse_grid(args.mi))
        config.algorithms = parse_algorithms(args.algs)
        config.mi_cap_bits = args.mi_cap
        config.overdispersed = args.overdispersed
    else:
        config.kappa_bits = args.kappa
        config.delta_bits = tuple(parse_grid(args.delta))
        config.algorithms = parse_algorithms(args.algs, BNB_ALGORITHMS)
    return config


def cmd_bench(args: argparse.Namespace) -> int:
    config = _sweep_config(args, args.experiment)
    runner = run_awgn_sweep if args.experiment == "awgn" else run_fixedkl_sweep
    return _finish_sweep(_run_async(runner(config)))


def cmd_div_report(args: argparse.Namespace) -> int:
    config = SweepConfig(
        experiment="divergences",
        neg_log_scales=tuple(parse_grid(args.scales)),
        dims=tuple(int(round(d)) for d in parse_grid(args.dims)),
        out_path=args.out,
        deterministic=args.deterministic,
    )
    return _finish_sweep(_run_async(run_divergence_report(config)))


def cmd_div_stretch(args: argparse.Namespace) -> int:
    pair = make_pair(parse_distribution(args.target), parse_distribution(args.proposal))
    stretch = solve_stretch(pair, t_max=args.t_max, ode_tol=args.ode_tol)
    if args.out:
        path = dump_stretch_table(stretch, args.out)
        _print_json({"status": "success", "message": "stretch table written", "path": path,
                     "knots": len(stretch.t_knots), "truncated": stretch.truncated, "h_max": stretch.h_max})
    else:
        stretch.table().to_csv(sys.stdout, index=False, lineterminator="\n", float_format="%.10g")
    return 0


def cmd_div_summary(args: argparse.Namespace) -> int:
    pair = make_pair(parse_distribution(args.target), parse_distribution(args.proposal))
    _print_json({"status": "success", **divergence_summary(pair)})
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    config = SweepConfig(experiment="validate", seed=parse_seed(args.seed))
    report = _run_async(run_validation(config, args.scale))
    if args.json:
        path = get_file_manager().save_json_data(report, args.json, kind="bench")
        print(f"[Validate] report written to {path}", file=sys.stderr, flush=True)
    else:
        _print_json(report)
    return 0 if report.get("passed") else 1


def _codec_params(args: argparse.Namespace) -> CodecParams:
    return CodecParams(threads=args.j, budget=args.budget, alpha=args.alpha, info_bits=args.info_bits)


def cmd_sample(args: argparse.Namespace) -> int:
    pair = make_pair(parse_distribution(args.target), parse_distribution(args.proposal))
    result = sample_and_encode(args.alg, pair, parse_seed(args.seed), _codec_params(args))
    if args.encode:
        result["encoded_path"] = get_file_manager().save_bytes(bytes.fromhex(result["code_hex"]), args.encode, kind="codes")
    _print_json({"status": "success", **result})
    return 0


def cmd_decode(args: argparse.Namespace) -> int:
    proposal = parse_distribution(args.proposal)
    pair = make_pair(parse_distribution(args.target), proposal) if args.target else None
    if args.code_hex:
        code = BitString.from_hex(args.code_hex)
    else:
        code = BitString.from_bytes(get_file_manager().load_bytes(args.input, kind="codes"))
    result = decode_sample(args.alg, proposal, parse_seed(args.seed), code, _codec_params(args), pair)
    _print_json({"status": "success", **result})
    return 0


def _add_sweep_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trials", type=int, default=1000, help="每个设置的试验数")
    p.add_argument("--seed", default=DEFAULT_SEED, help="64 位种子（十进制或 0x 十六进制）")
    p.add_argument("--out", default=None, help="CSV 输出路径（缺省写 stdout）")
    p.add_argument("--threads", type=int, default=None, help="工作线程数（缺省 RECSIM_THREADS）")
    p.add_argument("--deterministic", action="store_true", help="不写时间戳注释行")
    p.add_argument("--timing", action="store_true", help="增加每行耗时列 seconds")
    p.add_argument("--dump-stretch", default=None, metavar="DIR", help="σ 表输出目录")
    p.add_argument("--j", type=int, default=4, help="并行变体的子过程数 J")
    p.add_argument("--eps", type=float, default=0.25, help="限步变体的总变差目标 ε")


def _add_codec_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alg", required=True, choices=CODEC_ALGORITHMS)
    p.add_argument("--proposal", required=True, help="提议分布，如 gauss:0,1")
    p.add_argument("--seed", default=DEFAULT_SEED)
    p.add_argument("--j", type=int, default=4, help="并行变体的子过程数 J")
    p.add_argument("--budget", type=int, default=None, help="限步变体的预算 m")
    p.add_argument("--alpha", type=float, default=None, help="zeta 指数（缺省由散度推出）")
    p.add_argument("--info-bits", type=float, default=None, help="信息量 I（缺省取 D_KL）")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="recsim", description="相对熵编码 / 信道模拟实验工具")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="数值实验扫描")
    bench_sub = bench.add_subparsers(dest="experiment", required=True)
    awgn = bench_sub.add_parser("awgn", help="AWGN 信道扫描")
    awgn.add_argument("--mi", default="0.1..12:24", help="互信息网格（比特），'a..b:n' 或列表")
    awgn.add_argument("--algs", default="astar,gprs,bnb-astar,bnb-gprs")
    awgn.add_argument("--mi-cap", type=float, default=None, help="通用采样器的互信息上限（缺省 RECSIM_MI_CAP）")
    awgn.add_argument("--overdispersed", action="store_true", help="提议分布使用 Δ²_opt 过度分散")
    _add_sweep_options(awgn)
    awgn.set_defaults(func=cmd_bench)
    fixedkl = bench_sub.add_parser("fixedkl", help="固定 KL、变化 D∞ 的扫描")
    fixedkl.add_argument("--kappa", type=float, default=2.0)
    fixedkl.add_argument("--delta", default="3,5,10,15,20,25", help="δ 网格（比特）")
    fixedkl.add_argument("--algs", default="bnb-astar,bnb-gprs")
    _add_sweep_options(fixedkl)
    fixedkl.set_defaults(func=cmd_bench)

    div = sub.add_parser("div", help="散度计算")
    div_sub = div.add_subparsers(dest="div_command", required=True)
    report = div_sub.add_parser("report", help="Laplace 尺度与乘积高斯维度两个面板")
    report.add_argument("--scales", default="0..6:13", help="−ln b 网格")
    report.add_argument("--dims", default="1,2,4,8,16,32,64")
    report.add_argument("--out", default=None)
    report.add_argument("--deterministic", action="store_true")
    report.set_defaults(func=cmd_div_report)
    stretch = div_sub.add_parser("stretch", help="输出 σ 表 (h, sigma_h, sha_prime)")
    stretch.add_argument("--target", required=True)
    stretch.add_argument("--proposal", required=True)
    stretch.add_argument("--t-max", type=float, default=None)
    stretch.add_argument("--ode-tol", type=float, default=1e-9)
    stretch.add_argument("--out", default=None)
    stretch.set_defaults(func=cmd_div_stretch)
    summary = div_sub.add_parser("summary", help="KL / Rényi-∞ / D_CS 汇总")
    summary.add_argument("--target", required=True)
    summary.add_argument("--proposal", required=True)
    summary.set_defaults(func=cmd_div_summary)

    validate = sub.add_parser("validate", help="运行验证套件")
    validate.add_argument("--scale", choices=sorted(SCALES), default="quick")
    validate.add_argument("--seed", default=DEFAULT_SEED)
    validate.add_argument("--json", default=None, help="报告输出路径（缺省写 stdout）")
    validate.set_defaults(func=cmd_validate)

    sample = sub.add_parser("sample", help="采样并编码")
    _add_codec_options(sample)
    sample.add_argument("--target", required=True, help="目标分布，如 gauss:1,0.0625")
    sample.add_argument("--encode", default=None, help="码流输出文件")
    sample.set_defaults(func=cmd_sample)

    decode = sub.add_parser("decode", help="由码流重建样本")
    _add_codec_options(decode)
    decode.add_argument("--target", default=None, help="目标分布（用于推出 α 并校验路径）")
    source = decode.add_mutually_exclusive_group(required=True)
    source.add_argument("--in", dest="input", default=None, help="码流文件")
    source.add_argument("--hex", dest="code_hex", default=None, help="十六进制码流")
    decode.set_defaults(func=cmd_decode)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args))
    except (ValueError, RuntimeError, OverflowError, OSError) as e:
        logger.debug("command failed", exc_info=True)
        _print_json({"status": "error", "message": f"{type(e).__name__}: {e}"}, sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
