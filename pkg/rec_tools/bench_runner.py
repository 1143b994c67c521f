"""
数值实验扫描（AWGN / 固定 KL / 散度报告）

功能描述:
    - run_awgn_sweep: 一维 AWGN 信道，按互信息网格运行各采样器，统计步数与码长
    - run_fixedkl_sweep: 固定 D_KL、变化 D∞ 的高斯对，比较 BnB A* 与 BnB GPRS
    - run_divergence_report: Laplace 尺度网格与乘积高斯维度网格上的 D_CS − D_KL

所有入口都是 async 函数，计算放进 asyncio.to_thread；
返回 {"status": "success" | "error", "message": ..., ...}，不向调用方抛异常。
试验按种子区间分片到多个线程，结果按 (设置序号, 试验序号) 固定顺序汇总，输出与线程数无关。
"""

from __future__ import annotations

import asyncio
import math
import time
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .coding import (
    bnb_depth_alpha,
    encode_bnb_run,
    encode_parallel_index,
    global_index_alpha,
    sorted_uniform_encode,
    zeta_encode,
)
from .common_utils import format_csv, get_config, get_file_manager, get_logger, progress
from .core_distributions import (
    LB_E,
    ContinuousDistribution,
    TargetProposalPair,
    awgn_sigma2_for_mi,
    make_awgn_pair,
    make_fixed_kl_pair,
    make_pair,
    overdispersion_opt,
    std_normal_quantile,
)
from .divergences import (
    QuadratureError,
    StretchFunction,
    csd,
    csd_gap_product_gaussian,
    dump_stretch_table,
    kl_divergence,
    kl_sandwich,
    laplace_csd_closed_form,
    solve_stretch,
)
from .poisson_process import WORD_LOCATION, SeedStream
from .samplers_bnb import bnb_astar, bnb_gprs
from .samplers_global import (
    astar_limited,
    astar_parallel,
    astar_sample,
    budget_for_tv,
    gprs_limited,
    gprs_parallel,
    gprs_sample,
    rejection_sample,
)
from .stats_utils import least_squares_slope, summarize

logger = get_logger(__name__)

ALGORITHMS: Tuple[str, ...] = (
    "rs", "astar", "gprs", "bnb-astar", "bnb-gprs", "astar-par", "gprs-par", "astar-lim", "gprs-lim",
)
BNB_ALGORITHMS = ("bnb-astar", "bnb-gprs")
GPRS_FAMILY = ("gprs", "bnb-gprs", "gprs-par", "gprs-lim")
EXPERIMENTS = ("awgn", "fixedkl", "divergences", "validate")

STAT_COLUMNS = [
    "setting", "algorithm", "trials",
    "steps_mean", "steps_se", "steps_median", "steps_q25", "steps_q75",
    "bits_mean", "bits_se", "bits_median", "bits_q25", "bits_q75",
    "skipped_reason",
]
DIVERGENCE_COLUMNS = [
    "panel", "setting", "param", "kl_bits", "dcs_closed_bits", "dcs_quad_bits",
    "gap_bits", "lower_bits", "upper_bits", "status",
]
FLOAT_FORMAT = "%.10g"
SKIPPED_RUNTIME = "skipped: runtime"

MI_RANGE = (0.1, 12.0)
DELTA_RANGE = (2.0, 25.0)


def default_mi_grid(points: int = 24) -> Tuple[float, ...]:
    return tuple(float(v) for v in np.linspace(MI_RANGE[0], MI_RANGE[1], points))


@dataclass
class SweepConfig:
    """
    一次扫描的配置

    字段:
        experiment: awgn | fixedkl | divergences | validate
        trials: 每个设置的试验数
        seed: 64 位基础种子
        mi_bits: AWGN 互信息网格（比特）
        kappa_bits / delta_bits: 固定 KL 实验的 κ 与 δ 网格
        neg_log_scales: Laplace 面板的 −ln b 网格
        dims: 乘积高斯面板的维度网格
        algorithms: 参与的算法
        out_path: CSV 输出路径（None 时结果以文本返回）
        threads: 工作线程数上限（None 取 RECSIM_THREADS）
        mi_cap_bits: 通用采样器的互信息上限（None 取 RECSIM_MI_CAP）
        parallel_threads: 并行变体的子过程数 J
        eps: 限步变体的总变差目标 ε
        overdispersed: AWGN 提议分布使用 Δ²_opt 过度分散
        deterministic: 不写时间戳注释行
        timing: 额外输出每行耗时列
        dump_stretch_dir: σ 表输出目录
    """

    experiment: str = "awgn"
    trials: int = 1000
    seed: int = 0xC0FFEE
    mi_bits: Tuple[float, ...] = field(default_factory=default_mi_grid)
    kappa_bits: float = 2.0
    delta_bits: Tuple[float, ...] = (3.0, 5.0, 10.0, 15.0, 20.0, 25.0)
    neg_log_scales: Tuple[float, ...] = tuple(float(v) for v in np.linspace(0.0, 6.0, 13))
    dims: Tuple[int, ...] = (1, 2, 4, 8, 16, 32, 64)
    algorithms: Tuple[str, ...] = ("astar", "gprs", "bnb-astar", "bnb-gprs")
    out_path: Optional[str] = None
    threads: Optional[int] = None
    mi_cap_bits: Optional[float] = None
    parallel_threads: int = 4
    eps: float = 0.25
    overdispersed: bool = False
    deterministic: bool = False
    timing: bool = False
    dump_stretch_dir: Optional[str] = None

    def validate(self) -> None:
        """检查配置，任何实际计算之前调用"""
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if int(self.trials) < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError(f"seed out of 64-bit range: {self.seed}")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown or not self.algorithms:
            raise ValueError(f"unknown algorithms {unknown}; choose from {', '.join(ALGORITHMS)}")
        if self.parallel_threads < 1:
            raise ValueError(f"parallel_threads must be >= 1, got {self.parallel_threads}")
        if self.experiment == "awgn":
            _check_grid("MI grid", self.mi_bits, *MI_RANGE)
        elif self.experiment == "fixedkl":
            _check_grid("delta grid", self.delta_bits, *DELTA_RANGE)
            bad = [a for a in self.algorithms if a not in BNB_ALGORITHMS]
            if bad:
                raise ValueError(f"fixed-KL sweep runs branch-and-bound samplers only, got {bad}")
        elif self.experiment == "divergences":
            _check_grid("scale grid", self.neg_log_scales, 0.0, 6.0)
            _check_grid("dimension grid", self.dims, 1, 64)

    def resolved_threads(self) -> int:
        return max(1, int(self.threads or get_config().threads))

    def resolved_mi_cap(self) -> float:
        return float(self.mi_cap_bits if self.mi_cap_bits is not None else get_config().mi_cap_bits)


def _check_grid(name: str, grid: Sequence[float], lo: float, hi: float) -> None:
    values = list(grid)
    if not values:
        raise ValueError(f"{name} is empty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"{name} must be strictly increasing, got {values}")
    if values[0] < lo - 1e-12 or values[-1] > hi + 1e-12:
        raise ValueError(f"{name} must lie in [{lo:g}, {hi:g}], got {values[0]:g}..{values[-1]:g}")


# ---------------------------------------------------------------------------
# 单次试验
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CodingContext:
    """
    一个设置下各算法共享的编码参数

    字段:
        info_bits: 全局序号 zeta 码用的信息量 I
        astar_div_bits: BnB A* 深度码用的 lb M
        gprs_div_bits: BnB GPRS 深度码用的 D_KL
    """

    info_bits: float
    astar_div_bits: float
    gprs_div_bits: float


def trial_stream(seed: int, setting_index: int, trial_index: int) -> SeedStream:
    """第 setting 个设置、第 trial 次试验的独立种子流"""
    return SeedStream(int(seed)).fold_in(setting_index).fold_in(trial_index)


def awgn_source_symbol(stream: SeedStream, sigma2: float) -> float:
    """x ∼ N(0, σ²)，取自试验流的 0 号子流"""
    u = stream.fold_in(0).uniform_at(1, WORD_LOCATION)
    return math.sqrt(sigma2) * float(std_normal_quantile(u))


def run_and_measure(alg: str, pair: TargetProposalPair, seed: SeedStream, ctx: CodingContext,
                    stretch: Optional[StretchFunction], config: SweepConfig) -> Tuple[int, int]:
    """
    运行一个算法并返回 (步数, 码长)

    码: rs 用排序均匀数码；astar/gprs/限步变体用 zeta(N)；并行变体用线程号 ‖ zeta(N_j)；
    BnB 用 zeta(δ + 1) ‖ 堆路径
    """
    alpha = global_index_alpha(ctx.info_bits)
    if alg == "rs":
        run = rejection_sample(pair, None, seed)
        code = sorted_uniform_encode(seed, pair, None, ctx.info_bits, run=run)
        return run.steps, len(code.bits)
    if alg == "astar":
        run = astar_sample(pair, None, seed)
        return run.steps, len(zeta_encode(run.selected_index, alpha))
    if alg == "gprs":
        run = gprs_sample(pair, stretch, seed)
        return run.steps, len(zeta_encode(run.selected_index, alpha))
    if alg in ("astar-par", "gprs-par"):
        if alg == "astar-par":
            run = astar_parallel(pair, None, config.parallel_threads, seed)
        else:
            run = gprs_parallel(pair, stretch, config.parallel_threads, seed)
        return run.steps, len(encode_parallel_index(run.thread_tag, config.parallel_threads, alpha))
    if alg in ("astar-lim", "gprs-lim"):
        budget = budget_for_tv(ctx.gprs_div_bits, config.eps)
        if alg == "astar-lim":
            run = astar_limited(pair, None, budget, seed)
        else:
            run = gprs_limited(pair, stretch, budget, seed)
        return run.steps, len(zeta_encode(run.selected_index, alpha))
    if alg == "bnb-astar":
        run = bnb_astar(pair, None, seed)
        return run.steps, len(encode_bnb_run(run, bnb_depth_alpha(ctx.astar_div_bits, "bnb-astar")))
    if alg == "bnb-gprs":
        run = bnb_gprs(pair, stretch, seed)
        return run.steps, len(encode_bnb_run(run, bnb_depth_alpha(ctx.gprs_div_bits, "bnb-gprs")))
    raise ValueError(f"unknown algorithm {alg!r}")


# ---------------------------------------------------------------------------
# 汇总
# ---------------------------------------------------------------------------

TrialRecord = Dict[str, Tuple[int, int, float]]


def stat_row(setting: str, alg: str, records: Sequence[TrialRecord], timing: bool) -> Dict[str, object]:
    """把一个 (设置, 算法) 的逐次记录汇总为一行"""
    steps = [r[alg][0] for r in records]
    bits = [r[alg][1] for r in records]
    s, b = summarize(steps), summarize(bits)
    row: Dict[str, object] = {
        "setting": setting, "algorithm": alg, "trials": len(records),
        "steps_mean": s["mean"], "steps_se": s["se"], "steps_median": s["median"],
        "steps_q25": s["q25"], "steps_q75": s["q75"],
        "bits_mean": b["mean"], "bits_se": b["se"], "bits_median": b["median"],
        "bits_q25": b["q25"], "bits_q75": b["q75"],
        "skipped_reason": "",
    }
    if timing:
        row["seconds"] = sum(r[alg][2] for r in records)
    return row


def skipped_row(setting: str, alg: str, reason: str, timing: bool) -> Dict[str, object]:
    row: Dict[str, object] = {c: math.nan for c in STAT_COLUMNS}
    row.update({"setting": setting, "algorithm": alg, "trials": 0, "skipped_reason": reason})
    if timing:
        row["seconds"] = math.nan
    return row


def stat_frame(rows: List[Dict[str, object]], timing: bool) -> pd.DataFrame:
    columns = STAT_COLUMNS + (["seconds"] if timing else [])
    frame = pd.DataFrame(rows, columns=columns)
    frame["trials"] = frame["trials"].astype(int)
    return frame


def _shards(trials: int, workers: int) -> List[Tuple[int, int]]:
    workers = max(1, min(workers, trials))
    edges = np.linspace(0, trials, workers + 1).astype(int)
    return [(int(lo), int(hi)) for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo]


async def _run_sharded(trials: int, workers: int,
                       work: Callable[[int, int], List[TrialRecord]]) -> List[TrialRecord]:
    """按试验区间分片到线程，结果按区间顺序拼接"""
    parts = await asyncio.gather(*(asyncio.to_thread(work, lo, hi) for lo, hi in _shards(trials, workers)))
    return [rec for part in parts for rec in part]


def _emit(frame: pd.DataFrame, config: SweepConfig, title: str) -> Dict[str, object]:
    """写 CSV（或返回 CSV 文本）"""
    header = [] if config.deterministic else [f"{title} generated {datetime.now().isoformat(timespec='seconds')}"]
    if config.out_path:
        path = get_file_manager().save_csv(frame, config.out_path, header, FLOAT_FORMAT, kind="bench")
        return {"csv_path": path}
    return {"csv": format_csv(frame, header, FLOAT_FORMAT)}


def _dump_stretch(stretch: Optional[StretchFunction], config: SweepConfig, name: str) -> None:
    if stretch is None or not config.dump_stretch_dir:
        return
    path = dump_stretch_table(stretch, f"{config.dump_stretch_dir.rstrip('/')}/{name}.csv")
    logger.info("stretch table written to %s", path)


def _needs_stretch(algorithms: Sequence[str]) -> bool:
    return any(a in GPRS_FAMILY for a in algorithms)


# ---------------------------------------------------------------------------
# AWGN
# ---------------------------------------------------------------------------

def _awgn_trials(config: SweepConfig, setting_index: int, sigma2: float, algorithms: Sequence[str],
                 ctx: CodingContext, lo: int, hi: int) -> List[TrialRecord]:
    overdispersion = overdispersion_opt(sigma2, 1.0) if config.overdispersed else 0.0
    records: List[TrialRecord] = []
    for trial in range(lo, hi):
        stream = trial_stream(config.seed, setting_index, trial)
        pair = make_awgn_pair(awgn_source_symbol(stream, sigma2), sigma2, 1.0, overdispersion)
        stretch = solve_stretch(pair) if _needs_stretch(algorithms) else None
        if trial == 0:
            _dump_stretch(stretch, config, f"awgn_setting{setting_index}")
        sampler_seed = stream.fold_in(1)
        rec: TrialRecord = {}
        for alg in algorithms:
            t0 = time.perf_counter()
            steps, bits = run_and_measure(alg, pair, sampler_seed, ctx, stretch, config)
            rec[alg] = (steps, bits, time.perf_counter() - t0)
        records.append(rec)
    return records


async def run_awgn_sweep(config: SweepConfig) -> Dict[str, object]:
    """
    AWGN 扫描：x ∼ N(0, σ²)，Q = N(x, 1)，P = N(0, σ² + 1)

    参数:
        config: 扫描配置（experiment='awgn'）

    返回:
        Dict: status, message, rows, csv_path 或 csv, elapsed_seconds
    """
    try:
        overall_t0 = time.perf_counter()
        config.validate()
        mi_cap = config.resolved_mi_cap()
        workers = config.resolved_threads()
        rows: List[Dict[str, object]] = []
        n_settings = len(config.mi_bits)
        for i, mi in enumerate(config.mi_bits):
            setting = f"mi={mi:.6g}"
            sigma2 = awgn_sigma2_for_mi(mi)
            runnable = [a for a in config.algorithms if a in BNB_ALGORITHMS or mi <= mi_cap]
            progress("AWGN", f"setting {i + 1}/{n_settings} MI={mi:.2f} bits ({len(runnable)} algorithms)")
            # E_x[D_KL] = I，E_x[lb ‖r_x‖∞] = I + ½·lb e
            ctx = CodingContext(info_bits=mi, astar_div_bits=mi + 0.5 * LB_E, gprs_div_bits=mi)
            records: List[TrialRecord] = []
            if runnable:
                records = await _run_sharded(
                    config.trials, workers,
                    lambda lo, hi: _awgn_trials(config, i, sigma2, runnable, ctx, lo, hi))
            for alg in config.algorithms:
                if alg in runnable:
                    rows.append(stat_row(setting, alg, records, config.timing))
                else:
                    rows.append(skipped_row(setting, alg, SKIPPED_RUNTIME, config.timing))
        frame = stat_frame(rows, config.timing)
        result: Dict[str, object] = {
            "status": "success",
            "message": f"AWGN sweep finished: {n_settings} settings × {len(config.algorithms)} algorithms",
            "rows": len(frame),
        }
        result.update(_emit(frame, config, "awgn sweep"))
        result["elapsed_seconds"] = round(time.perf_counter() - overall_t0, 2)
        return result
    except Exception as e:
        logger.debug("awgn sweep failed", exc_info=True)
        return {"status": "error", "message": f"AWGN sweep failed: {str(e)}"}


# ---------------------------------------------------------------------------
# 固定 KL
# ---------------------------------------------------------------------------

def _fixedkl_trials(config: SweepConfig, setting_index: int, pair: TargetProposalPair,
                    stretch: Optional[StretchFunction], ctx: CodingContext,
                    lo: int, hi: int) -> List[TrialRecord]:
    records: List[TrialRecord] = []
    for trial in range(lo, hi):
        seed = trial_stream(config.seed, setting_index, trial)
        rec: TrialRecord = {}
        for alg in config.algorithms:
            t0 = time.perf_counter()
            steps, bits = run_and_measure(alg, pair, seed, ctx, stretch, config)
            rec[alg] = (steps, bits, time.perf_counter() - t0)
        records.append(rec)
    return records


async def run_fixedkl_sweep(config: SweepConfig) -> Dict[str, object]:
    """
    固定 KL 扫描：D_KL = κ 不变，D∞ = δ 沿网格增大

    不可行的 (κ, δ) 在任何采样之前报错。
    """
    try:
        overall_t0 = time.perf_counter()
        config.validate()
        pairs = [make_fixed_kl_pair(config.kappa_bits, d) for d in config.delta_bits]
        workers = config.resolved_threads()
        rows: List[Dict[str, object]] = []
        for i, (delta, pair) in enumerate(zip(config.delta_bits, pairs)):
            setting = f"delta={delta:.6g}"
            progress("FixedKL", f"setting {i + 1}/{len(pairs)} κ={config.kappa_bits:g} δ={delta:g} bits")
            stretch = await asyncio.to_thread(solve_stretch, pair) if _needs_stretch(config.algorithms) else None
            _dump_stretch(stretch, config, f"fixedkl_delta{delta:g}")
            ctx = CodingContext(info_bits=config.kappa_bits, astar_div_bits=delta,
                                gprs_div_bits=config.kappa_bits)
            records = await _run_sharded(
                config.trials, workers,
                lambda lo, hi: _fixedkl_trials(config, i, pair, stretch, ctx, lo, hi))
            rows.extend(stat_row(setting, alg, records, config.timing) for alg in config.algorithms)
        frame = stat_frame(rows, config.timing)
        result: Dict[str, object] = {
            "status": "success",
            "message": f"fixed-KL sweep finished: κ={config.kappa_bits:g}, {len(pairs)} δ values",
            "rows": len(frame),
        }
        result.update(_emit(frame, config, "fixed-KL sweep"))
        result["elapsed_seconds"] = round(time.perf_counter() - overall_t0, 2)
        return result
    except Exception as e:
        logger.debug("fixed-KL sweep failed", exc_info=True)
        return {"status": "error", "message": f"fixed-KL sweep failed: {str(e)}"}


# ---------------------------------------------------------------------------
# 散度报告
# ---------------------------------------------------------------------------

PRODUCT_MEAN = 1.0
PRODUCT_VARIANCE = 0.25


def _laplace_row(neg_log_b: float) -> Dict[str, object]:
    s = math.exp(-neg_log_b)
    row: Dict[str, object] = {c: math.nan for c in DIVERGENCE_COLUMNS}
    row.update({"panel": "A", "setting": f"neg_log_b={neg_log_b:.6g}", "param": s, "status": "ok"})
    try:
        pair = make_pair(ContinuousDistribution.laplace(0.0, s), ContinuousDistribution.laplace(0.0, 1.0))
        kl = kl_divergence(pair)
        lower, upper = kl_sandwich(kl)
        closed = laplace_csd_closed_form(s)
        row.update({"kl_bits": kl, "dcs_closed_bits": closed, "gap_bits": closed - kl,
                    "lower_bits": lower, "upper_bits": upper})
        row["dcs_quad_bits"] = csd(pair)
    except (QuadratureError, ValueError, ArithmeticError) as e:
        row["status"] = f"error: {e}"
    return row


def _product_row(d: int) -> Dict[str, object]:
    row: Dict[str, object] = {c: math.nan for c in DIVERGENCE_COLUMNS}
    row.update({"panel": "B", "setting": f"d={d}", "param": float(d), "status": "ok"})
    try:
        one_dim = make_pair(ContinuousDistribution.gaussian(PRODUCT_MEAN, PRODUCT_VARIANCE),
                            ContinuousDistribution.gaussian(0.0, 1.0))
        kl = d * kl_divergence(one_dim)
        lower, upper = kl_sandwich(kl)
        gap = csd_gap_product_gaussian(PRODUCT_MEAN, PRODUCT_VARIANCE, d)
        row.update({"kl_bits": kl, "dcs_quad_bits": kl + gap, "gap_bits": gap,
                    "lower_bits": lower, "upper_bits": upper})
    except (QuadratureError, ValueError, ArithmeticError) as e:
        row["status"] = f"error: {e}"
    return row


def divergence_frame(config: SweepConfig) -> Tuple[pd.DataFrame, Optional[float]]:
    """
    生成两个面板的行并拟合面板 B 的斜率

    返回:
        (DataFrame, D_CS − D_KL 对 lb d 的最小二乘斜率；可用点少于 2 时为 None)
    """
    rows = [_laplace_row(v) for v in config.neg_log_scales]
    rows += [_product_row(int(d)) for d in config.dims]
    frame = pd.DataFrame(rows, columns=DIVERGENCE_COLUMNS)
    panel_b = frame[(frame["panel"] == "B") & (frame["status"] == "ok")]
    slope = None
    if len(panel_b) >= 2:
        slope = least_squares_slope(np.log2(panel_b["param"].to_numpy()), panel_b["gap_bits"].to_numpy())
    return frame, slope


async def run_divergence_report(config: SweepConfig) -> Dict[str, object]:
    """
    散度报告：面板 A 为 Laplace 尺度网格，面板 B 为 N(1, 1/4)^⊗d 维度网格

    单行求积失败写入该行 status 列，其余行照常计算。
    """
    try:
        overall_t0 = time.perf_counter()
        config.validate()
        progress("Divergence", f"{len(config.neg_log_scales)} Laplace scales, {len(config.dims)} dimensions")
        frame, slope = await asyncio.to_thread(divergence_frame, config)
        failures = int((frame["status"] != "ok").sum())
        result: Dict[str, object] = {
            "status": "success",
            "message": f"divergence report finished ({failures} rows failed)",
            "rows": len(frame),
            "failed_rows": failures,
            "panel_b_slope": slope,
        }
        result.update(_emit(frame, config, "divergence report"))
        result["elapsed_seconds"] = round(time.perf_counter() - overall_t0, 2)
        return result
    except Exception as e:
        logger.debug("divergence report failed", exc_info=True)
        return {"status": "error", "message": f"divergence report failed: {str(e)}"}
