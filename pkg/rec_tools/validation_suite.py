"""
验证套件：精确性、运行时间律、码长界、往返编码与散度夹逼

run_validation 逐项运行检查并返回 JSON 报告:
    {"status", "passed", "scale", "seed", "checks": [{id, name, passed, measured, tolerance}], ...}
检查失败只写进报告，不抛异常。scale='quick' 用较少的试验次数，'full' 使用完整规模。
"""

from __future__ import annotations

import asyncio
import io
import math
import statistics
import time
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import optimize

from .bench_runner import (
    BNB_ALGORITHMS,
    SweepConfig,
    awgn_source_symbol,
    run_awgn_sweep,
    run_fixedkl_sweep,
    trial_stream,
)
from .coding import (
    bnb_depth_alpha,
    decode_bnb_run,
    decode_heap_path,
    elias_gamma_decode,
    elias_gamma_encode,
    encode_bnb_run,
    encode_heap_path,
    sorted_uniform_decode,
    sorted_uniform_encode,
    zeta_decode,
    zeta_encode,
)
from .common_utils import get_logger, progress
from .core_distributions import (
    LB_E,
    LN2,
    ContinuousDistribution,
    TargetProposalPair,
    awgn_sigma2_for_mi,
    grid_argmax_log_ratio,
    make_awgn_pair,
    make_fixed_kl_pair,
    make_pair,
)
from .divergences import (
    EULER_GAMMA,
    csd,
    csd_gap_product_gaussian,
    kl_divergence,
    kl_sandwich,
    laplace_csd_closed_form,
    renyi_inf,
    solve_stretch,
)
from .poisson_process import SeedStream, raw_to_uniform
from .samplers_bnb import bnb_astar, bnb_gprs, decode_bnb
from .samplers_global import (
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
from .stats_utils import binned_tv, geometric_chi_square, ks_two_sample, least_squares_slope, summarize, within_se

logger = get_logger(__name__)

P_VALUE_FLOOR = 1e-3
# 低于该分箱数的几何分布卡方检验只算冒烟级通过
FULL_CHI_BINS = 15
DIVERGENCE_GRID = (0.5, 1.0, 2.0, 4.0, 7.0, 10.0)
FIXEDKL_DELTAS = (3.0, 5.0, 10.0, 15.0, 20.0, 25.0)
CHECK_IDS = (
    "geometric-runtime", "gprs-runtime", "parallel-runtime", "exactness", "codelength", "bnb-steps",
    "bnb-information", "fixedkl-contrast", "step-limited", "divergences", "roundtrip", "decodability",
    "selection-lower-bound", "seed-stability",
)


@dataclass(frozen=True)
class ValidationScale:
    """各检查的试验次数"""

    name: str
    geometric_runs: int
    parallel_runs: int
    exactness_runs: int
    codelength_trials: int
    bnb_runs: int
    panel_trials: int
    tv_runs: int
    roundtrip_cases: int
    min_chi_bins: int


SCALES: Dict[str, ValidationScale] = {
    "quick": ValidationScale("quick", 4000, 1000, 1000, 150, 1000, 200, 4000, 100, 8),
    "full": ValidationScale("full", 100_000, 10_000, 10_000, 1000, 10_000, 1000, 100_000, 1000, FULL_CHI_BINS),
}


@dataclass
class CheckResult:
    id: str
    name: str
    passed: bool
    measured: Any
    tolerance: Any

    def as_dict(self) -> Dict[str, Any]:
        return {"id": self.id, "name": self.name, "passed": bool(self.passed),
                "measured": _jsonable(self.measured), "tolerance": _jsonable(self.tolerance)}


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        return float(value) if math.isfinite(value) else str(float(value))
    if isinstance(value, (np.integer, np.bool_)):
        return value.item()
    return value


# ---------------------------------------------------------------------------
# 夹具
# ---------------------------------------------------------------------------

def awgn_fixture() -> TargetProposalPair:
    """x = 0，σ² = 3，ρ² = 1：Q = N(0,1)，P = N(0,4)，‖r‖∞ = 2"""
    return make_awgn_pair(0.0, 3.0, 1.0)


def narrow_fixture() -> TargetProposalPair:
    return make_pair(ContinuousDistribution.gaussian(1.0, 0.0625), ContinuousDistribution.gaussian(0.0, 1.0))


def identity_fixture() -> TargetProposalPair:
    return make_pair(ContinuousDistribution.gaussian(0.0, 1.0), ContinuousDistribution.gaussian(0.0, 1.0))


def centered_pair_for_lb_m(lb_m: float) -> TargetProposalPair:
    """Q = N(0, s²)，P = N(0, 1)，lb ‖r‖∞ = −lb s = lb_m"""
    return make_pair(ContinuousDistribution.gaussian(0.0, 2.0 ** (-2.0 * lb_m)), ContinuousDistribution.gaussian(0.0, 1.0))


def centered_pair_for_kl(kl_bits: float) -> TargetProposalPair:
    """Q = N(0, s²)，P = N(0, 1)，D_KL = ½(s² − 1 − ln s²)/ln2 = kl_bits"""
    target_nats = kl_bits * LN2
    log_s2 = optimize.brentq(lambda v: 0.5 * (math.exp(v) - 1.0 - v) - target_nats, -200.0, 0.0, xtol=1e-14)
    return make_pair(ContinuousDistribution.gaussian(0.0, math.exp(log_s2)), ContinuousDistribution.gaussian(0.0, 1.0))


def _seeds(seed: int, tag: int, n: int) -> Iterator[SeedStream]:
    base = SeedStream(int(seed)).fold_in(tag)
    for i in range(n):
        yield base.fold_in(i)


def _sampler_table(pair: TargetProposalPair, threads: int = 4) -> Dict[str, Callable[[SeedStream], float]]:
    """七个精确采样器，输出样本"""
    stretch = solve_stretch(pair)
    return {
        "rs": lambda s: rejection_sample(pair, None, s).sample,
        "astar": lambda s: astar_sample(pair, None, s).sample,
        "gprs": lambda s: gprs_sample(pair, stretch, s).sample,
        "astar-par": lambda s: astar_parallel(pair, None, threads, s).sample,
        "gprs-par": lambda s: gprs_parallel(pair, stretch, threads, s).sample,
        "bnb-astar": lambda s: bnb_astar(pair, None, s).sample,
        "bnb-gprs": lambda s: bnb_gprs(pair, stretch, s).sample,
    }


# ---------------------------------------------------------------------------
# 检查
# ---------------------------------------------------------------------------

def check_geometric_runtime(scale: ValidationScale, seed: int) -> List[CheckResult]:
    pair = awgn_fixture()
    out = []
    p_tol = f"> {P_VALUE_FLOOR}"
    if scale.min_chi_bins < FULL_CHI_BINS:
        p_tol += f" (smoke-level: {scale.min_chi_bins} bins, full scale needs >= {FULL_CHI_BINS})"
    for k, (name, fn) in enumerate((("rs", rejection_sample), ("astar", astar_sample))):
        steps = [fn(pair, None, s).steps for s in _seeds(seed, 100 + k, scale.geometric_runs)]
        stat, p, bins = geometric_chi_square(steps, 0.5)
        ok_mean, mean, se = within_se(steps, 2.0)
        out.append(CheckResult(
            "geometric-runtime", f"{name} steps ~ Geom(1/2)", ok_mean and p > P_VALUE_FLOOR and bins >= scale.min_chi_bins,
            {"mean": mean, "se": se, "chi2": stat, "p_value": p, "bins": bins},
            {"mean": "2 ± 3·SE", "p_value": p_tol, "bins": f">= {scale.min_chi_bins}"}))
    return out


def check_gprs_complexity(scale: ValidationScale, seed: int) -> List[CheckResult]:
    out = []
    for k, (label, pair) in enumerate((("awgn x=0", awgn_fixture()), ("N(1,1/16) vs N(0,1)", narrow_fixture()))):
        stretch = solve_stretch(pair)
        target = math.exp(grid_argmax_log_ratio(pair)[1])
        steps = [gprs_sample(pair, stretch, s).steps for s in _seeds(seed, 200 + k, scale.geometric_runs)]
        ok, mean, se = within_se(steps, target)
        out.append(CheckResult("gprs-runtime", f"gprs E[K] = ‖r‖∞ ({label})", ok,
                               {"mean": mean, "se": se, "sup_ratio": target}, "|mean − ‖r‖∞| ≤ 3·SE"))
    return out


def check_selection_lower_bound(scale: ValidationScale, seed: int) -> List[CheckResult]:
    pair = awgn_fixture()
    stretch = solve_stretch(pair)
    floor = 2.0 ** renyi_inf(pair)
    runners = {
        "rs": lambda s: rejection_sample(pair, None, s).steps,
        "astar": lambda s: astar_sample(pair, None, s).steps,
        "gprs": lambda s: gprs_sample(pair, stretch, s).steps,
    }
    out = []
    for k, (name, fn) in enumerate(runners.items()):
        steps = [fn(s) for s in _seeds(seed, 250 + k, scale.parallel_runs)]
        st = summarize(steps)
        out.append(CheckResult("selection-lower-bound", f"{name} E[K] ≥ 2^D∞", st["mean"] >= floor - 3.0 * st["se"],
                               {"mean": st["mean"], "se": st["se"], "floor": floor}, "mean ≥ 2^D∞ − 3·SE"))
    return out


def check_parallel_totals(scale: ValidationScale, seed: int) -> List[CheckResult]:
    pair = awgn_fixture()
    stretch = solve_stretch(pair)
    out = []
    for k, j in enumerate((1, 2, 4, 8)):
        for name, fn in (("astar-par", lambda s: astar_parallel(pair, None, j, s).steps),
                         ("gprs-par", lambda s: gprs_parallel(pair, stretch, j, s).steps)):
            steps = [fn(s) for s in _seeds(seed, 300 + 10 * k + (name == "gprs-par"), scale.parallel_runs)]
            ok, mean, se = within_se(steps, 2.0 + j - 1.0)
            out.append(CheckResult("parallel-runtime", f"{name} total steps, J={j}", ok,
                                   {"mean": mean, "se": se, "expected": 1.0 + j}, "M + J − 1 ± 3·SE"))
    return out


def check_exactness(scale: ValidationScale, seed: int) -> List[CheckResult]:
    out = []
    fixtures = (("Q=P", identity_fixture()), ("awgn x=0", awgn_fixture()), ("N(1,1/16)", narrow_fixture()))
    for f_idx, (label, pair) in enumerate(fixtures):
        for a_idx, (name, fn) in enumerate(_sampler_table(pair).items()):
            tag = 400 + 10 * f_idx + a_idx
            samples = [fn(s) for s in _seeds(seed, tag, scale.exactness_runs)]
            stat, p = ks_two_sample(samples, pair.target, seed=(int(seed) + tag) % 2 ** 32)
            out.append(CheckResult("exactness", f"{name} exact on {label}", p > P_VALUE_FLOOR,
                                   {"ks": stat, "p_value": p}, f"p > {P_VALUE_FLOOR}"))
    return out


async def check_codelength(scale: ValidationScale, seed: int) -> List[CheckResult]:
    config = SweepConfig(experiment="awgn", trials=scale.codelength_trials, seed=seed, mi_bits=(1.0, 4.0, 8.0),
                         algorithms=("astar", "gprs"), mi_cap_bits=12.0, deterministic=True)
    res = await run_awgn_sweep(config)
    if res["status"] != "success":
        return [CheckResult("codelength", "zeta index codelength", False, res["message"], "sweep must succeed")]
    frame = pd.read_csv(io.StringIO(res["csv"]), comment="#")
    out = []
    for _, row in frame.iterrows():
        mi = float(str(row["setting"]).split("=", 1)[1])
        bound = mi + math.log2(mi + 2.0) + 3.0
        ok = row["bits_mean"] <= bound + 0.2
        tol = f"≤ {bound + 0.2:.4f}"
        if mi == 4.0:
            ok = ok and bound - row["bits_mean"] <= 1.5
            tol += " and within 1.5 bits of the bound"
        out.append(CheckResult("codelength", f"{row['algorithm']} codelength, MI={mi:g}", bool(ok),
                               {"bits_mean": row["bits_mean"], "bits_se": row["bits_se"], "bound": bound}, tol))
    return out


def check_bnb_bounds(scale: ValidationScale, seed: int) -> List[CheckResult]:
    """分支定界的步数界与自信息界"""
    out = []
    for k, v in enumerate(DIVERGENCE_GRID):
        pair = centered_pair_for_lb_m(v)
        kl = kl_divergence(pair)
        runs = [bnb_astar(pair, None, s) for s in _seeds(seed, 600 + k, scale.bnb_runs)]
        steps = summarize([r.steps for r in runs])
        info = summarize([-math.log2(r.bound_mass) for r in runs])
        limit = 2.26 * v + 4.52
        out.append(CheckResult("bnb-steps", f"bnb-astar steps, lb M={v:g}", 1.0 <= steps["mean"] <= limit,
                               {"mean": steps["mean"], "se": steps["se"]}, f"[1, {limit:.4f}]"))
        out.append(CheckResult("bnb-information", f"bnb-astar −lb P(B), lb M={v:g}", info["mean"] <= kl + 3.0 * info["se"],
                               {"mean": info["mean"], "se": info["se"], "kl_bits": kl}, "≤ D_KL + 3·SE"))
    slack = (1.0 + EULER_GAMMA) * LB_E
    for k, v in enumerate(DIVERGENCE_GRID):
        pair = centered_pair_for_kl(v)
        stretch = solve_stretch(pair)
        runs = [bnb_gprs(pair, stretch, s) for s in _seeds(seed, 650 + k, scale.bnb_runs)]
        steps = summarize([r.steps for r in runs])
        info = summarize([-math.log2(r.bound_mass) for r in runs])
        limit = 2.26 * v + 9.66
        out.append(CheckResult("bnb-steps", f"bnb-gprs steps, D_KL={v:g}", 1.0 <= steps["mean"] <= limit,
                               {"mean": steps["mean"], "se": steps["se"]}, f"[1, {limit:.4f}]"))
        out.append(CheckResult("bnb-information", f"bnb-gprs −lb P(B), D_KL={v:g}",
                               info["mean"] <= v + slack + 3.0 * info["se"],
                               {"mean": info["mean"], "se": info["se"], "kl_bits": v},
                               "≤ D_KL + (1+γ)·lb e + 3·SE"))
    return out


async def check_fixedkl_contrast(scale: ValidationScale, seed: int) -> List[CheckResult]:
    config = SweepConfig(experiment="fixedkl", trials=scale.panel_trials, seed=seed, kappa_bits=2.0,
                         delta_bits=FIXEDKL_DELTAS, algorithms=BNB_ALGORITHMS, deterministic=True)
    res = await run_fixedkl_sweep(config)
    if res["status"] != "success":
        return [CheckResult("fixedkl-contrast", "fixed-KL contrast", False, res["message"], "sweep must succeed")]
    frame = pd.read_csv(io.StringIO(res["csv"]), comment="#")
    gprs = frame[frame["algorithm"] == "bnb-gprs"]["steps_mean"].to_numpy()
    astar = dict(zip(frame[frame["algorithm"] == "bnb-astar"]["setting"],
                     frame[frame["algorithm"] == "bnb-astar"]["steps_mean"]))
    spread = float(gprs.max() - gprs.min())
    out = [
        CheckResult("fixedkl-contrast", "bnb-gprs mean steps flat over δ", spread <= 2.0,
                    {"range": spread, "means": list(gprs)}, "≤ 2.0"),
        CheckResult("fixedkl-contrast", "bnb-astar mean steps grow with δ", astar["delta=25"] >= 2.0 * astar["delta=5"],
                    {"delta_5": astar["delta=5"], "delta_25": astar["delta=25"]}, "δ=25 ≥ 2 × δ=5"),
    ]
    pair = make_fixed_kl_pair(2.0, 10.0)
    stretch = solve_stretch(pair)
    for k, (name, fn) in enumerate((("bnb-astar", lambda s: bnb_astar(pair, None, s).sample),
                                    ("bnb-gprs", lambda s: bnb_gprs(pair, stretch, s).sample))):
        samples = [fn(s) for s in _seeds(seed, 800 + k, scale.panel_trials)]
        stat, p = ks_two_sample(samples, pair.target, seed=(int(seed) + 800 + k) % 2 ** 32)
        out.append(CheckResult("fixedkl-contrast", f"{name} exact at δ=10", p > P_VALUE_FLOOR,
                               {"ks": stat, "p_value": p}, f"p > {P_VALUE_FLOOR}"))
    return out


def check_step_limited(scale: ValidationScale, seed: int) -> List[CheckResult]:
    pair = centered_pair_for_kl(2.0)
    stretch = solve_stretch(pair)
    budget = budget_for_tv(2.0, 0.25)
    limit = 0.25 + 3.0 * math.sqrt(64.0 / scale.tv_runs)
    n_compare = min(scale.tv_runs, 2000)
    out = []
    variants = (
        ("astar-lim", lambda s: astar_limited(pair, None, budget, s), lambda s: astar_sample(pair, None, s)),
        ("gprs-lim", lambda s: gprs_limited(pair, stretch, budget, s), lambda s: gprs_sample(pair, stretch, s)),
    )
    for k, (name, limited, exact) in enumerate(variants):
        seeds = list(_seeds(seed, 900 + k, scale.tv_runs))
        tv = binned_tv([limited(s).sample for s in seeds], pair.target, 64)
        out.append(CheckResult("step-limited", f"{name} TV, m={budget}", tv <= limit, {"tv": tv}, f"≤ {limit:.4f}"))
        mismatches = 0
        for s in seeds[:n_compare]:
            ref = exact(s)
            if ref.steps <= budget and limited(s).sample != ref.sample:
                mismatches += 1
        out.append(CheckResult("step-limited", f"{name} agrees with the exact sampler when K ≤ m", mismatches == 0,
                               {"mismatches": mismatches, "compared": n_compare}, 0))
    return out


def check_divergences(scale: ValidationScale, seed: int) -> List[CheckResult]:
    out = []
    errs = {}
    for s in (0.2, 0.5, 0.8):
        pair = make_pair(ContinuousDistribution.laplace(0.0, s), ContinuousDistribution.laplace(0.0, 1.0))
        errs[s] = abs(csd(pair) - laplace_csd_closed_form(s))
    out.append(CheckResult("divergences", "Laplace D_CS closed form vs quadrature", max(errs.values()) <= 1e-6,
                           {str(k): v for k, v in errs.items()}, 1e-6))

    rng = np.random.default_rng([int(seed), 10])
    violations = 0
    for i in range(40):
        if i % 2 == 0:
            pair = make_pair(ContinuousDistribution.gaussian(rng.uniform(-2.0, 2.0), rng.uniform(0.05, 0.95)),
                             ContinuousDistribution.gaussian(0.0, 1.0))
        else:
            pair = make_pair(ContinuousDistribution.laplace(rng.uniform(-1.0, 1.0), rng.uniform(0.2, 0.9)),
                             ContinuousDistribution.laplace(0.0, 1.0))
        lower, upper = kl_sandwich(kl_divergence(pair))
        mid = csd(pair)
        if not lower - 1e-9 <= mid <= upper + 1e-9:
            violations += 1
    out.append(CheckResult("divergences", "KL sandwich on 40 mixed pairs", violations == 0, {"violations": violations}, 0))

    dims = (1, 2, 4, 8, 16, 32, 64)
    gaps = [csd_gap_product_gaussian(1.0, 0.25, d) for d in dims]
    slope = least_squares_slope(np.log2(dims), gaps)
    out.append(CheckResult("divergences", "product-Gaussian gap slope vs lb d", 0.4 <= slope <= 0.6,
                           {"slope": slope}, "[0.4, 0.6]"))

    s = math.exp(-6.0)
    pair = make_pair(ContinuousDistribution.laplace(0.0, s), ContinuousDistribution.laplace(0.0, 1.0))
    gap = laplace_csd_closed_form(s) - kl_divergence(pair)
    limit_gap = EULER_GAMMA * LB_E
    out.append(CheckResult("divergences", "Laplace gap → γ·lb e as b → 0", abs(gap - limit_gap) <= 0.02,
                           {"gap": gap, "limit": limit_gap}, 0.02))
    return out


def check_roundtrips(scale: ValidationScale, seed: int) -> List[CheckResult]:
    n = scale.roundtrip_cases
    rng = np.random.default_rng([int(seed), 11])
    out = []

    bad = 0
    for _ in range(n):
        value = int(2.0 ** rng.uniform(0.0, 40.0))
        alpha = float(rng.uniform(1.05, 2.0))
        if zeta_decode(zeta_encode(value, alpha), alpha) != value:
            bad += 1
    out.append(CheckResult("roundtrip", "zeta code round trip", bad == 0, {"failures": bad, "cases": n}, 0))

    bad = sum(elias_gamma_decode(elias_gamma_encode(v)) != v
              for v in (int(2.0 ** rng.uniform(0.0, 60.0)) for _ in range(n)))
    out.append(CheckResult("roundtrip", "Elias gamma round trip", bad == 0, {"failures": int(bad), "cases": n}, 0))

    bad = 0
    for _ in range(n):
        depth = int(rng.integers(1, 31))
        p_left = raw_to_uniform(rng.integers(0, 2 ** 64, size=depth, dtype=np.uint64))
        bits = [int(b) for b in rng.integers(0, 2, size=depth)]
        fractions = [float(p if b == 0 else 1.0 - p) for p, b in zip(p_left, bits)]
        decoded = decode_heap_path(encode_heap_path(fractions, bits), depth, lambda d, _prefix: float(p_left[d]))
        bad += decoded != tuple(bits)
    out.append(CheckResult("roundtrip", "heap path round trip", bad == 0, {"failures": int(bad), "cases": n}, 0))

    pairs = [narrow_fixture(), awgn_fixture(), make_fixed_kl_pair(2.0, 5.0)]
    stretches = [solve_stretch(p) for p in pairs]
    bad = 0
    for i, s in enumerate(_seeds(seed, 1100, n)):
        pair, stretch = pairs[i % len(pairs)], stretches[i % len(pairs)]
        if i % 2 == 0:
            run, alpha = bnb_astar(pair, None, s), bnb_depth_alpha(math.log2(pair.sup_bound), "bnb-astar")
        else:
            run, alpha = bnb_gprs(pair, stretch, s), bnb_depth_alpha(kl_divergence(pair), "bnb-gprs")
        depth, path, sample = decode_bnb_run(encode_bnb_run(run, alpha), s, pair, alpha)
        bad += (depth, path, sample) != (run.depth, run.path_bits, run.sample)
    out.append(CheckResult("roundtrip", "branch-and-bound two-part code round trip", bad == 0,
                           {"failures": int(bad), "cases": n}, 0))

    sigma2 = awgn_sigma2_for_mi(1.0)
    bad, bits, steps = 0, [], []
    for i in range(n):
        stream = trial_stream(seed, 1101, i)
        pair = make_awgn_pair(awgn_source_symbol(stream, sigma2), sigma2, 1.0)
        s = stream.fold_in(1)
        run = rejection_sample(pair, None, s)
        code = sorted_uniform_encode(s, pair, None, 1.0, run=run)
        idx, sample = sorted_uniform_decode(code.bits, s, pair.proposal, 1.0)
        bad += (idx, sample) != (run.selected_index, run.sample)
        bits.append(len(code.bits))
        steps.append(run.steps)
    out.append(CheckResult("roundtrip", "sorted-uniform code round trip", bad == 0, {"failures": int(bad), "cases": n}, 0))
    c_mean = statistics.fmean(steps)
    rate_bound = 1.0 + math.log2(2.0) + 2.0 * math.log2(math.log2(c_mean) + 1.0) + 8.31
    rate = summarize(bits)
    out.append(CheckResult("roundtrip", "sorted-uniform mean rate, MI=1", rate["mean"] <= rate_bound,
                           {"bits_mean": rate["mean"], "bits_se": rate["se"], "mean_steps": c_mean},
                           f"≤ {rate_bound:.4f}"))
    return out


def _median_call_seconds(fn: Callable[[], Any], repeats: int = 200) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def check_decodability(scale: ValidationScale, seed: int) -> List[CheckResult]:
    pair = narrow_fixture()
    stretch = solve_stretch(pair)
    P = pair.proposal
    bad = 0
    cases = min(scale.roundtrip_cases, 200)
    for s in _seeds(seed, 1200, cases):
        for run in (astar_sample(pair, None, s), gprs_sample(pair, stretch, s)):
            bad += decode_global(s, run.selected_index, P) != run.sample
        par = gprs_parallel(pair, stretch, 4, s)
        bad += decode_parallel(s, par.thread_tag, P) != par.sample
        for run in (bnb_astar(pair, None, s), bnb_gprs(pair, stretch, s)):
            bad += decode_bnb(s, run.depth, run.path_bits, pair) != run.sample
    out = [CheckResult("decodability", "decoders reproduce encoder samples", bad == 0,
                       {"mismatches": int(bad), "cases": cases}, 0)]
    s = SeedStream(int(seed)).fold_in(1201)
    t_small = _median_call_seconds(lambda: decode_global(s, 1, P))
    t_large = _median_call_seconds(lambda: decode_global(s, 10 ** 6, P))
    out.append(CheckResult("decodability", "decode_global time independent of the index", t_large <= 10.0 * t_small,
                           {"n=1": t_small, "n=1e6": t_large}, "n=1e6 within 10× n=1"))
    return out


def check_seed_stability(scale: ValidationScale, seed: int) -> List[CheckResult]:
    """三个种子下 A* 平均步数两两相差小于 4·SE"""
    pair = awgn_fixture()
    stats_by_seed = []
    for k in range(3):
        steps = [astar_sample(pair, None, s).steps for s in _seeds(int(seed) ^ (k + 1), 1300, scale.parallel_runs)]
        stats_by_seed.append(summarize(steps))
    worst = 0.0
    for a in range(3):
        for b in range(a + 1, 3):
            sa, sb = stats_by_seed[a], stats_by_seed[b]
            pooled = math.hypot(sa["se"], sb["se"])
            worst = max(worst, abs(sa["mean"] - sb["mean"]) / pooled if pooled > 0 else 0.0)
    return [CheckResult("seed-stability", "seed perturbation moves A* mean steps by < 4·SE", worst < 4.0,
                        {"max_z": worst, "means": [st["mean"] for st in stats_by_seed]}, 4.0)]


CHECKS: Sequence[Callable[[ValidationScale, int], Any]] = (
    check_geometric_runtime,
    check_gprs_complexity,
    check_parallel_totals,
    check_exactness,
    check_codelength,
    check_bnb_bounds,
    check_fixedkl_contrast,
    check_step_limited,
    check_divergences,
    check_roundtrips,
    check_decodability,
    check_selection_lower_bound,
    check_seed_stability,
)


async def _run_check(check, scale: ValidationScale, seed: int) -> List[CheckResult]:
    name = check.__name__
    t0 = time.perf_counter()
    progress("Validate", f"{name} ({scale.name})")
    try:
        if asyncio.iscoroutinefunction(check):
            results = await check(scale, seed)
        else:
            results = await asyncio.to_thread(check, scale, seed)
    except Exception as e:
        logger.debug("%s crashed", name, exc_info=True)
        results = [CheckResult("ERROR", name, False, f"{type(e).__name__}: {e}", "no exception")]
    for r in results:
        progress("Validate", f"{'✓' if r.passed else '✗'} {r.id} {r.name}")
    logger.info("%s finished in %.2fs", name, time.perf_counter() - t0)
    return results


async def run_validation(config: Optional[SweepConfig] = None, scale: str = "quick") -> Dict[str, Any]:
    """
    运行全部验证检查

    参数:
        config: 只用到 seed（缺省 0xC0FFEE）
        scale: 'quick' 或 'full'

    返回:
        Dict: status, passed, scale, seed, checks, missing_ids, elapsed_seconds
    """
    overall_t0 = time.perf_counter()
    if scale not in SCALES:
        return {"status": "error", "message": f"unknown scale {scale!r}; choose from {', '.join(SCALES)}"}
    seed = int((config or SweepConfig(experiment="validate")).seed)
    sc = SCALES[scale]
    checks: List[CheckResult] = []
    for check in CHECKS:
        checks.extend(await _run_check(check, sc, seed))
    seen = {c.id for c in checks}
    missing = [cid for cid in CHECK_IDS if cid not in seen]
    passed = all(c.passed for c in checks) and not missing
    return {
        "status": "success",
        "message": f"{sum(c.passed for c in checks)}/{len(checks)} checks passed",
        "passed": passed,
        "scale": sc.name,
        "seed": f"0x{seed:x}",
        "checks": [c.as_dict() for c in checks],
        "missing_ids": missing,
        "elapsed_seconds": round(time.perf_counter() - overall_t0, 2),
    }
