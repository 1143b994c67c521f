"""
单次采样 + 编码 / 解码（CLI 与 MCP 共用）

码格式:
    rs            EliasGamma(L+1) ‖ zeta(秩)            排序均匀数码
    astar, gprs   zeta(N)
    *-lim         zeta(N)
    *-par         ⌈lb J⌉ 位线程号 ‖ zeta(N_j)
    bnb-*         zeta(δ + 1) ‖ 堆路径
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Union

from .coding import (
    BitString,
    bnb_depth_alpha,
    decode_bnb_run,
    decode_parallel_index,
    encode_bnb_run,
    encode_parallel_index,
    global_index_alpha,
    sorted_uniform_decode,
    sorted_uniform_encode,
    zeta_decode,
    zeta_encode,
)
from .common_utils import get_logger
from .core_distributions import ContinuousDistribution, TargetProposalPair
from .divergences import kl_divergence, solve_stretch
from .poisson_process import SeedStream
from .samplers_bnb import bnb_astar, bnb_gprs
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

logger = get_logger(__name__)

CODEC_ALGORITHMS = ("rs", "astar", "gprs", "bnb-astar", "bnb-gprs", "astar-par", "gprs-par", "astar-lim", "gprs-lim")
DEFAULT_EPS = 0.25


@dataclass
class CodecParams:
    """
    编解码双方共享的参数

    字段:
        threads: 并行变体的子过程数 J
        budget: 限步变体的步数预算（None 时取 ⌈2^{(D_KL+1)/ε}⌉）
        alpha: zeta 指数（None 时由分布对的散度推出）
        info_bits: 信息量 I（None 时取 D_KL(Q‖P)）
    """

    threads: int = 4
    budget: Optional[int] = None
    alpha: Optional[float] = None
    info_bits: Optional[float] = None


def _check_alg(alg: str) -> None:
    if alg not in CODEC_ALGORITHMS:
        raise ValueError(f"unknown algorithm {alg!r}; choose from {', '.join(CODEC_ALGORITHMS)}")


def resolve_info_bits(params: CodecParams, pair: Optional[TargetProposalPair]) -> float:
    if params.info_bits is not None:
        return float(params.info_bits)
    if pair is None:
        raise ValueError("decoding without the target needs info_bits or alpha")
    return kl_divergence(pair)


def resolve_alpha(alg: str, params: CodecParams, pair: Optional[TargetProposalPair]) -> float:
    """编码端与解码端必须得到同一个 α"""
    if params.alpha is not None:
        if not params.alpha > 1.0:
            raise ValueError(f"alpha must be > 1, got {params.alpha}")
        return float(params.alpha)
    if alg == "bnb-astar":
        if pair is None or not pair.bounded:
            raise ValueError("bnb-astar depth code needs the target (for lb M) or an explicit alpha")
        return bnb_depth_alpha(math.log2(pair.sup_bound), "bnb-astar")
    if alg == "bnb-gprs":
        return bnb_depth_alpha(resolve_info_bits(params, pair), "bnb-gprs")
    return global_index_alpha(resolve_info_bits(params, pair))


def sample_and_encode(alg: str, pair: TargetProposalPair, seed: Union[int, SeedStream],
                      params: Optional[CodecParams] = None) -> Dict[str, Any]:
    """
    运行一个采样器并编码其输出

    返回:
        Dict: algorithm, sample, steps, code_hex, code_bits, code_length, alpha, ...
    """
    _check_alg(alg)
    params = params or CodecParams()
    stream = SeedStream.coerce(seed)
    stretch = solve_stretch(pair) if "gprs" in alg else None
    out: Dict[str, Any] = {"algorithm": alg, "seed": stream.describe()}

    if alg == "rs":
        info = resolve_info_bits(params, pair)
        run = rejection_sample(pair, None, stream)
        code = sorted_uniform_encode(stream, pair, None, info, run=run)
        bits = code.bits
        out.update({"sample": run.sample, "steps": run.steps, "index": run.selected_index,
                    "rank": code.rank, "info_bits": info})
    elif alg in ("bnb-astar", "bnb-gprs"):
        alpha = resolve_alpha(alg, params, pair)
        run = bnb_astar(pair, None, stream) if alg == "bnb-astar" else bnb_gprs(pair, stretch, stream)
        bits = encode_bnb_run(run, alpha)
        out.update(run.as_dict())
        out["alpha"] = alpha
    else:
        alpha = resolve_alpha(alg, params, pair)
        if alg == "astar":
            run = astar_sample(pair, None, stream)
        elif alg == "gprs":
            run = gprs_sample(pair, stretch, stream)
        elif alg == "astar-par":
            run = astar_parallel(pair, None, params.threads, stream)
        elif alg == "gprs-par":
            run = gprs_parallel(pair, stretch, params.threads, stream)
        else:
            budget = params.budget if params.budget is not None else budget_for_tv(kl_divergence(pair), DEFAULT_EPS)
            run = (astar_limited(pair, None, budget, stream) if alg == "astar-lim"
                   else gprs_limited(pair, stretch, budget, stream))
            out["budget"] = budget
        if alg.endswith("-par"):
            bits = encode_parallel_index(run.thread_tag, params.threads, alpha)
            out["threads"] = params.threads
        else:
            bits = zeta_encode(run.selected_index, alpha)
        out.update(run.as_dict())
        out["alpha"] = alpha

    out.update({"code_bits": str(bits), "code_hex": bits.to_hex(), "code_length": len(bits)})
    return out


def decode_sample(alg: str, proposal: ContinuousDistribution, seed: Union[int, SeedStream],
                  code: Union[BitString, str], params: Optional[CodecParams] = None,
                  pair: Optional[TargetProposalPair] = None) -> Dict[str, Any]:
    """
    由码流重建样本

    参数:
        alg: 编码时的算法
        proposal: 提议分布 P
        seed: 编码时的种子
        code: BitString 或十六进制文本（BitString.to_hex 的格式）
        params: 与编码端相同的参数
        pair: 可选；给出时 BnB 解码逐位校验众数规则，并可由此推出 α

    返回:
        Dict: algorithm, sample 以及 index / depth 等
    """
    _check_alg(alg)
    params = params or CodecParams()
    stream = SeedStream.coerce(seed)
    bits = code if isinstance(code, BitString) else BitString.from_hex(code)
    if pair is not None and not pair.proposal.same_law(proposal):
        raise ValueError("target pair and proposal disagree")
    out: Dict[str, Any] = {"algorithm": alg, "seed": stream.describe()}

    if alg == "rs":
        n, sample = sorted_uniform_decode(bits, stream, proposal, resolve_info_bits(params, pair))
        out.update({"index": n, "sample": sample})
    elif alg in ("bnb-astar", "bnb-gprs"):
        alpha = resolve_alpha(alg, params, pair)
        depth, path, sample = decode_bnb_run(bits, stream, pair if pair is not None else proposal, alpha)
        out.update({"depth": depth, "path_bits": "".join(str(b) for b in path), "sample": sample})
    elif alg.endswith("-par"):
        alpha = resolve_alpha(alg, params, pair)
        tag = decode_parallel_index(bits, params.threads, alpha)
        out.update({"thread_tag": list(tag), "sample": decode_parallel(stream, tag, proposal)})
    else:
        alpha = resolve_alpha(alg, params, pair)
        n = zeta_decode(bits, alpha)
        out.update({"index": n, "sample": decode_global(stream, n, proposal)})
    return out
