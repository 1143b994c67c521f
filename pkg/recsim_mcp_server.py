from typing import Optional
import json
import asyncio
import os
import sys
import time
import logging
from mcp.server.fastmcp import FastMCP

# 严格模式：将所有 stderr 重定向到本地日志文件，避免与 MCP stdio 冲突
_original_stdout = sys.stdout  # 保存原始 stdout 供 MCP 使用
try:
    os.makedirs(os.path.join('local_data', 'logs'), exist_ok=True)
    _stderr_path = os.path.join('local_data', 'logs', 'mcp_server.stderr.log')
    _stderr_fp = open(_stderr_path, 'a', encoding='utf-8', buffering=1)
    sys.stderr = _stderr_fp  # type: ignore[assignment]

    # 同时重定向 stdout 到 stderr，防止任何意外的 stdout 输出污染 MCP 协议
    sys.stdout = _stderr_fp  # type: ignore[assignment]
except Exception:
    # 即使日志文件创建失败，也不要中断服务器启动
    pass

# 在 stderr 重定向之后导入模块，避免导入时的输出污染 stdout
from rec_tools.bench_runner import SweepConfig, run_awgn_sweep, run_fixedkl_sweep, run_divergence_report
from rec_tools.bench_cli import parse_algorithms, parse_grid
from rec_tools.common_utils import parse_seed
from rec_tools.core_distributions import make_pair, parse_distribution
from rec_tools.divergences import divergence_summary as _divergence_summary
from rec_tools.sample_codec import CodecParams, decode_sample as _decode_sample, sample_and_encode as _sample_and_encode
from rec_tools.validation_suite import run_validation

# 全局日志降噪：确保第三方库不会向 stdout 打印，避免破坏 MCP stdio
logging.basicConfig(level=logging.WARNING, stream=sys.stderr, force=True)
for _name, _level in (
    ("mpmath", logging.ERROR),
    ("numpy", logging.ERROR),
    ("scipy", logging.ERROR),
):
    try:
        _lg = logging.getLogger(_name)
        _lg.setLevel(_level)
        if not _lg.handlers:
            _h = logging.StreamHandler(sys.stderr)
            _h.setLevel(_level)
            _lg.addHandler(_h)
        _lg.propagate = False
    except Exception:
        pass

# 初始化MCP服务器
mcp = FastMCP("recsim")


def _dumps(result: dict) -> str:
    return json.dumps(result, ensure_ascii=False, indent=2)


@mcp.tool()
async def sample_and_encode(
    alg: str = "bnb-gprs",
    target: str = "gauss:1,0.0625",
    proposal: str = "gauss:0,1",
    seed: str = "0xC0FFEE",
    j_threads: int = 4,
    budget: Optional[int] = None,
    alpha: Optional[float] = None,
) -> str:
    """运行一个采样器并把输出编码成比特串

    功能描述:
        - 按 (目标分布, 提议分布, 种子) 运行所选采样器
        - 返回样本、步数、码流（十六进制）与码长
        - 相同的 seed / alg / 参数交给 decode_sample 即可重建样本

    参数:
        alg (str): rs | astar | gprs | bnb-astar | bnb-gprs | astar-par | gprs-par | astar-lim | gprs-lim
        target (str): 目标分布 Q，如 gauss:1,0.0625 / laplace:0,0.5 / uniform:0,1
        proposal (str): 提议分布 P，如 gauss:0,1
        seed (str): 64 位种子，十进制或 0x 十六进制
        j_threads (int): 并行变体的子过程数 J
        budget (int): 限步变体的步数预算，缺省按 ε=0.25 计算
        alpha (float): zeta 指数，缺省由散度推出

    返回:
        str: JSON，含 sample / steps / code_hex / code_length
    """
    try:
        t0 = time.perf_counter()
        pair = make_pair(parse_distribution(target), parse_distribution(proposal))
        params = CodecParams(threads=j_threads, budget=budget, alpha=alpha)
        result = await asyncio.to_thread(_sample_and_encode, alg, pair, parse_seed(seed), params)
        return _dumps({"status": "success", "message": f"{alg} sample encoded in {result['code_length']} bits",
                       **result, "elapsed_seconds": round(time.perf_counter() - t0, 2)})
    except Exception as e:
        return _dumps({"status": "error", "message": f"采样编码失败：{str(e)}",
                       "suggestion": "请检查分布描述（如 gauss:0,1）与算法名称"})


@mcp.tool()
async def decode_sample(
    alg: str,
    proposal: str,
    seed: str,
    code_hex: str,
    target: Optional[str] = None,
    j_threads: int = 4,
    alpha: Optional[float] = None,
) -> str:
    """由码流重建样本

    参数:
        alg (str): 编码时使用的算法
        proposal (str): 提议分布 P
        seed (str): 编码时的种子
        code_hex (str): sample_and_encode 返回的 code_hex
        target (str): 目标分布 Q（未给 alpha 时用于推出 α；BnB 解码时校验路径）
        j_threads (int): 并行变体的子过程数 J
        alpha (float): zeta 指数

    返回:
        str: JSON，含 sample 以及 index / depth / thread_tag
    """
    try:
        P = parse_distribution(proposal)
        pair = make_pair(parse_distribution(target), P) if target else None
        params = CodecParams(threads=j_threads, alpha=alpha)
        result = await asyncio.to_thread(_decode_sample, alg, P, parse_seed(seed), code_hex, params, pair)
        return _dumps({"status": "success", "message": "decoded", **result})
    except Exception as e:
        return _dumps({"status": "error", "message": f"解码失败：{str(e)}",
                       "suggestion": "请确认 alg / seed / alpha 与编码端一致"})


@mcp.tool()
async def divergence_summary(target: str, proposal: str) -> str:
    """计算 KL、Rényi-∞、信道模拟散度 D_CS 及夹逼界（比特）

    参数:
        target (str): 目标分布 Q
        proposal (str): 提议分布 P

    返回:
        str: JSON，含 kl_bits / renyi_inf_bits / csd_bits / sandwich
    """
    try:
        pair = make_pair(parse_distribution(target), parse_distribution(proposal))
        result = await asyncio.to_thread(_divergence_summary, pair)
        return _dumps({"status": "success", "message": "divergences computed", **result})
    except Exception as e:
        return _dumps({"status": "error", "message": f"散度计算失败：{str(e)}"})


@mcp.tool()
async def run_awgn_benchmark(
    mi_list: str = "0.1..12:24",
    trials: int = 1000,
    seed: str = "0xC0FFEE",
    algs: str = "astar,gprs,bnb-astar,bnb-gprs",
    out_file: str = "bench/awgn.csv",
) -> str:
    """AWGN 信道扫描，CSV 写入 local_data/bench/

    参数:
        mi_list (str): 互信息网格（比特），'a..b:n' 或逗号分隔列表
        trials (int): 每个设置的试验数
        seed (str): 种子
        algs (str): 逗号分隔的算法列表
        out_file (str): 相对 local_data 的输出路径

    返回:
        str: JSON 摘要（csv_path、行数、耗时）
    """
    try:
        config = SweepConfig(experiment="awgn", trials=trials, seed=parse_seed(seed),
                             mi_bits=tuple(parse_grid(mi_list)), algorithms=parse_algorithms(algs),
                             out_path=out_file)
    except Exception as e:
        return _dumps({"status": "error", "message": f"参数错误：{str(e)}"})
    return _dumps(await run_awgn_sweep(config))


@mcp.tool()
async def run_fixedkl_benchmark(
    kappa: float = 2.0,
    delta_list: str = "3,5,10,15,20,25",
    trials: int = 1000,
    seed: str = "0xC0FFEE",
    out_file: str = "bench/fixedkl.csv",
) -> str:
    """固定 KL、变化 D∞ 的 BnB A* / BnB GPRS 对比，CSV 写入 local_data/bench/

    参数:
        kappa (float): D_KL（比特）
        delta_list (str): D∞ 网格（比特）
        trials (int): 每个设置的试验数
        seed (str): 种子
        out_file (str): 相对 local_data 的输出路径
    """
    try:
        config = SweepConfig(experiment="fixedkl", trials=trials, seed=parse_seed(seed), kappa_bits=kappa,
                             delta_bits=tuple(parse_grid(delta_list)), algorithms=("bnb-astar", "bnb-gprs"),
                             out_path=out_file)
    except Exception as e:
        return _dumps({"status": "error", "message": f"参数错误：{str(e)}"})
    return _dumps(await run_fixedkl_sweep(config))


@mcp.tool()
async def run_divergence_benchmark(
    scales: str = "0..6:13",
    dims: str = "1,2,4,8,16,32,64",
    out_file: str = "bench/divergences.csv",
) -> str:
    """D_CS − D_KL 报告：Laplace 尺度网格与乘积高斯维度网格

    参数:
        scales (str): −ln b 网格
        dims (str): 维度网格
        out_file (str): 相对 local_data 的输出路径
    """
    try:
        config = SweepConfig(experiment="divergences", neg_log_scales=tuple(parse_grid(scales)),
                             dims=tuple(int(round(d)) for d in parse_grid(dims)), out_path=out_file)
    except Exception as e:
        return _dumps({"status": "error", "message": f"参数错误：{str(e)}"})
    return _dumps(await run_divergence_report(config))


@mcp.tool()
async def run_validation_suite(scale: str = "quick", seed: str = "0xC0FFEE") -> str:
    """运行验证套件（精确性、运行时间律、码长界、往返编码、散度夹逼）

    参数:
        scale (str): quick（数分钟）| full（完整规模）
        seed (str): 种子

    返回:
        str: JSON 报告，checks 中每项含 id / name / passed / measured / tolerance
    """
    try:
        config = SweepConfig(experiment="validate", seed=parse_seed(seed))
        return _dumps(await run_validation(config, scale))
    except Exception as e:
        return _dumps({"status": "error", "message": f"验证失败：{str(e)}"})


if __name__ == "__main__":
    # 在启动 MCP 服务器之前恢复 stdout，因为 MCP 需要通过 stdout 进行 JSON-RPC 通信
    sys.stdout = _original_stdout
    print("🚀 启动MCP服务器...", file=sys.stderr, flush=True)

    # 启动MCP服务器（使用标准输入输出传输）
    mcp.run(transport='stdio')
