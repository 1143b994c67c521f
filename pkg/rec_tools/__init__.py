"""
REC 工具包 (rec_tools)

相对熵编码 / 信道模拟工具集合：
- core_distributions: 一维分布、目标/提议分布对及实验用构造器
- divergences: 宽度函数、KL / Rényi-∞ / 信道模拟散度、GPRS 伸缩函数求解
- poisson_process: 可按种子寻址的时空泊松过程
- samplers_global: 拒绝采样、A* 采样、GPRS 及其并行 / 限步版本
- samplers_bnb: 分支定界 A* 与分支定界 GPRS
- coding: zeta 编码、Elias gamma、精确区间编码、排序均匀数编码
- sample_codec: 单次采样编码 / 解码
- bench_runner / validation_suite / bench_cli: 基准实验与验证命令行
"""

__all__ = [
    "common_utils",
    "core_distributions",
    "divergences",
    "poisson_process",
    "samplers_global",
    "samplers_bnb",
    "coding",
    "stats_utils",
    "bench_runner",
    "validation_suite",
    "sample_codec",
    "bench_cli",
]
