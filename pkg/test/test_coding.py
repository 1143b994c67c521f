"""
编码测试：Elias / zeta 码、堆路径、分支定界两段码、并行序号与排序均匀数码
"""

import math
import os
import sys

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np

from rec_tools.coding import (
    BitReader,
    BitString,
    bnb_depth_alpha,
    decode_bnb_run,
    decode_heap_path,
    decode_parallel_index,
    elias_delta_decode,
    elias_delta_encode,
    elias_gamma_decode,
    elias_gamma_encode,
    encode_bnb_run,
    encode_heap_path,
    encode_parallel_index,
    geometric_log_bound,
    global_index_alpha,
    sorted_uniform_decode,
    sorted_uniform_encode,
    zeta_decode,
    zeta_encode,
    zeta_entropy_bound,
    zeta_ideal_length,
)
from rec_tools.core_distributions import make_awgn_pair
from rec_tools.divergences import kl_divergence, solve_stretch
from rec_tools.poisson_process import SeedStream
from rec_tools.samplers_bnb import bnb_astar, bnb_gprs
from rec_tools.samplers_global import rejection_sample

PAIR = make_awgn_pair(0.7, 3.0, 1.0)


def _raises(fn, keyword):
    try:
        fn()
    except ValueError as e:
        assert keyword in str(e), f"expected {keyword!r} in {e!r}"
        return
    raise AssertionError(f"expected ValueError containing {keyword!r}")


def test_bit_string():
    bits = BitString("1011001")
    assert len(bits) == 7 and str(bits + BitString("1")) == "10110011"
    assert BitString.from_int(5, 4).bits == "0101"
    assert BitString.from_hex(bits.to_hex()) == bits
    assert BitString.from_bytes(BitString("").to_bytes()) == BitString("")
    _raises(lambda: BitString("012"), "0/1")
    _raises(lambda: BitString.from_int(8, 3), "does not fit")
    _raises(lambda: BitString.from_bytes(b"\x01"), "corrupt code")
    _raises(lambda: BitString.from_bytes((20).to_bytes(8, "little") + b"\xff"), "corrupt code")
    print("✓ 比特串与字节封装")


def test_elias_codes():
    assert elias_gamma_encode(1).bits == "1"
    assert elias_gamma_encode(5).bits == "00101"
    assert len(elias_delta_encode(1000)) == len(elias_gamma_encode(10)) + 9
    stream = BitString.concat([elias_gamma_encode(n) for n in (1, 2, 17)] + [elias_delta_encode(1000)])
    reader = BitReader(stream)
    assert [elias_gamma_decode(reader) for _ in range(3)] == [1, 2, 17]
    assert elias_delta_decode(reader) == 1000 and reader.remaining == 0
    _raises(lambda: elias_gamma_encode(0), "n >= 1")
    print("✓ Elias gamma / delta")


def test_zeta_code_lengths():
    alpha = 1.5
    for n in (1, 2, 3, 10, 1000, 2 ** 20):
        code = zeta_encode(n, alpha)
        assert zeta_decode(code, alpha) == n
        assert len(code) <= zeta_ideal_length(n, alpha) + 2.0, (n, len(code))
    print("✓ zeta 码长不超过理想码长 + 2")


def test_zeta_is_prefix_free():
    alpha = global_index_alpha(3.0)
    values = [4, 1, 77, 2, 1]
    reader = BitReader(BitString.concat(zeta_encode(n, alpha) for n in values))
    assert [zeta_decode(reader, alpha) for _ in values] == values
    assert reader.remaining == 0
    _raises(lambda: zeta_decode(BitString(""), alpha), "truncated code")
    print("✓ zeta 码可连续解码")


CODECS = (
    ("elias-gamma", elias_gamma_encode, elias_gamma_decode),
    ("elias-delta", elias_delta_encode, elias_delta_decode),
    ("zeta-capped", lambda n: zeta_encode(n, 1.5, n_max=1024, escape=False),
     lambda src: zeta_decode(src, 1.5, n_max=1024, escape=False)),
    ("zeta-escaped", lambda n: zeta_encode(n, 1.5, n_max=64), lambda src: zeta_decode(src, 1.5, n_max=64)),
)


def _assert_prefix_free(codes):
    words = sorted(set(codes))
    for i, a in enumerate(words):
        for b in words[i + 1:]:
            assert not b.startswith(a) and not a.startswith(b), (a, b)


def test_integer_codes_exhaustive_roundtrip():
    for name, encode, decode in CODECS:
        codes = []
        for n in range(1, 2 ** 10 + 1):
            code = encode(n)
            reader = BitReader(code)
            assert decode(reader) == n and reader.remaining == 0, (name, n)
            codes.append(code.bits)
        _assert_prefix_free(codes)
        print(f"✓ {name}: n ≤ 1024 全部往返且码字集无前缀关系")


def test_integer_codes_prefix_free_on_random_inputs():
    rng = np.random.default_rng(20240611)
    values = [int(v) for v in rng.zipf(1.3, 1000)]
    for name, encode, decode in CODECS:
        inputs = [min(v, 1024) for v in values] if name == "zeta-capped" else values
        codes = [encode(n) for n in inputs]
        _assert_prefix_free([c.bits for c in codes])
        reader = BitReader(BitString.concat(codes))
        assert [decode(reader) for _ in inputs] == inputs, name
        assert reader.remaining == 0
        print(f"✓ {name}: 1000 个随机输入两两无前缀关系，拼接后逐个解码")


def test_zeta_escape():
    alpha = 1.25
    code = zeta_encode(500, alpha, n_max=100)
    assert zeta_decode(code, alpha, n_max=100) == 500
    _raises(lambda: zeta_encode(500, alpha, n_max=100, escape=False), "index exceeds cap")
    _raises(lambda: zeta_encode(1, 1.0), "exponent")
    print("✓ 超出截断上限走逃逸码")


def test_alpha_helpers():
    assert global_index_alpha(1.0) == 1.5
    assert global_index_alpha(-3.0) == 2.0
    lb_e = 1.0 / math.log(2.0)
    assert math.isclose(bnb_depth_alpha(0.0, "bnb-astar"), 1.0 + 1.0 / (2.0 / (lb_e - 1.0) + 2.0))
    assert bnb_depth_alpha(4.0, "bnb-gprs") < bnb_depth_alpha(1.0, "bnb-gprs")
    _raises(lambda: bnb_depth_alpha(1.0, "rs"), "unknown")
    assert math.isclose(geometric_log_bound(1.0), math.e)
    assert zeta_entropy_bound(1.0) == 3.0
    print("✓ zeta 指数与界")


def test_heap_path():
    # 二进小数保证 1 − u 精确
    uniforms = [0.25, 0.375, 0.875, 0.5]
    path = (0, 1, 0, 1)
    fractions = [u if b == 0 else 1.0 - u for u, b in zip(uniforms, path)]
    code = encode_heap_path(fractions, path)
    assert decode_heap_path(code, len(path), lambda d, _prefix: uniforms[d]) == path
    assert len(code) <= -math.log2(math.prod(fractions)) + 2.0
    assert len(encode_heap_path([], ())) == 0
    _raises(lambda: encode_heap_path([0.5], (0, 1)), "one fraction per path bit")
    print("✓ 堆路径区间编码")


def test_bnb_two_part_code():
    stretch = solve_stretch(PAIR)
    kl = kl_divergence(PAIR)
    alpha_gprs = bnb_depth_alpha(kl, "bnb-gprs")
    alpha_astar = bnb_depth_alpha(math.log2(PAIR.sup_bound), "bnb-astar")
    for i in range(60):
        seed = SeedStream(0xC0DE).fold_in(i)
        for run, alpha in ((bnb_gprs(PAIR, stretch, seed), alpha_gprs),
                           (bnb_astar(PAIR, None, seed), alpha_astar)):
            code = encode_bnb_run(run, alpha)
            depth, path, sample = decode_bnb_run(code, seed, PAIR, alpha)
            assert (depth, path, sample) == (run.depth, run.path_bits, run.sample)
            # 只给提议分布也能解码
            assert decode_bnb_run(code, seed, PAIR.proposal, alpha)[2] == run.sample
    print("✓ 分支定界两段码往返")


def test_parallel_index():
    alpha = 1.5
    code = encode_parallel_index((3, 17), 4, alpha)
    assert code.bits[:2] == "11"
    assert decode_parallel_index(code, 4, alpha) == (3, 17)
    assert decode_parallel_index(encode_parallel_index((0, 5), 1, alpha), 1, alpha) == (0, 5)
    assert decode_parallel_index(encode_parallel_index((4, 2), 5, alpha), 5, alpha) == (4, 2)
    print("✓ 并行序号码")


def test_sorted_uniform_code():
    info = kl_divergence(PAIR)
    for i in range(60):
        seed = SeedStream(0x5EED).fold_in(i)
        run = rejection_sample(PAIR, None, seed)
        code = sorted_uniform_encode(seed, PAIR, None, info, run=run)
        assert code.L == (run.selected_index - 1).bit_length()
        assert 1 <= code.rank <= 2 ** code.L
        n, sample = sorted_uniform_decode(code.bits, seed, PAIR.proposal, info)
        assert (n, sample) == (run.selected_index, run.sample)
    print("✓ 排序均匀数码往返")


if __name__ == "__main__":
    print("=== 编码测试 ===\n")
    test_bit_string()
    test_elias_codes()
    test_zeta_code_lengths()
    test_zeta_is_prefix_free()
    test_integer_codes_exhaustive_roundtrip()
    test_integer_codes_prefix_free_on_random_inputs()
    test_zeta_escape()
    test_alpha_helpers()
    test_heap_path()
    test_bnb_two_part_code()
    test_parallel_index()
    test_sorted_uniform_code()
    print("\n全部通过")
