import random
import struct
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from f0sketch import api, codec, outer
from f0sketch import sketch as sk
from f0sketch.codec import CodecError
from f0sketch.hashing import GeometricFamily, KWiseFamily
from f0sketch.params import derive_params, with_constants

GOLDEN = Path(__file__).parent / "golden"
GOLDEN_ELEMENTS = [3, 17, 17, 200, 4095, 1024, 77, 0]


@pytest.mark.parametrize("x,code", [(-1, "1"), (0, "010"), (1, "011"), (2, "00100"), (5, "00111"), (6, "0001000")])
def test_gamma_examples(x, code):
    assert codec.gamma_encode(x) == code
    assert codec.gamma_decode(code + "1", 0) == (x, len(code))


def gamma_reference(v: int) -> str:
    # textbook Elias gamma of v >= 1: len-1 zeros then v in binary
    b = bin(v)[2:]
    return "0" * (len(b) - 1) + b


@given(st.lists(st.integers(-1, 2**40), max_size=40))
def test_gamma_stream_is_prefix_decodable(xs):
    bits = "".join(codec.gamma_encode(x) for x in xs)
    assert bits == "".join(gamma_reference(x + 2) for x in xs)
    pos, out = 0, []
    while pos < len(bits):
        x, pos = codec.gamma_decode(bits, pos)
        out.append(x)
    assert out == xs


def test_gamma_rejects_bad_input():
    with pytest.raises(ValueError):
        codec.gamma_encode(-2)
    with pytest.raises(CodecError):
        codec.gamma_decode("000", 0)


def test_bitwriter_pads_with_zeros():
    w = codec.BitWriter()
    w.write_string("101")
    assert w.to_bytes() == b"\xa0"
    r = codec.BitReader(b"\xa1")
    assert r.read_bits(3) == 5
    with pytest.raises(CodecError):
        r.finish_byte()


def test_empty_sketch_bytes(small_params):
    blob = codec.encode_sketch(sk.Sketch.empty(small_params))
    cells = small_params.l * small_params.b
    assert cells == 640
    # one bit for q, one per cell, zero padded to a byte
    body = b"\xff" * ((cells + 1) // 8) + bytes([0xFF << (8 - (cells + 1) % 8) & 0xFF])
    assert blob == b"F0SK" + bytes([1, 0, 10, 6, 12]) + body
    assert codec.table_region_bits(sk.Sketch.empty(small_params).table) == cells


def test_single_entry_bytes():
    p = derive_params(2**4, 1.0, 0.9, c6_practical=2)
    table = np.full((p.l, p.b), -1)
    table[0, 1] = 5
    body = "00100" + "1" + "00111" + "1" * (p.l * p.b - 2)  # q=3 then entries
    s = sk.Sketch(p, table, 3)
    bits = body + "0" * (-len(body) % 8)
    expected = int(bits, 2).to_bytes(len(bits) // 8, "big")
    assert codec.encode_sketch(s)[9:] == expected
    assert codec.decode_sketch(codec.encode_sketch(s), p) == s


def test_round_trips(small_seed, tight_seed):
    rng = np.random.default_rng(0)
    for i in range(1000):
        seed = tight_seed if i % 2 else small_seed
        xs = rng.integers(0, seed.params.n, size=int(rng.integers(0, 300)), dtype=np.uint64)
        s = sk.sketch_of(xs, seed) if xs.size else sk.Sketch.empty(seed.params)
        blob = codec.encode_sketch(s)
        assert codec.decode_sketch(blob, seed.params) == s
        region = codec.table_region_bits(s.table)
        p = seed.params
        assert region <= (2 * p.consts.c5_space + 1) * p.b * p.l
        assert len(blob) * 8 - 9 * 8 - len(codec.gamma_encode(s.q - 1)) - region < 8


def test_compressed_round_trip(tight_params, tight_seed):
    xs = np.arange(0, tight_params.n, 3, dtype=np.uint64)
    s = sk.sketch_of(xs, tight_seed)
    assert s.q > 0
    assert codec.decode_sketch(codec.encode_sketch(s), tight_params) == s


def test_decode_errors(small_params, small_seed):
    blob = codec.encode_sketch(sk.sketch_of([1, 2, 3], small_seed))
    with pytest.raises(CodecError, match="magic"):
        codec.decode_sketch(b"XXXX" + blob[4:], small_params)
    with pytest.raises(CodecError, match="version"):
        codec.decode_sketch(blob[:4] + b"\x09" + blob[5:], small_params)
    with pytest.raises(CodecError):
        codec.decode_sketch(blob[:-3], small_params)
    with pytest.raises(CodecError, match="trailing"):
        codec.decode_sketch(blob + b"\x00", small_params)
    with pytest.raises(CodecError, match="does not match"):
        codec.decode_sketch(blob, derive_params(2**12, 0.5, 0.05, c6_practical=16))
    with pytest.raises(CodecError, match="padding"):
        codec.decode_sketch(blob[:-1] + bytes([blob[-1] | 1]), small_params)


def test_decode_rejects_space_violation(small_params):
    # a table exceeding the budget written by hand
    p = with_constants(small_params, c5_space=1)
    table = np.zeros((small_params.l, small_params.b), dtype=np.int64)
    table[3, 7] = 2  # one bit over the budget of one per cell
    s = sk.Sketch(small_params, table, 0)
    with pytest.raises(CodecError, match="space bound"):
        codec.decode_sketch(codec.encode_sketch(s), p)
    # far over the budget: the reader stops at the bit limit instead
    s = sk.Sketch(small_params, np.full_like(table, 30), 0)
    with pytest.raises(CodecError):
        codec.decode_sketch(codec.encode_sketch(s), p)


def test_hash_round_trip():
    rnd = random.Random(4)
    for fam in (KWiseFamily(5, 20, 7), KWiseFamily(3, 64, 64), GeometricFamily(12), KWiseFamily(1, 1, 1)):
        h = fam.from_index(rnd.randrange(fam.size))
        blob = codec.encode_hash(h)
        assert codec.decode_hash(blob) == h
        assert len(blob) == 5 + h.k * ((h.d + 7) // 8)
    with pytest.raises(CodecError):
        codec.decode_hash(struct.pack(">BHBB", 7, 1, 8, 8) + b"\x00")
    with pytest.raises(CodecError):
        codec.decode_hash(blob + b"\x00")


def test_walk_seed_round_trip(small_seed):
    ws = small_seed.walk_space
    blob = codec.encode_walk_seed(ws, small_seed.walk)
    assert codec.decode_walk_seed(blob, ws) == small_seed.walk
    with pytest.raises(CodecError):
        codec.decode_walk_seed(blob[:-1] + bytes([blob[-1] | 1]) if (3 * ws.steps) % 8 else blob + b"\x00", ws)


def test_seed_files():
    for layer, delta in (("inner", 0.2), ("outer", 1e-3)):
        seed = api.make_seed(2**12, 0.5, delta, random.Random(9), c6_practical=16, layer=layer)
        blob = codec.encode_seed(seed)
        assert codec.decode_seed(blob) == seed
        assert codec.fingerprint(codec.decode_seed(blob)) == codec.fingerprint(seed)
    with pytest.raises(CodecError, match="magic"):
        codec.decode_seed(b"F0SK" + blob[4:])
    with pytest.raises(CodecError, match="layer"):
        codec.decode_seed(blob[:5] + b"\x07" + blob[6:])


def test_nonstandard_constants_not_serialised(tight_seed):
    with pytest.raises(CodecError, match="standard constants"):
        codec.encode_seed(tight_seed)


def test_sketch_files():
    seed = api.make_seed(2**12, 0.5, 1e-3, random.Random(3), c6_practical=16, layer="outer")
    v = api.sketch_elements(range(50), seed)
    fp = codec.fingerprint(seed)
    f = codec.decode_sketch_file(codec.encode_sketch_file(v, fp))
    assert f.sketch == v and f.fingerprint == fp
    assert isinstance(f.sketch, outer.VectorSketch)
    assert codec.decode_vector_sketch(codec.encode_vector_sketch(v), seed.params) == v


@pytest.mark.parametrize("name", ["inner", "outer"])
def test_golden_files(name):
    seed_blob = (GOLDEN / f"{name}.seed").read_bytes()
    sketch_blob = (GOLDEN / f"{name}.sketch").read_bytes()
    seed = codec.decode_seed(seed_blob)
    expected = api.sketch_elements(GOLDEN_ELEMENTS, seed)
    f = codec.decode_sketch_file(sketch_blob)
    assert f.sketch == expected
    assert f.fingerprint == codec.fingerprint(seed)
    assert codec.encode_seed(seed) == seed_blob
    assert codec.encode_sketch_file(expected, codec.fingerprint(seed)) == sketch_blob
    delta = 0.2 if name == "inner" else 1e-3
    fresh = api.make_seed(2**12, 0.5, delta, random.Random(2024 if name == "inner" else 2025),
                          c6_practical=16, layer=name)
    assert fresh == seed
