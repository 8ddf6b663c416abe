"""Bit-exact binary formats.

Bits are written MSB-first within each byte; every multi-byte integer field
is big-endian unless noted.  Table entries x >= -1 are stored as the
Elias-gamma code of x + 2, so an entry costs 2*floor(ld(x+2)) + 1 bits.

Layouts (see README for worked hex examples):

    table block   "F0SK" ver:u8 l:u16 ld_b:u8 n_bits:u8
                  | gamma(q+1) gamma(B[0,0]+2) ... gamma(B[l-1,b-1]+2) | zero pad
    hash seed     kind:u8 k:u16 d:u8 out_bits:u8 | k coefficients, each
                  ceil(d/8) bytes little-endian
    walk seed     len:u32 start:len bytes | labels, 3 bits each, zero pad
    param block   n_len:u8 n:n_len bytes eps:f64 delta:f64 profile:u8 c6:u32
    seed file     "F0SD" ver:u8 layer:u8 | param block | walk seed
    sketch file   "F0SC" ver:u8 layer:u8 fingerprint:8 bytes | param block
                  | inner: one table block
                  | outer: m:u16 then m table blocks back to back

``layer`` is 0 for a single inner sketch and 1 for the repetition layer.
The fingerprint is an 8-byte BLAKE2b digest of the seed file; sketch files
with different fingerprints refuse to merge.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from . import outer
from . import sketch as sk
from .expander import WalkSeed, WalkSpace, unpack_labels
from .hashing import GeometricHash, KWiseHash
from .params import (
    PROFILES,
    Constants,
    OuterParams,
    Params,
    derive_outer_params,
    derive_params,
)

VERSION = 1
TABLE_MAGIC = b"F0SK"
SEED_MAGIC = b"F0SD"
SKETCH_MAGIC = b"F0SC"
LAYER_INNER = 0
LAYER_OUTER = 1
FINGERPRINT_BYTES = 8


class CodecError(ValueError):
    """Malformed, truncated or incompatible encoded data."""


# --- bit streams --------------------------------------------------------------


def gamma_encode(x: int) -> str:
    """Elias-gamma code of x + 2 as a '0'/'1' string."""
    if x < -1:
        raise ValueError(f"gamma code needs x >= -1, got {x}")
    digits = format(x + 2, "b")
    return "0" * (len(digits) - 1) + digits


def gamma_decode(bits: str, cursor: int = 0) -> tuple[int, int]:
    """Decode one code starting at ``cursor``; returns (x, next cursor)."""
    one = bits.find("1", cursor)
    if one < 0:
        raise CodecError("truncated gamma code")
    zeros = one - cursor
    end = one + zeros + 1
    if end > len(bits):
        raise CodecError("truncated gamma code")
    return int(bits[one:end], 2) - 2, end


class BitWriter:
    def __init__(self):
        self._parts: list[str] = []
        self._len = 0

    def __len__(self) -> int:
        return self._len

    def write_bits(self, value: int, nbits: int) -> None:
        if nbits == 0:
            return
        if not 0 <= value < (1 << nbits):
            raise ValueError(f"{value} does not fit in {nbits} bits")
        self._append(format(value, f"0{nbits}b"))

    def write_gamma(self, x: int) -> None:
        self._append(gamma_encode(x))

    def write_string(self, bits: str) -> None:
        self._append(bits)

    def _append(self, s: str) -> None:
        self._parts.append(s)
        self._len += len(s)

    def getvalue(self) -> str:
        return "".join(self._parts)

    def to_bytes(self) -> bytes:
        bits = self.getvalue()
        pad = -len(bits) % 8
        bits += "0" * pad
        if not bits:
            return b""
        return int(bits, 2).to_bytes(len(bits) // 8, "big")


def bytes_to_bits(data: bytes) -> str:
    if not data:
        return ""
    return format(int.from_bytes(data, "big"), f"0{8 * len(data)}b")


class BitReader:
    def __init__(self, data: bytes | str):
        self.bits = data if isinstance(data, str) else bytes_to_bits(data)
        self.pos = 0

    def read_bits(self, nbits: int) -> int:
        end = self.pos + nbits
        if end > len(self.bits):
            raise CodecError("unexpected end of bit stream")
        value = int(self.bits[self.pos:end], 2) if nbits else 0
        self.pos = end
        return value

    def read_gamma(self) -> int:
        x, self.pos = gamma_decode(self.bits, self.pos)
        return x

    def finish_byte(self) -> None:
        """Skip the zero padding up to the next byte boundary."""
        end = -(-self.pos // 8) * 8
        if end > len(self.bits) or "1" in self.bits[self.pos:end]:
            raise CodecError("non-zero padding")
        self.pos = end


class ByteCursor:
    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def take(self, count: int) -> bytes:
        end = self.pos + count
        if end > len(self.data):
            raise CodecError("unexpected end of data")
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def unpack(self, fmt: str):
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size))

    def expect_end(self) -> None:
        if self.pos != len(self.data):
            raise CodecError(f"{len(self.data) - self.pos} trailing bytes")


# --- table block --------------------------------------------------------------


def table_region_bits(table: np.ndarray) -> int:
    """Length of the gamma-coded table region of a sketch."""
    return 2 * sk.space_usage(table) + int(np.asarray(table).size)


def _header(params: Params) -> bytes:
    return TABLE_MAGIC + struct.pack(">BHBB", VERSION, params.l, params.log2_b, params.domain_bits)


def _gamma_table(table: np.ndarray) -> str:
    # codes of small values are looked up, larger ones built directly
    v = (np.asarray(table, dtype=np.int64) + 2).ravel()
    top = int(v.max()) if v.size else 1
    lookup = [gamma_encode(i - 2) if i else "" for i in range(top + 1)]
    return "".join([lookup[i] for i in v.tolist()])


def encode_sketch(s: sk.Sketch) -> bytes:
    w = BitWriter()
    w.write_gamma(s.q - 1)  # value q + 1
    w.write_string(_gamma_table(s.table))
    return _header(s.params) + w.to_bytes()


def _decode_sketch_at(data: bytes, pos: int, params: Params) -> tuple[sk.Sketch, int]:
    cur = ByteCursor(data, pos)
    if cur.take(4) != TABLE_MAGIC:
        raise CodecError("not a sketch table block (bad magic)")
    version, l, log2_b, n_bits = cur.unpack(">BHBB")
    if version != VERSION:
        raise CodecError(f"unsupported table format version {version}")
    if (l, log2_b, n_bits) != (params.l, params.log2_b, params.domain_bits):
        raise CodecError(
            f"table shape l={l}, ld b={log2_b}, n bits={n_bits} does not match "
            f"parameters l={params.l}, ld b={params.log2_b}, n bits={params.domain_bits}"
        )
    # at most (2*C5+1)*b*l table bits plus a short q code; never read past that
    limit = (2 * params.consts.c5_space + 1) * params.b * params.l + 2 * 64 + 8
    reader = BitReader(data[cur.pos: cur.pos + -(-limit // 8)])
    q = reader.read_gamma() + 1
    if q < 0:
        raise CodecError("negative cut-off level")
    count = params.l * params.b
    values = np.empty(count, dtype=np.int64)
    bits = reader.bits
    p = reader.pos
    for i in range(count):
        values[i], p = gamma_decode(bits, p)
    reader.pos = p
    reader.finish_byte()
    table = values.reshape(params.l, params.b)
    if sk.space_usage(table) > params.space_budget:
        raise CodecError("table exceeds the space bound")
    return sk.Sketch(params, table, q), cur.pos + reader.pos // 8


def decode_sketch(data: bytes, params: Params) -> sk.Sketch:
    s, end = _decode_sketch_at(data, 0, params)
    if end != len(data):
        raise CodecError(f"{len(data) - end} trailing bytes after sketch")
    return s


# --- hash seeds ---------------------------------------------------------------

_KIND_KWISE = 0
_KIND_GEOMETRIC = 1


def encode_hash(h: KWiseHash | GeometricHash) -> bytes:
    if isinstance(h, KWiseHash):
        head = struct.pack(">BHBB", _KIND_KWISE, h.k, h.d, h.out_bits)
    elif isinstance(h, GeometricHash):
        head = struct.pack(">BHBB", _KIND_GEOMETRIC, h.k, h.d, 0)
    else:
        raise TypeError(f"cannot encode {type(h).__name__}")
    width = (h.d + 7) // 8
    return head + b"".join(c.to_bytes(width, "little") for c in h.coeffs)


def decode_hash(data: bytes) -> KWiseHash | GeometricHash:
    cur = ByteCursor(data)
    kind, k, d, out_bits = cur.unpack(">BHBB")
    width = (d + 7) // 8
    coeffs = tuple(int.from_bytes(cur.take(width), "little") for _ in range(k))
    cur.expect_end()
    try:
        if kind == _KIND_KWISE:
            return KWiseHash(k, d, out_bits, coeffs)
        if kind == _KIND_GEOMETRIC:
            return GeometricHash(k, d, coeffs)
    except ValueError as exc:
        raise CodecError(str(exc)) from exc
    raise CodecError(f"unknown hash kind {kind}")


# --- walk seeds ---------------------------------------------------------------


def encode_walk_seed(ws: WalkSpace, seed: WalkSeed) -> bytes:
    ws.check(seed)
    start = seed.start.to_bytes((seed.start.bit_length() + 7) // 8, "big")
    labels = unpack_labels(seed.labels, ws.steps)
    bits = np.stack([(labels >> 2) & 1, (labels >> 1) & 1, labels & 1], axis=1).reshape(-1)
    return struct.pack(">I", len(start)) + start + np.packbits(bits).tobytes()


def _decode_walk_seed_at(cur: ByteCursor, ws: WalkSpace) -> WalkSeed:
    (length,) = cur.unpack(">I")
    start = int.from_bytes(cur.take(length), "big")
    nbytes = (3 * ws.steps + 7) // 8
    bits = np.unpackbits(np.frombuffer(cur.take(nbytes), dtype=np.uint8))
    if bits[3 * ws.steps:].any():
        raise CodecError("non-zero padding after walk labels")
    trip = bits[: 3 * ws.steps].reshape(-1, 3).astype(np.int64)
    labels = (trip[:, 0] << 2) | (trip[:, 1] << 1) | trip[:, 2]
    packed = 0
    if labels.size:
        # label j sits at bits 3j..3j+2 of the packed integer
        le = np.stack([labels & 1, (labels >> 1) & 1, (labels >> 2) & 1], axis=1).reshape(-1)
        packed = int.from_bytes(np.packbits(le.astype(np.uint8), bitorder="little").tobytes(), "little")
    seed = WalkSeed(start, packed)
    try:
        ws.check(seed)
    except ValueError as exc:
        raise CodecError(str(exc)) from exc
    return seed


def decode_walk_seed(data: bytes, ws: WalkSpace) -> WalkSeed:
    cur = ByteCursor(data)
    seed = _decode_walk_seed_at(cur, ws)
    cur.expect_end()
    return seed


# --- parameter block ----------------------------------------------------------


def _check_default_constants(params: Params) -> None:
    if params.consts != Constants():
        raise CodecError("files can only carry parameters with the standard constants")


def encode_param_block(p: Params | OuterParams) -> bytes:
    inner = p.inner if isinstance(p, OuterParams) else p
    _check_default_constants(inner)
    n_bytes = inner.n.to_bytes((inner.n.bit_length() + 7) // 8, "big")
    delta = p.delta
    return (
        struct.pack(">B", len(n_bytes)) + n_bytes
        + struct.pack(">ddBI", inner.eps, delta, PROFILES.index(inner.profile), inner.c6_practical)
    )


@dataclass(frozen=True)
class _ParamFields:
    n: int
    eps: float
    delta: float
    profile: str
    c6: int


def _read_param_block(cur: ByteCursor) -> _ParamFields:
    (n_len,) = cur.unpack(">B")
    n = int.from_bytes(cur.take(n_len), "big")
    eps, delta, profile, c6 = cur.unpack(">ddBI")
    if profile >= len(PROFILES):
        raise CodecError(f"unknown profile code {profile}")
    return _ParamFields(n, eps, delta, PROFILES[profile], c6)


def _params_from(fields: _ParamFields, layer: int) -> Params | OuterParams:
    try:
        if layer == LAYER_INNER:
            return derive_params(fields.n, fields.eps, fields.delta, fields.profile, c6_practical=fields.c6)
        if layer == LAYER_OUTER:
            return derive_outer_params(
                fields.n, fields.eps, fields.delta, fields.profile, c6_practical=fields.c6
            )
    except ValueError as exc:
        raise CodecError(f"invalid stored parameters: {exc}") from exc
    raise CodecError(f"unknown layer code {layer}")


# --- seed and sketch files ----------------------------------------------------


def encode_seed(seed: sk.Seed | outer.OuterSeed) -> bytes:
    layer = LAYER_OUTER if isinstance(seed, outer.OuterSeed) else LAYER_INNER
    head = SEED_MAGIC + struct.pack(">BB", VERSION, layer)
    return head + encode_param_block(seed.params) + encode_walk_seed(seed.walk_space, seed.walk)


def decode_seed(data: bytes) -> sk.Seed | outer.OuterSeed:
    cur = ByteCursor(data)
    if cur.take(4) != SEED_MAGIC:
        raise CodecError("not a seed file (bad magic)")
    version, layer = cur.unpack(">BB")
    if version != VERSION:
        raise CodecError(f"unsupported seed format version {version}")
    params = _params_from(_read_param_block(cur), layer)
    if layer == LAYER_OUTER:
        walk = _decode_walk_seed_at(cur, outer.outer_walk_space(params))
        seed = outer.OuterSeed(params, walk)
    else:
        walk = _decode_walk_seed_at(cur, sk.walk_space_for(params))
        seed = sk.Seed(params, walk)
    cur.expect_end()
    return seed


def fingerprint(seed: sk.Seed | outer.OuterSeed) -> bytes:
    return hashlib.blake2b(encode_seed(seed), digest_size=FINGERPRINT_BYTES).digest()


@dataclass(frozen=True)
class SketchFile:
    """A decoded sketch file: the sketch plus the fingerprint of its seed."""

    sketch: sk.Sketch | outer.VectorSketch
    fingerprint: bytes

    @property
    def params(self) -> Params | OuterParams:
        return self.sketch.params


def encode_vector_sketch(d: outer.VectorSketch) -> bytes:
    return struct.pack(">H", len(d.parts)) + b"".join(encode_sketch(p) for p in d.parts)


def decode_vector_sketch(data: bytes, op: OuterParams) -> outer.VectorSketch:
    v, end = _decode_vector_at(data, 0, op)
    if end != len(data):
        raise CodecError(f"{len(data) - end} trailing bytes after vector sketch")
    return v


def _decode_vector_at(data: bytes, pos: int, op: OuterParams) -> tuple[outer.VectorSketch, int]:
    cur = ByteCursor(data, pos)
    (m,) = cur.unpack(">H")
    if m != op.m:
        raise CodecError(f"vector holds {m} components, parameters need {op.m}")
    pos = cur.pos
    parts = []
    for _ in range(m):
        s, pos = _decode_sketch_at(data, pos, op.inner)
        parts.append(s)
    return outer.VectorSketch(op, tuple(parts)), pos


def encode_sketch_file(s: sk.Sketch | outer.VectorSketch, fp: bytes) -> bytes:
    if len(fp) != FINGERPRINT_BYTES:
        raise ValueError("fingerprint must be 8 bytes")
    if isinstance(s, outer.VectorSketch):
        head = SKETCH_MAGIC + struct.pack(">BB", VERSION, LAYER_OUTER) + fp
        return head + encode_param_block(s.params) + encode_vector_sketch(s)
    head = SKETCH_MAGIC + struct.pack(">BB", VERSION, LAYER_INNER) + fp
    return head + encode_param_block(s.params) + encode_sketch(s)


def decode_sketch_file(data: bytes) -> SketchFile:
    cur = ByteCursor(data)
    if cur.take(4) != SKETCH_MAGIC:
        raise CodecError("not a sketch file (bad magic)")
    version, layer = cur.unpack(">BB")
    if version != VERSION:
        raise CodecError(f"unsupported sketch format version {version}")
    fp = cur.take(FINGERPRINT_BYTES)
    params = _params_from(_read_param_block(cur), layer)
    if layer == LAYER_OUTER:
        s, end = _decode_vector_at(data, cur.pos, params)
    else:
        s, end = _decode_sketch_at(data, cur.pos, params)
    if end != len(data):
        raise CodecError(f"{len(data) - end} trailing bytes after sketch")
    return SketchFile(s, fp)
