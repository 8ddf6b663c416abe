"""Arithmetic in the binary fields GF(2^d), 1 <= d <= 64.

Elements are plain Python ints whose bits are polynomial coefficients over
GF(2).  Each degree uses a fixed reduction polynomial: the irreducible
polynomial of degree d with the smallest integer representation.  Fixing it
makes every hash value, and therefore every sketch, reproducible bit for bit.

Besides the scalar API there is a batched polynomial evaluator compiled with
numba, used by the hash families on whole arrays of stream elements.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

MAX_DEGREE = 64

# Low-order part of the reduction polynomial for each degree, i.e. the
# polynomial is x^d + IRREDUCIBLE_TAILS[d].
IRREDUCIBLE_TAILS = {
    1: 0x0, 2: 0x3, 3: 0x3, 4: 0x3, 5: 0x5, 6: 0x3, 7: 0x3, 8: 0x1B,
    9: 0x3, 10: 0x9, 11: 0x5, 12: 0x9, 13: 0x1B, 14: 0x21, 15: 0x3, 16: 0x2B,
    17: 0x9, 18: 0x9, 19: 0x27, 20: 0x9, 21: 0x5, 22: 0x3, 23: 0x21, 24: 0x1B,
    25: 0x9, 26: 0x1B, 27: 0x27, 28: 0x3, 29: 0x5, 30: 0x3, 31: 0x9, 32: 0x8D,
    33: 0x4B, 34: 0x1B, 35: 0x5, 36: 0x35, 37: 0x3F, 38: 0x63, 39: 0x11, 40: 0x39,
    41: 0x9, 42: 0x27, 43: 0x59, 44: 0x21, 45: 0x1B, 46: 0x3, 47: 0x21, 48: 0x2D,
    49: 0x71, 50: 0x1D, 51: 0x4B, 52: 0x9, 53: 0x47, 54: 0x7D, 55: 0x47, 56: 0x95,
    57: 0x11, 58: 0x63, 59: 0x7B, 60: 0x3, 61: 0x27, 62: 0x69, 63: 0x3, 64: 0x1B,
}


def modulus(d: int) -> int:
    """Full reduction polynomial (including the x^d term) for degree d."""
    _check_degree(d)
    return (1 << d) | IRREDUCIBLE_TAILS[d]


def _check_degree(d: int) -> None:
    if not 1 <= d <= MAX_DEGREE:
        raise ValueError(f"unsupported field degree {d}; expected 1..{MAX_DEGREE}")


def clmul(a: int, b: int) -> int:
    """Carry-less product of two non-negative ints."""
    r = 0
    while b:
        if b & 1:
            r ^= a
        a <<= 1
        b >>= 1
    return r


def reduce(a: int, d: int) -> int:
    """Remainder of the polynomial ``a`` modulo the degree-d field polynomial."""
    p = modulus(d)
    while a.bit_length() > d:
        a ^= p << (a.bit_length() - 1 - d)
    return a


def add(a: int, b: int) -> int:
    return a ^ b


def mul(a: int, b: int, d: int) -> int:
    return reduce(clmul(a, b), d)


def eval_poly(coeffs, x: int, d: int) -> int:
    """Evaluate sum(coeffs[i] * x**i) by Horner's rule.

    An empty coefficient list is the zero polynomial and evaluates to 0.
    """
    acc = 0
    for c in reversed(coeffs):
        acc = mul(acc, x, d) ^ c
    return acc


@dataclass(frozen=True)
class FieldElem:
    """An element of GF(2^d) carrying its degree, for checked arithmetic."""

    bits: int
    d: int

    def __post_init__(self):
        _check_degree(self.d)
        if not 0 <= self.bits < (1 << self.d):
            raise ValueError(f"{self.bits} is not an element of GF(2^{self.d})")

    def _same_field(self, other: FieldElem) -> None:
        if not isinstance(other, FieldElem):
            raise TypeError(f"expected FieldElem, got {type(other).__name__}")
        if other.d != self.d:
            raise ValueError(f"field mismatch: GF(2^{self.d}) vs GF(2^{other.d})")

    def __add__(self, other: FieldElem) -> FieldElem:
        self._same_field(other)
        return FieldElem(self.bits ^ other.bits, self.d)

    __sub__ = __add__

    def __mul__(self, other: FieldElem) -> FieldElem:
        self._same_field(other)
        return FieldElem(mul(self.bits, other.bits, self.d), self.d)

    def __int__(self) -> int:
        return self.bits


def field_eval_poly(coeffs: list[FieldElem], x: FieldElem) -> FieldElem:
    """Checked Horner evaluation on FieldElem values (0 for an empty list)."""
    acc = FieldElem(0, x.d)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


# --- batched evaluation -----------------------------------------------------


def _shift4_table(d: int) -> np.ndarray:
    # entry t holds (t * x^d) mod p, used to fold the nibble pushed past bit d
    return np.array([reduce(t << d, d) for t in range(16)], dtype=np.uint64)


_TABLES: dict[int, np.ndarray] = {}


def _fold_table(d: int) -> np.ndarray:
    table = _TABLES.get(d)
    if table is None:
        table = _TABLES[d] = _shift4_table(d)
    return table


@numba.njit(cache=True)
def _poly_eval_kernel(coeffs, xs, d, tail, fold, out):
    one = np.uint64(1)
    fifteen = np.uint64(15)
    if d == 64:
        mask = np.uint64(0xFFFFFFFFFFFFFFFF)
    else:
        mask = (one << np.uint64(d)) - one
    top_bit = np.uint64(d - 1)
    nibbles = (d + 3) // 4
    k = coeffs.shape[0]
    # tables[j, v] = v * x^(4j) * x, so a product is one lookup per nibble
    tables = np.zeros((nibbles, 16), dtype=np.uint64)
    for idx in range(xs.shape[0]):
        base = xs[idx]
        for j in range(nibbles):
            if j > 0:
                if d >= 4:
                    top = base >> np.uint64(d - 4)
                else:
                    top = base << np.uint64(4 - d)
                base = ((base << np.uint64(4)) & mask) ^ fold[top]
            row = tables[j]
            row[1] = base
            for bit in (2, 4, 8):
                h = row[bit >> 1]
                dbl = (h << one) & mask
                if (h >> top_bit) & one:
                    dbl ^= tail
                row[bit] = dbl
            for v in (3, 5, 6, 7, 9, 10, 11, 12, 13, 14, 15):
                low = v & -v
                row[v] = row[v ^ low] ^ row[low]
        acc = coeffs[k - 1]
        for i in range(k - 2, -1, -1):
            r = coeffs[i]
            a = acc
            for j in range(nibbles):
                r ^= tables[j, a & fifteen]
                a >>= np.uint64(4)
            acc = r
        out[idx] = acc
    return out


def poly_eval_many(coeffs, xs, d: int) -> np.ndarray:
    """Evaluate one polynomial over GF(2^d) at every point of ``xs``.

    Returns a uint64 array.  An empty coefficient list yields zeros.
    """
    _check_degree(d)
    xs = np.ascontiguousarray(xs, dtype=np.uint64)
    out = np.zeros(xs.shape[0], dtype=np.uint64)
    if len(coeffs) == 0 or xs.shape[0] == 0:
        return out
    c = np.array([int(v) for v in coeffs], dtype=np.uint64)
    return _poly_eval_kernel(c, xs, d, np.uint64(IRREDUCIBLE_TAILS[d]), _fold_table(d), out)
