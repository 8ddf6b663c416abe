"""Seedable hash families built from polynomials over GF(2^d).

``KWiseFamily`` is the Carter-Wegman family of polynomials of degree < k,
evaluated over GF(2^d) and truncated to the low ``out_bits`` bits.
``GeometricFamily`` composes the same evaluation with a trailing-zero count,
so that a fixed input reaches level >= j with probability exactly 2**-j.

A seed is the tuple of k coefficients.  Seeds are indexed by slicing the
index into k blocks of d bits, lowest block = constant coefficient.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gf2


def _domain_check(x: int, d: int) -> None:
    if not 0 <= x < (1 << d):
        raise ValueError(f"input {x} outside the hash domain [2^{d}]")


def _array_domain_check(xs: np.ndarray, d: int) -> None:
    if xs.size and d < 64 and int(xs.max()) >> d:
        raise ValueError(f"input outside the hash domain [2^{d}]")


def _coeffs_from_index(idx: int, k: int, d: int) -> tuple[int, ...]:
    mask = (1 << d) - 1
    return tuple((idx >> (i * d)) & mask for i in range(k))


def _index_from_coeffs(coeffs, d: int) -> int:
    idx = 0
    for i, c in enumerate(coeffs):
        idx |= c << (i * d)
    return idx


@dataclass(frozen=True)
class KWiseFamily:
    """H_k([2^domain_bits], [2^out_bits])."""

    k: int
    domain_bits: int
    out_bits: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("independence k must be >= 1")
        if self.out_bits < 0 or self.domain_bits < 0:
            raise ValueError("bit widths must be non-negative")

    @property
    def d(self) -> int:
        return max(1, self.domain_bits, self.out_bits)

    @property
    def seed_bits(self) -> int:
        return self.k * self.d

    @property
    def size(self) -> int:
        return 1 << self.seed_bits

    def from_index(self, idx: int) -> KWiseHash:
        if not 0 <= idx < self.size:
            raise ValueError(f"seed index {idx} outside [{self.size}]")
        return KWiseHash(self.k, self.d, self.out_bits, _coeffs_from_index(idx, self.k, self.d))


@dataclass(frozen=True)
class KWiseHash:
    k: int
    d: int
    out_bits: int
    coeffs: tuple[int, ...]

    def __post_init__(self):
        if len(self.coeffs) != self.k:
            raise ValueError(f"expected {self.k} coefficients, got {len(self.coeffs)}")
        if self.out_bits > self.d:
            raise ValueError("output width exceeds field degree")
        if any(not 0 <= c < (1 << self.d) for c in self.coeffs):
            raise ValueError("coefficient outside GF(2^d)")

    @property
    def index(self) -> int:
        return _index_from_coeffs(self.coeffs, self.d)

    def __call__(self, x: int) -> int:
        _domain_check(x, self.d)
        return gf2.eval_poly(self.coeffs, x, self.d) & ((1 << self.out_bits) - 1)

    def eval_many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.uint64)
        _array_domain_check(xs, self.d)
        full = gf2.poly_eval_many(self.coeffs, xs, self.d)
        return full & np.uint64((1 << self.out_bits) - 1)


@dataclass(frozen=True)
class GeometricFamily:
    """G_k([2^domain_bits]) with range [d + 1]."""

    domain_bits: int
    k: int = 2

    @property
    def d(self) -> int:
        return max(1, self.domain_bits)

    @property
    def seed_bits(self) -> int:
        return self.k * self.d

    @property
    def size(self) -> int:
        return 1 << self.seed_bits

    def from_index(self, idx: int) -> GeometricHash:
        if not 0 <= idx < self.size:
            raise ValueError(f"seed index {idx} outside [{self.size}]")
        return GeometricHash(self.k, self.d, _coeffs_from_index(idx, self.k, self.d))


def trailing_zeros(v: int, d: int) -> int:
    """Trailing zero count of a d-bit value; the all-zero value counts as d."""
    if v == 0:
        return d
    return (v & -v).bit_length() - 1


def trailing_zeros_many(vs: np.ndarray, d: int) -> np.ndarray:
    vs = np.asarray(vs, dtype=np.uint64)
    low = vs & (~vs + np.uint64(1))
    # powers of two are exact in float64, so frexp gives the exponent exactly
    tz = np.frexp(low.astype(np.float64))[1].astype(np.int64) - 1
    return np.where(vs == 0, d, tz)


@dataclass(frozen=True)
class GeometricHash:
    k: int
    d: int
    coeffs: tuple[int, ...]

    def __post_init__(self):
        if len(self.coeffs) != self.k:
            raise ValueError(f"expected {self.k} coefficients, got {len(self.coeffs)}")
        if any(not 0 <= c < (1 << self.d) for c in self.coeffs):
            raise ValueError("coefficient outside GF(2^d)")

    @property
    def index(self) -> int:
        return _index_from_coeffs(self.coeffs, self.d)

    def __call__(self, x: int) -> int:
        _domain_check(x, self.d)
        return trailing_zeros(gf2.eval_poly(self.coeffs, x, self.d), self.d)

    def eval_many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.uint64)
        _array_domain_check(xs, self.d)
        return trailing_zeros_many(gf2.poly_eval_many(self.coeffs, xs, self.d), self.d)


def seed_from_index(family: KWiseFamily | GeometricFamily, idx: int):
    """Map an index in [family.size] to the corresponding seed (bijective)."""
    return family.from_index(idx)
