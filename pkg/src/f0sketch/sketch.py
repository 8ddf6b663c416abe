"""The inner distinct-elements sketch.

A sketch is an l x b table of levels plus one shared cut-off level q.  Row i
is driven by the hash triple (f, g, h) found at the i-th vertex of an
expander walk over the triple space: element x lands in bin h(g(x)) of row i
with level f(x), and each bin keeps the deepest level it has seen.  When the
gamma-coded size of the table exceeds C5*b*l bits, every entry is lowered and
q raised by the same amount, just enough to fit.

The state reached depends only on the seed and the set of distinct elements,
never on the order or grouping of inserts and merges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .expander import WalkSeed, WalkSpace, sample_walk, walk_from_seed
from .hashing import GeometricFamily, GeometricHash, KWiseFamily, KWiseHash
from .params import Params

LEVEL_DTYPE = np.int64
THRESHOLD_OFFSET = 9


class SketchMismatch(ValueError):
    """Sketches built from different parameters or seeds were combined."""


@dataclass(frozen=True)
class HashTriple:
    f: GeometricHash
    g: KWiseHash
    h: KWiseHash

    def locate(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(bins, levels) for every element of ``xs``."""
        levels = self.f.eval_many(xs).astype(LEVEL_DTYPE)
        bins = self.h.eval_many(self.g.eval_many(xs)).astype(np.int64)
        return bins, levels

    def __call__(self, x: int) -> tuple[int, int]:
        return self.h(self.g(x)), self.f(x)


@dataclass(frozen=True)
class TripleSpace:
    """The product family G_2([n]) x H_2([n],[C7 b^2]) x H_k([C7 b^2],[b])."""

    geometric: GeometricFamily
    pairwise: KWiseFamily
    binning: KWiseFamily

    @classmethod
    def for_params(cls, params: Params) -> TripleSpace:
        return cls(
            GeometricFamily(params.domain_bits),
            KWiseFamily(2, params.domain_bits, params.pre_bits),
            KWiseFamily(params.k, params.pre_bits, params.log2_b),
        )

    @property
    def seed_bits(self) -> int:
        return self.geometric.seed_bits + self.pairwise.seed_bits + self.binning.seed_bits

    @property
    def size(self) -> int:
        return 1 << self.seed_bits

    def triple(self, idx: int) -> HashTriple:
        """Decode a triple index: f in the low bits, then g, then h."""
        if not 0 <= idx < self.size:
            raise ValueError("triple index out of range")
        gb, pb = self.geometric.seed_bits, self.pairwise.seed_bits
        return HashTriple(
            self.geometric.from_index(idx & ((1 << gb) - 1)),
            self.pairwise.from_index((idx >> gb) & ((1 << pb) - 1)),
            self.binning.from_index(idx >> (gb + pb)),
        )

    def index(self, triple: HashTriple) -> int:
        gb, pb = self.geometric.seed_bits, self.pairwise.seed_bits
        return triple.f.index | (triple.g.index << gb) | (triple.h.index << (gb + pb))


def walk_space_for(params: Params) -> WalkSpace:
    return WalkSpace.make(TripleSpace.for_params(params).size, params.log_lambda, params.l)


@dataclass(frozen=True)
class Seed:
    """The coin flips of the inner algorithm: one walk over the triple space."""

    params: Params
    walk: WalkSeed

    @cached_property
    def triple_space(self) -> TripleSpace:
        return TripleSpace.for_params(self.params)

    @cached_property
    def walk_space(self) -> WalkSpace:
        return walk_space_for(self.params)

    @cached_property
    def row_indices(self) -> tuple[int, ...]:
        return tuple(walk_from_seed(self.walk_space, self.walk))

    @cached_property
    def rows(self) -> tuple[HashTriple, ...]:
        return tuple(self.triple_space.triple(i) for i in self.row_indices)

    @property
    def index(self) -> int:
        return self.walk_space.seed_index(self.walk)

    def locate(self, xs) -> tuple[np.ndarray, np.ndarray]:
        """Bins and levels, each of shape (l, len(xs))."""
        xs = check_elements(xs, self.params.n)
        bins = np.empty((self.params.l, xs.size), dtype=np.int64)
        levels = np.empty((self.params.l, xs.size), dtype=LEVEL_DTYPE)
        for i, triple in enumerate(self.rows):
            bins[i], levels[i] = triple.locate(xs)
        return bins, levels


def check_elements(xs, n: int) -> np.ndarray:
    arr = np.asarray(xs)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if arr.size == 0:
        return np.zeros(0, dtype=np.uint64)
    if arr.dtype.kind == "O":
        if any(int(v) < 0 or int(v) >= n for v in arr):
            raise ValueError(f"stream element outside [0, {n})")
        return arr.astype(np.uint64)
    if arr.dtype.kind not in "iu":
        raise TypeError("stream elements must be integers")
    if (arr.dtype.kind == "i" and arr.min() < 0) or int(arr.max()) >= n:
        raise ValueError(f"stream element outside [0, {n})")
    return arr.astype(np.uint64)


def init(params: Params, entropy) -> Seed:
    """Draw the seed; the only randomized step of the whole algorithm."""
    return Seed(params, sample_walk(walk_space_for(params), entropy))


@dataclass(frozen=True, eq=False)
class Sketch:
    params: Params
    table: np.ndarray
    q: int

    def __post_init__(self):
        table = np.array(self.table, dtype=LEVEL_DTYPE)
        if table.shape != (self.params.l, self.params.b):
            raise SketchMismatch(
                f"table shape {table.shape} does not match (l, b) = "
                f"({self.params.l}, {self.params.b})"
            )
        if table.size and table.min() < -1:
            raise ValueError("table entries must be >= -1")
        if self.q < 0:
            raise ValueError("cut-off level must be non-negative")
        table.flags.writeable = False
        object.__setattr__(self, "table", table)

    @classmethod
    def empty(cls, params: Params) -> Sketch:
        return cls(params, np.full((params.l, params.b), -1, dtype=LEVEL_DTYPE), 0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Sketch):
            return NotImplemented
        return (
            self.q == other.q
            and self.params == other.params
            and np.array_equal(self.table, other.table)
        )

    def __repr__(self) -> str:
        used = int((self.table >= 0).sum())
        return f"Sketch(l={self.params.l}, b={self.params.b}, q={self.q}, nonempty_bins={used})"

    @property
    def space_bits(self) -> int:
        """Size of the gamma-coded table region: sum of 2*floor(ld(B+2))+1."""
        return 2 * space_usage(self.table) + self.table.size


def floor_log2(values: np.ndarray) -> np.ndarray:
    """floor(ld v) for positive integer arrays."""
    return np.frexp(np.asarray(values, dtype=np.float64))[1].astype(np.int64) - 1


def space_usage(table: np.ndarray) -> int:
    """Sum of floor(ld(B[i,j] + 2)) over the table."""
    nonempty = table[table >= 0]
    if nonempty.size == 0:
        return 0
    return int(floor_log2(nonempty + 2).sum())


def cutoff_derivative(table: np.ndarray) -> np.ndarray:
    """chi[d]: bits saved by shifting every entry by d instead of d - 1.

    An entry with x = B+2 loses one more bit each time x - d drops below a
    power of two, i.e. at d = x - (2^k - 1) for 1 <= k <= floor(ld x).
    """
    table = np.asarray(table)
    top = int(table.max()) if table.size else -1
    chi = np.zeros(max(top, -1) + 3, dtype=np.int64)
    x = table[table >= 0].astype(np.int64) + 2
    for k in range(1, (top + 2).bit_length()):
        hit = x[x >= (1 << k)]
        chi += np.bincount(hit - ((1 << k) - 1), minlength=chi.size)
    return chi


def find_required_cutoff(table: np.ndarray, params: Params) -> int:
    """Smallest shift that brings the table within the space budget."""
    budget = params.space_budget
    table = np.asarray(table)
    if table.size == 0:
        return 0
    top = int(table.max())
    if top < 0 or (top + 2).bit_length() - 1 <= budget // table.size:
        return 0  # even the widest entry everywhere fits
    excess = space_usage(table) - budget
    if excess <= 0:
        return 0
    saved = np.cumsum(cutoff_derivative(table))
    return int(np.searchsorted(saved, excess))


def compress(s: Sketch) -> Sketch:
    delta = find_required_cutoff(s.table, s.params)
    if delta == 0:
        return s
    return Sketch(s.params, np.maximum(s.table - delta, -1), s.q + delta)


def compress_naive(s: Sketch) -> Sketch:
    """Literal loop: shift by one until the budget holds (reference oracle)."""
    table, q = np.array(s.table), s.q
    while space_usage(table) > s.params.space_budget:
        q += 1
        table = np.maximum(table - 1, -1)
    return Sketch(s.params, table, q)


def _from_located(params: Params, bins: np.ndarray, levels: np.ndarray) -> Sketch:
    table = np.full((params.l, params.b), -1, dtype=LEVEL_DTYPE)
    for i in range(params.l):
        np.maximum.at(table[i], bins[i], levels[i])
    return compress(Sketch(params, table, 0))


def single(x: int, seed: Seed) -> Sketch:
    """Sketch of the singleton {x}."""
    bins, levels = seed.locate([x])
    return _from_located(seed.params, bins, levels)


def singles(xs, seed: Seed) -> list[Sketch]:
    """``[single(x, seed) for x in xs]`` with the hashing done in one batch."""
    bins, levels = seed.locate(xs)
    params = seed.params
    out = []
    rows = np.arange(params.l)
    for j in range(bins.shape[1]):
        table = np.full((params.l, params.b), -1, dtype=LEVEL_DTYPE)
        table[rows, bins[:, j]] = levels[:, j]
        out.append(compress(Sketch(params, table, 0)))
    return out


def merge(a: Sketch, b: Sketch) -> Sketch:
    if a.params != b.params:
        raise SketchMismatch("cannot merge sketches with different parameters")
    q = max(a.q, b.q)
    if a.q == b.q:
        table = np.maximum(a.table, b.table)
    else:
        table = np.maximum(
            np.maximum(a.table + (a.q - q), -1), np.maximum(b.table + (b.q - q), -1)
        )
    return compress(Sketch(a.params, table, q))


def merge_all(sketches: Iterable[Sketch]) -> Sketch:
    it = iter(sketches)
    try:
        acc = next(it)
    except StopIteration:
        raise ValueError("nothing to merge") from None
    for s in it:
        acc = merge(acc, s)
    return acc


def sketch_of(xs, seed: Seed) -> Sketch:
    """Sketch of all elements in ``xs`` at once.

    Equal to folding ``merge`` over the singletons in any order: the per-bin
    maxima are taken first and compress runs once at the end.
    """
    xs = check_elements(xs, seed.params.n)
    if xs.size == 0:
        return Sketch.empty(seed.params)
    bins, levels = seed.locate(xs)
    return _from_located(seed.params, bins, levels)


@dataclass(frozen=True)
class RowEstimate:
    threshold: int
    hits: int
    value: float
    saturated: bool


def row_estimates(s: Sketch) -> list[RowEstimate]:
    params = s.params
    b = params.b
    denom = math.log1p(-1 / b)
    out = []
    for row in s.table:
        shifted = row + s.q
        threshold = max(0, int(shifted.max()) - params.log2_b + THRESHOLD_OFFSET)
        hits = int((shifted >= threshold).sum())
        saturated = hits >= b
        if saturated:
            hits = b - 1
        value = math.ldexp(math.log1p(-hits / b) / denom, threshold) + 0.0  # no -0.0
        out.append(RowEstimate(threshold, hits, value, saturated))
    return out


def lower_median(values: Sequence[float]) -> float:
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def estimate(s: Sketch) -> float:
    return lower_median([r.value for r in row_estimates(s)])


def rho(r: float, b: int) -> float:
    """Expected number of occupied bins after r balls go into b bins."""
    return b * (1 - (1 - 1 / b) ** r)


def rho_inverse(p: float, b: int) -> float:
    return math.log1p(-p / b) / math.log1p(-1 / b)


def tau_oracle(seed: Seed, elements) -> Sketch:
    """Direct evaluation of the state for a non-empty element set.

    Uncompressed per-bin maxima are computed element by element, then the
    smallest cut-off q whose shifted table fits the budget is searched
    upward from 0.  Used only to check the operational path.
    """
    distinct = sorted({int(a) for a in elements})
    if not distinct:
        raise ValueError("the reference state is only defined for non-empty sets")
    params = seed.params
    xs = check_elements(np.array(distinct, dtype=np.uint64), params.n)
    uncompressed = []
    for triple in seed.rows:
        bins, levels = triple.locate(xs)
        deepest: dict[int, int] = {}
        for j, lev in zip(bins.tolist(), levels.tolist()):
            if lev > deepest.get(j, -1):
                deepest[j] = lev
        uncompressed.append(deepest)

    def usage(q: int) -> int:
        return sum(
            (max(v - q, -1) + 2).bit_length() - 1 for row in uncompressed for v in row.values()
        )

    q = 0
    while usage(q) > params.space_budget:
        q += 1
    table = np.full((params.l, params.b), -1, dtype=LEVEL_DTYPE)
    for i, row in enumerate(uncompressed):
        for j, v in row.items():
            table[i, j] = max(v - q, -1)
    return Sketch(params, table, q)
