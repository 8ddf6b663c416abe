"""Strongly explicit expanders and random-walk seed spaces.

The base graph is the 8-regular Margulis-Gabber-Galil multigraph on the
torus [m] x [m].  Its edges come from four affine maps and their inverses,
so the adjacency matrix is symmetric and every vertex has degree 8.  Its
normalized second eigenvalue is at most 5*sqrt(2)/8 for every m.

Smaller spectral bounds are reached by powering: one logical walk step is
``power_t`` base steps, so the powered graph is never materialized.

A walk space over a vertex set S of size N walks on a torus with m*m in
{N, 2N} and projects the torus vertex (x, y) onto (x*m + y) mod N.  Every
element of S has the same number of torus preimages, so the projection of
the uniform distribution is uniform.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterator, Sequence

import numpy as np

DEGREE = 8
LAMBDA0 = 5 * math.sqrt(2) / 8
LOG_INV_LAMBDA0 = -math.log(LAMBDA0)

# label -> (axis, sign, offset); label ^ 1 is the inverse map of label
_LABELS = (
    (0, 1, 0), (0, -1, 0), (0, 1, 1), (0, -1, -1),
    (1, 1, 0), (1, -1, 0), (1, 1, 1), (1, -1, -1),
)


def inverse_label(label: int) -> int:
    return label ^ 1


@dataclass(frozen=True)
class BaseGraph:
    """MGG torus graph on [m] x [m]."""

    m: int
    degree: int = DEGREE
    lambda0: float = LAMBDA0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("torus side must be >= 1")

    @property
    def vertex_count(self) -> int:
        return self.m * self.m

    def step(self, v: tuple[int, int], label: int) -> tuple[int, int]:
        return base_step(self, v, label)

    def vertex_index(self, v: tuple[int, int]) -> int:
        return v[0] * self.m + v[1]

    def vertex(self, index: int) -> tuple[int, int]:
        return divmod(index, self.m)

    def adjacency_matrix(self) -> np.ndarray:
        """Dense integer adjacency matrix (edge multiplicities); small m only."""
        size = self.vertex_count
        if size > 10_000:
            raise ValueError("graph too large to materialize")
        a = np.zeros((size, size), dtype=np.int64)
        for idx, label in product(range(size), range(DEGREE)):
            a[idx, self.vertex_index(self.step(self.vertex(idx), label))] += 1
        return a

    def neighbor_indices(self) -> np.ndarray:
        """Array of shape (8, m*m): neighbor index of each vertex per label."""
        idx = np.arange(self.vertex_count, dtype=np.int64)
        x, y = np.divmod(idx, self.m)
        out = np.empty((DEGREE, idx.size), dtype=np.int64)
        for label in range(DEGREE):
            nx, ny = _step_arrays(x, y, label, self.m)
            out[label] = nx * self.m + ny
        return out


def base_step(g: BaseGraph, v: tuple[int, int], label: int) -> tuple[int, int]:
    x, y = v
    m = g.m
    if not (0 <= x < m and 0 <= y < m):
        raise ValueError(f"vertex {v} outside the {m}x{m} torus")
    if not 0 <= label < DEGREE:
        raise ValueError(f"edge label {label} outside [8]")
    axis, sign, off = _LABELS[label]
    if axis == 0:
        return (x + sign * 2 * y + off) % m, y
    return x, (y + sign * 2 * x + off) % m


def _step_arrays(x, y, label, m):
    axis, sign, off = _LABELS[label]
    if axis == 0:
        return (x + sign * 2 * y + off) % m, y
    return x, (y + sign * 2 * x + off) % m


def torus_side(vertex_count: int) -> int:
    """Side m of the torus used for a vertex set of the given size.

    Perfect squares use m*m == N; powers of two with odd exponent use
    m*m == 2N.
    """
    if vertex_count < 1:
        raise ValueError("vertex set must be non-empty")
    r = math.isqrt(vertex_count)
    if r * r == vertex_count:
        return r
    if vertex_count & (vertex_count - 1) == 0:
        return 1 << ((vertex_count.bit_length() - 1 + 1) // 2)
    raise ValueError(f"no torus adaptation for a vertex set of size {vertex_count}")


def power_for(log_lambda: float) -> int:
    """Base steps per logical step so that LAMBDA0**t <= exp(log_lambda)."""
    if log_lambda > 0:
        raise ValueError("spectral target must be at most 1")
    return max(1, math.ceil(-log_lambda / LOG_INV_LAMBDA0))


@dataclass(frozen=True)
class WalkSeed:
    """A walk: start vertex on the torus plus packed 3-bit edge labels.

    Label j sits in bits 3j..3j+2 of ``labels``.
    """

    start: int
    labels: int


@dataclass(frozen=True)
class WalkSpace:
    vertex_count: int
    log_lambda: float
    walk_len: int
    power_t: int

    @classmethod
    def make(cls, vertex_count: int, log_lambda: float, walk_len: int, power_t: int | None = None):
        if walk_len < 1:
            raise ValueError("walks need at least one vertex")
        torus_side(vertex_count)  # validates the size
        return cls(vertex_count, log_lambda, walk_len, power_t or power_for(log_lambda))

    @property
    def side(self) -> int:
        return torus_side(self.vertex_count)

    @property
    def graph(self) -> BaseGraph:
        return BaseGraph(self.side)

    @property
    def torus_size(self) -> int:
        return self.side * self.side

    @property
    def steps(self) -> int:
        """Total number of base steps (labels) in one walk."""
        return (self.walk_len - 1) * self.power_t

    @property
    def seed_bits_per_step(self) -> int:
        return 3 * self.power_t

    @property
    def size(self) -> int:
        """Number of distinct walk seeds."""
        return self.torus_size << (3 * self.steps)

    def seed_index(self, seed: WalkSeed) -> int:
        self.check(seed)
        return seed.start + self.torus_size * seed.labels

    def seed_from_index(self, idx: int) -> WalkSeed:
        if not 0 <= idx < self.size:
            raise ValueError(f"walk index {idx} outside [{self.size}]")
        labels, start = divmod(idx, self.torus_size)
        return WalkSeed(start, labels)

    def check(self, seed: WalkSeed) -> None:
        if not 0 <= seed.start < self.torus_size:
            raise ValueError(f"start {seed.start} outside [{self.torus_size}]")
        if not 0 <= seed.labels < (1 << (3 * self.steps)):
            raise ValueError("walk seed carries the wrong number of labels")

    def project(self, torus_index: int) -> int:
        return torus_index % self.vertex_count


def unpack_labels(labels: int, count: int) -> np.ndarray:
    """Packed labels -> uint8 array of length ``count``."""
    if count == 0:
        return np.zeros(0, dtype=np.uint8)
    raw = np.frombuffer(labels.to_bytes((3 * count + 7) // 8, "little"), dtype=np.uint8)
    bits = np.unpackbits(raw, bitorder="little")[: 3 * count].reshape(count, 3)
    return (bits[:, 0] | (bits[:, 1] << 1) | (bits[:, 2] << 2)).astype(np.uint8)


def pack_labels(labels: Sequence[int]) -> int:
    arr = np.asarray(labels, dtype=np.uint8)
    if arr.size == 0:
        return 0
    if arr.max() >= DEGREE:
        raise ValueError("edge label outside [8]")
    bits = np.stack([arr & 1, (arr >> 1) & 1, (arr >> 2) & 1], axis=1).reshape(-1)
    return int.from_bytes(np.packbits(bits, bitorder="little").tobytes(), "little")


def walk_from_seed(ws: WalkSpace, seed: WalkSeed) -> list[int]:
    """Vertices (projected into [vertex_count]) visited by the walk."""
    ws.check(seed)
    m = ws.side
    x, y = divmod(seed.start, m)
    labels = unpack_labels(seed.labels, ws.steps)
    out = [ws.project(x * m + y)]
    pos = 0
    for _ in range(ws.walk_len - 1):
        for label in labels[pos: pos + ws.power_t].tolist():
            if label < 4:
                if label == 0:
                    x = (x + 2 * y) % m
                elif label == 1:
                    x = (x - 2 * y) % m
                elif label == 2:
                    x = (x + 2 * y + 1) % m
                else:
                    x = (x - 2 * y - 1) % m
            elif label == 4:
                y = (y + 2 * x) % m
            elif label == 5:
                y = (y - 2 * x) % m
            elif label == 6:
                y = (y + 2 * x + 1) % m
            else:
                y = (y - 2 * x - 1) % m
        pos += ws.power_t
        out.append(ws.project(x * m + y))
    return out


def sample_walk(ws: WalkSpace, entropy) -> WalkSeed:
    """Draw a uniform walk seed; ``entropy`` needs a ``getrandbits`` method."""
    size = ws.torus_size
    nbits = (size - 1).bit_length()
    while True:
        start = entropy.getrandbits(nbits) if nbits else 0
        if start < size:
            break
    labels = entropy.getrandbits(3 * ws.steps) if ws.steps else 0
    return WalkSeed(start, labels)


class RecordedBits:
    """Replays a fixed bit-stream (MSB-first) through ``getrandbits``."""

    def __init__(self, data: bytes):
        self._value = int.from_bytes(data, "big")
        self._remaining = 8 * len(data)

    def getrandbits(self, k: int) -> int:
        if k > self._remaining:
            raise EOFError("recorded bit-stream exhausted")
        self._remaining -= k
        return (self._value >> self._remaining) & ((1 << k) - 1)


def all_walk_seeds(ws: WalkSpace) -> Iterator[WalkSeed]:
    """Every seed of a (tiny) walk space, in index order."""
    if ws.size > 10**7:
        raise ValueError("walk space too large to enumerate")
    for idx in range(ws.size):
        yield ws.seed_from_index(idx)


def random_walks(ws: WalkSpace, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` independent uniform walks as an int array (count, walk_len).

    Vectorized over walks; meant for small tori in Monte-Carlo checks.
    """
    m = ws.side
    if m > 2**20:
        raise ValueError("torus too large for vectorized sampling")
    x, y = np.divmod(rng.integers(0, ws.torus_size, size=count, dtype=np.int64), m)
    out = np.empty((count, ws.walk_len), dtype=np.int64)
    out[:, 0] = (x * m + y) % ws.vertex_count
    for i in range(1, ws.walk_len):
        for _ in range(ws.power_t):
            labels = rng.integers(0, DEGREE, size=count)
            nx, ny = x.copy(), y.copy()
            for label in range(DEGREE):
                sel = labels == label
                nx[sel], ny[sel] = _step_arrays(x[sel], y[sel], label, m)
            x, y = nx, ny
        out[:, i] = (x * m + y) % ws.vertex_count
    return out


# --- test-only spectral utilities ------------------------------------------


@dataclass(frozen=True)
class SpectralEstimate:
    value: float
    residual: float
    iterations: int
    converged: bool


def spectral_bound_estimate(
    graph: BaseGraph | np.ndarray,
    *,
    power: int = 1,
    max_iter: int = 50_000,
    tol: float = 1e-10,
    seed: int = 0,
) -> SpectralEstimate:
    """Second largest absolute eigenvalue divided by the degree.

    Power iteration on A^(2*power), restricted to vectors orthogonal to the
    all-ones vector.  ``graph`` is a BaseGraph or a dense regular adjacency
    matrix.  A single vertex has value 0 by convention.
    """
    if isinstance(graph, BaseGraph):
        size = graph.vertex_count
        nbrs = graph.neighbor_indices()
        degree = float(DEGREE)

        def matvec(v):
            return v[nbrs].sum(axis=0)
    else:
        a = np.asarray(graph, dtype=np.float64)
        size = a.shape[0]
        rows = a.sum(axis=1)
        if not np.allclose(rows, rows[0]) or not np.allclose(a, a.T):
            raise ValueError("adjacency matrix must be symmetric and regular")
        degree = float(rows[0])

        def matvec(v):
            return a @ v

    if size <= 1:
        return SpectralEstimate(0.0, 0.0, 0, True)

    def apply(v):
        for _ in range(power):
            v = matvec(v)
        return v

    v = np.random.default_rng(seed).standard_normal(size)
    v -= v.mean()
    v /= np.linalg.norm(v)
    mu, residual = 0.0, math.inf
    for it in range(1, max_iter + 1):
        w = apply(v)
        mu = float(w @ w)  # Rayleigh quotient of A^(2*power) at unit v
        w2 = apply(w)
        w2 -= w2.mean()
        residual = float(np.linalg.norm(w2 - mu * v))
        norm = np.linalg.norm(w2)
        if norm == 0.0:
            return SpectralEstimate(0.0, 0.0, it, True)
        if residual <= tol * max(1.0, mu):
            return SpectralEstimate(math.sqrt(mu) / degree**power, residual, it, True)
        v = w2 / norm
    return SpectralEstimate(math.sqrt(mu) / degree**power, residual, max_iter, False)


def hitting_probability_exact(
    graph: BaseGraph, members: set[int], positions: set[int], walk_len: int, power: int = 1
) -> Fraction:
    """P(w_i in W for all i in I) for a uniform walk, computed exactly.

    Counts walks with integer matrix products (vertex indices are torus
    indices x*m + y).
    """
    a = graph.adjacency_matrix().astype(object)
    size = graph.vertex_count
    mask = np.array([1 if v in members else 0 for v in range(size)], dtype=object)
    counts = np.ones(size, dtype=object)
    for i in range(walk_len):
        if i > 0:
            for _ in range(power):
                counts = a.T.dot(counts)
        if i in positions:
            counts = counts * mask
    total = size * (DEGREE**power) ** (walk_len - 1)
    return Fraction(int(counts.sum()), total)
