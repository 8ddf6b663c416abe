"""Repetition layer for failure probabilities below 1/ln(n).

m inner sketches run side by side.  Their seeds are the vertices of a single
expander walk whose vertex set is the inner seed space itself, so the whole
vector costs one outer walk seed instead of m independent inner seeds.  The
estimate is the lower median of the m inner estimates.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

from . import sketch as sk
from .expander import WalkSeed, WalkSpace, sample_walk, walk_from_seed
from .params import OuterParams


def outer_walk_space(op: OuterParams) -> WalkSpace:
    inner = sk.walk_space_for(op.inner)
    return WalkSpace.make(inner.size, op.log_lambda_outer, op.m)


@dataclass(frozen=True)
class OuterSeed:
    params: OuterParams
    walk: WalkSeed

    @cached_property
    def walk_space(self) -> WalkSpace:
        return outer_walk_space(self.params)

    @cached_property
    def inner_walk_space(self) -> WalkSpace:
        return sk.walk_space_for(self.params.inner)

    @cached_property
    def vertex_indices(self) -> tuple[int, ...]:
        return tuple(walk_from_seed(self.walk_space, self.walk))

    @cached_property
    def inner_seeds(self) -> tuple[sk.Seed, ...]:
        ws = self.inner_walk_space
        return tuple(sk.Seed(self.params.inner, ws.seed_from_index(v)) for v in self.vertex_indices)

    @property
    def m(self) -> int:
        return self.params.m


def outer_init(op: OuterParams, entropy) -> OuterSeed:
    return OuterSeed(op, sample_walk(outer_walk_space(op), entropy))


@dataclass(frozen=True)
class VectorSketch:
    params: OuterParams
    parts: tuple[sk.Sketch, ...]

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if len(self.parts) != self.params.m:
            raise sk.SketchMismatch(f"expected {self.params.m} components, got {len(self.parts)}")
        if any(p.params != self.params.inner for p in self.parts):
            raise sk.SketchMismatch("component parameters differ from the vector parameters")

    @classmethod
    def empty(cls, op: OuterParams) -> VectorSketch:
        return cls(op, tuple(sk.Sketch.empty(op.inner) for _ in range(op.m)))


def outer_single(x: int, theta: OuterSeed) -> VectorSketch:
    return VectorSketch(theta.params, tuple(sk.single(x, s) for s in theta.inner_seeds))


def outer_sketch_of(xs, theta: OuterSeed) -> VectorSketch:
    return VectorSketch(theta.params, tuple(sk.sketch_of(xs, s) for s in theta.inner_seeds))


def outer_merge(a: VectorSketch, b: VectorSketch) -> VectorSketch:
    if a.params != b.params or len(a.parts) != len(b.parts):
        raise sk.SketchMismatch("cannot merge vector sketches with different parameters")
    return VectorSketch(a.params, tuple(sk.merge(x, y) for x, y in zip(a.parts, b.parts)))


def outer_estimate(d: VectorSketch) -> float:
    return sk.lower_median([sk.estimate(p) for p in d.parts])


def nu_oracle(theta: OuterSeed, elements) -> VectorSketch:
    """Componentwise reference state."""
    return VectorSketch(theta.params, tuple(sk.tau_oracle(s, elements) for s in theta.inner_seeds))
