"""One entry point over both layers.

``make_seed`` returns an inner seed when delta >= 1/ln(n) and an outer seed
otherwise; the remaining functions accept either kind.
"""
from __future__ import annotations

from typing import Union

from . import outer
from . import sketch as sk
from .params import (
    DEFAULT_C6_PRACTICAL,
    PRACTICAL,
    derive_outer_params,
    derive_params,
    outer_applicable,
)

AnySeed = Union[sk.Seed, outer.OuterSeed]
AnySketch = Union[sk.Sketch, outer.VectorSketch]


def make_seed(
    n: int,
    eps: float,
    delta: float,
    entropy,
    *,
    profile: str = PRACTICAL,
    c6_practical: int = DEFAULT_C6_PRACTICAL,
    layer: str = "auto",
) -> AnySeed:
    """``layer`` is "auto", "inner" or "outer"."""
    if layer not in ("auto", "inner", "outer"):
        raise ValueError(f"unknown layer {layer!r}")
    use_outer = layer == "outer" or (layer == "auto" and n >= 3 and outer_applicable(n, delta))
    if use_outer:
        op = derive_outer_params(n, eps, delta, profile, c6_practical=c6_practical)
        return outer.outer_init(op, entropy)
    return sk.init(derive_params(n, eps, delta, profile, c6_practical=c6_practical), entropy)


def empty(seed: AnySeed) -> AnySketch:
    if isinstance(seed, outer.OuterSeed):
        return outer.VectorSketch.empty(seed.params)
    return sk.Sketch.empty(seed.params)


def sketch_elements(xs, seed: AnySeed) -> AnySketch:
    if isinstance(seed, outer.OuterSeed):
        return outer.outer_sketch_of(xs, seed)
    return sk.sketch_of(xs, seed)


def merge(a: AnySketch, b: AnySketch) -> AnySketch:
    if isinstance(a, outer.VectorSketch) and isinstance(b, outer.VectorSketch):
        return outer.outer_merge(a, b)
    if isinstance(a, sk.Sketch) and isinstance(b, sk.Sketch):
        return sk.merge(a, b)
    raise sk.SketchMismatch("cannot merge an inner sketch with a vector sketch")


def estimate(s: AnySketch) -> float:
    if isinstance(s, outer.VectorSketch):
        return outer.outer_estimate(s)
    return sk.estimate(s)
