"""History-independent, mergeable distinct-elements sketches.

Typical use::

    import random
    from f0sketch import api

    seed = api.make_seed(n=2**32, eps=0.1, delta=0.05, entropy=random.Random(1))
    a = api.sketch_elements([1, 2, 3], seed)
    b = api.sketch_elements([3, 4], seed)
    api.estimate(api.merge(a, b))   # about 4
"""
from .params import Params, OuterParams, ParameterError, derive_params, derive_outer_params
from .sketch import Seed, Sketch, SketchMismatch, estimate, init, merge, single, sketch_of
from .outer import OuterSeed, VectorSketch

__all__ = [
    "OuterParams", "OuterSeed", "ParameterError", "Params", "Seed", "Sketch",
    "SketchMismatch", "VectorSketch", "derive_outer_params", "derive_params",
    "estimate", "init", "merge", "single", "sketch_of",
]
__version__ = "0.1.0"
