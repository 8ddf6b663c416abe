"""The ``verify`` suite: every exhaustive check in one place.

Each function returns an ``oracles.Report``.  ``run_all`` is what the CLI
runs; the acceptance tests call the same functions.
"""
from __future__ import annotations

import math
import random
from fractions import Fraction
from itertools import product

import numpy as np

from .. import codec, gf2
from .. import sketch as sk
from ..expander import BaseGraph, WalkSpace, all_walk_seeds, walk_from_seed
from ..hashing import GeometricFamily, KWiseFamily
from ..params import STRICT, Constants, derive_outer_params, derive_params, independence_for
from . import oracles
from .oracles import Report

KWISE_CASES = ((3, 2, 2, 4), (4, 3, 3, 4), (3, 3, 3, 8), (4, 2, 3, 4), (3, 2, 4, 8))


def check_params() -> Report:
    rep = Report("parameter spot values")
    c = Constants()
    rep.require(derive_params(2**32, 0.5, 0.05, STRICT).l == 15, "l at delta=0.05")
    rep.require(derive_params(2**32, 1.0, 0.05, STRICT).b == 2**27, "b at eps=1, strict")
    rep.require(independence_for(1024) == 68, "k at b=1024")
    rep.require(derive_outer_params(2**32, 0.5, 1e-6).m == 18, "m at n=2^32, delta=1e-6")
    rep.require(c.c5_space == 33 and c.c5_space >= math.ceil(c.c1_dev_bound + 3), "C5 vs C1")
    return rep


def check_field_axioms(max_d: int = 4) -> Report:
    rep = Report("GF(2^d) field axioms")
    for d in range(1, max_d + 1):
        els = range(1 << d)
        for a, b in product(els, els):
            rep.require(gf2.mul(a, b, d) == gf2.mul(b, a, d), f"d={d}: mul not commutative")
            for c in els:
                ab_c = gf2.mul(gf2.mul(a, b, d), c, d)
                rep.require(ab_c == gf2.mul(a, gf2.mul(b, c, d), d), f"d={d}: mul not associative")
                rep.require(
                    gf2.mul(a, b ^ c, d) == gf2.mul(a, b, d) ^ gf2.mul(a, c, d),
                    f"d={d}: not distributive",
                )
        for a in range(1, 1 << d):
            rep.require(any(gf2.mul(a, x, d) == 1 for x in els), f"d={d}: {a} has no inverse")
    return rep


def check_hash_laws() -> Report:
    rep = Report("hash family laws")
    fam = KWiseFamily(2, 3, 3)
    for x, y in product(range(8), range(8)):
        if x == y:
            continue
        counts: dict[tuple[int, int], int] = {}
        for idx in range(fam.size):
            h = fam.from_index(idx)
            key = (h(x), h(y))
            counts[key] = counts.get(key, 0) + 1
        rep.require(
            len(counts) == 64 and set(counts.values()) == {1},
            f"pair ({x},{y}) not uniform over output pairs",
        )
    geo = GeometricFamily(4)
    for x in range(16):
        levels = [geo.from_index(i)(x) for i in range(geo.size)]
        for j in range(0, 5):
            rep.require(
                Fraction(sum(v >= j for v in levels), geo.size) == Fraction(1, 2**j),
                f"x={x}: P(level >= {j}) != 2^-{j}",
            )
    return rep


def check_expander_structure() -> Report:
    rep = Report("expander structure")
    for m in range(1, 6):
        a = BaseGraph(m).adjacency_matrix()
        rep.require(bool((a == a.T).all()), f"m={m}: adjacency not symmetric")
        rep.require(bool((a.sum(axis=1) == 8).all()), f"m={m}: not 8-regular")
    ws = WalkSpace.make(9, math.log(0.9), 2, 1)
    a = BaseGraph(3).adjacency_matrix()
    counts = np.zeros_like(a)
    for seed in all_walk_seeds(ws):
        u, v = walk_from_seed(ws, seed)
        counts[u, v] += 1
    rep.require(bool((counts == a).all()), "walk seeds do not hit each directed edge once")
    return rep


def random_over_budget_table(params, rng: np.random.Generator) -> np.ndarray:
    """A random table exceeding the space budget (not necessarily reachable)."""
    top = int(rng.integers(4, 40))
    table = rng.integers(-1, top + 1, size=(params.l, params.b))
    while sk.space_usage(table) <= params.space_budget:
        table = np.minimum(table + int(rng.integers(1, 5)), top + 8)
    return table


def compress_test_params():
    """Small parameters with a tight budget so that compress has work to do."""
    from ..params import with_constants

    base = derive_params(2**20, 0.5, 0.2, c6_practical=16)
    return with_constants(base, c5_space=2)


def check_compress(tables: int = 1000, seed: int = 0) -> Report:
    rep = Report("fast cut-off search vs naive loop")
    chi = sk.cutoff_derivative(np.array([[23]]))
    rep.require(set(np.nonzero(chi)[0].tolist()) == {10, 18, 22, 24}, "worked example for entry 23")
    rep.require(bool((chi[np.nonzero(chi)] == 1).all()), "worked example multiplicities")
    params = compress_test_params()
    rng = np.random.default_rng(seed)
    for i in range(tables):
        table = random_over_budget_table(params, rng)
        s = sk.Sketch(params, table, int(rng.integers(0, 5)))
        naive = sk.compress_naive(s)
        fast = sk.find_required_cutoff(table, params)
        rep.require(fast > 0, f"table {i}: over budget but no shift")
        rep.require(s.q + fast == naive.q, f"table {i}: fast {fast} vs naive {naive.q - s.q}")
        rep.require(sk.compress(s) == naive, f"table {i}: compressed states differ")
    return rep


def check_gamma_examples() -> Report:
    rep = Report("gamma code examples")
    for x, code in ((-1, "1"), (0, "010"), (5, "00111")):
        rep.require(codec.gamma_encode(x) == code, f"gamma({x}) != {code}")
        rep.require(codec.gamma_decode(code, 0) == (x, len(code)), f"decode {code}")
    return rep


def check_single_vs_tau(pairs: int = 20, seed: int = 0) -> Report:
    rep = Report("single element sketch vs reference state")
    params = derive_params(2**20, 0.25, 0.2)
    rnd = random.Random(seed)
    for _ in range(pairs):
        omega = sk.init(params, rnd)
        x = rnd.randrange(params.n)
        rep.require(sk.single(x, omega) == sk.tau_oracle(omega, [x]), f"x={x}")
    return rep


def run_all(quick: bool = False) -> list[Report]:
    reports = [
        check_params(),
        check_field_axioms(),
        check_hash_laws(),
        check_expander_structure(),
        check_compress(100 if quick else 1000),
        check_gamma_examples(),
        check_single_vs_tau(),
        oracles.check_balls_bins_moments(),
        oracles.check_kwise_balls_bins(KWISE_CASES),
        oracles.check_tail_bounds(),
    ]
    if not quick:
        dev = Report("deviation bound, Monte Carlo")
        for l in (2, 3, 4):
            res = oracles.deviation_monte_carlo(walk_len=l)
            dev.require(res.rate <= res.ceiling, f"l={l}: rate {res.rate} > {res.ceiling}")
        reports.append(dev)
    return reports
