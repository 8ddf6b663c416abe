import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from f0sketch import sketch as sk
from f0sketch.expander import RecordedBits
from f0sketch.params import derive_params, with_constants

# 0.999 quantile of the chi-square distribution with 15 degrees of freedom
CHI2_15_999 = 37.6973


def brute_usage(table):
    return sum((int(v) + 2).bit_length() - 1 for v in np.ravel(table))


def fold(sketches):
    acc = sketches[0]
    for s in sketches[1:]:
        acc = sk.merge(acc, s)
    return acc


def random_tree(items, rng):
    items = list(items)
    while len(items) > 1:
        i, j = rng.sample(range(len(items)), 2)
        merged = sk.merge(items[i], items[j])
        items = [x for k, x in enumerate(items) if k not in (i, j)] + [merged]
    return items[0]


elements = st.lists(st.integers(0, 2**12 - 1), min_size=1, max_size=300)


# --- layout -------------------------------------------------------------------


def test_triple_space_bijection(small_params):
    space = sk.TripleSpace.for_params(small_params)
    assert space.size == space.geometric.size * space.pairwise.size * space.binning.size
    rng = random.Random(0)
    for _ in range(200):
        idx = rng.randrange(space.size)
        assert space.index(space.triple(idx)) == idx
    t = space.triple(0)
    assert t.f.coeffs == (0, 0) and set(t.h.coeffs) == {0}
    with pytest.raises(ValueError):
        space.triple(space.size)


def test_triple_shapes(small_params):
    space = sk.TripleSpace.for_params(small_params)
    assert space.geometric.d == small_params.domain_bits
    assert (space.pairwise.k, space.pairwise.out_bits) == (2, small_params.pre_bits)
    assert (space.binning.k, space.binning.out_bits) == (small_params.k, small_params.log2_b)


def test_init_deterministic_and_structured(small_params):
    data = bytes(range(256)) * 16
    a = sk.init(small_params, RecordedBits(data))
    b = sk.init(small_params, RecordedBits(data))
    assert a == b and a.row_indices == b.row_indices
    assert len(a.rows) == small_params.l
    space = sk.TripleSpace.for_params(small_params)
    assert [space.index(t) for t in a.rows] == list(a.row_indices)


def test_row_zero_low_bits_uniform(small_params):
    rng = random.Random(1)
    size = sk.TripleSpace.for_params(small_params).size
    for _ in range(5):
        omega = sk.init(small_params, rng)
        assert omega.row_indices[0] == omega.walk.start % size
    counts = np.zeros(16)
    trials = 16_000
    for _ in range(trials):
        counts[(sk.init(small_params, rng).walk.start % size) & 15] += 1
    exp = trials / 16
    assert ((counts - exp) ** 2 / exp).sum() < CHI2_15_999


# --- single ---------------------------------------------------------------------


def test_single_one_entry_per_row(small_seed):
    p = small_seed.params
    s = sk.single(77, small_seed)
    assert s.q == 0
    assert ((s.table >= 0).sum(axis=1) == 1).all()
    bins, levels = small_seed.locate([77])
    assert s.table[np.arange(p.l), bins[:, 0]].tolist() == levels[:, 0].tolist()


def test_single_never_compresses_at_practical_params():
    p = derive_params(2**20, 0.1, 0.05)
    widest = (p.domain_bits + 2).bit_length() - 1
    assert p.l * widest <= p.space_budget


def test_single_equals_reference(accept_params):
    rng = random.Random(2)
    for _ in range(100):
        omega = sk.init(accept_params, rng)
        x = rng.randrange(accept_params.n)
        assert sk.single(x, omega) == sk.tau_oracle(omega, [x])


def test_element_checks(small_seed):
    with pytest.raises(ValueError):
        sk.single(2**12, small_seed)
    with pytest.raises(ValueError):
        sk.sketch_of([-1], small_seed)
    with pytest.raises(TypeError):
        sk.sketch_of([1.5], small_seed)


# --- merge ----------------------------------------------------------------------


def test_merge_laws(small_seed):
    a = sk.sketch_of(range(0, 300), small_seed)
    b = sk.sketch_of(range(200, 700), small_seed)
    c = sk.sketch_of(range(650, 900), small_seed)
    assert sk.merge(a, a) == a
    assert sk.merge(a, b) == sk.merge(b, a)
    assert sk.merge(sk.merge(a, b), c) == sk.merge(a, sk.merge(b, c))
    assert sk.merge(sk.Sketch.empty(a.params), a) == a
    x, y = sk.single(3, small_seed), sk.single(4, small_seed)
    assert sk.merge(x, y) == sk.merge(y, x)


def test_merge_rejects_other_params(small_seed, accept_params):
    a = sk.single(1, small_seed)
    with pytest.raises(sk.SketchMismatch):
        sk.merge(a, sk.Sketch.empty(accept_params))
    with pytest.raises(sk.SketchMismatch):
        sk.Sketch(small_seed.params, np.zeros((2, 2)), 0)


def test_merge_shifts_by_cut_off(tight_params):
    a = sk.Sketch(tight_params, np.full((tight_params.l, tight_params.b), -1), 3)
    table = np.full((tight_params.l, tight_params.b), -1)
    table[0, 0] = 5
    b = sk.Sketch(tight_params, table, 1)
    m = sk.merge(a, b)
    assert m.q == 3 and m.table[0, 0] == 3
    table[0, 0] = 1
    m = sk.merge(a, sk.Sketch(tight_params, table, 1))
    assert m.table[0, 0] == -1  # 1 + 1 - 3 clamps at -1


# --- compress -------------------------------------------------------------------


def test_compress_fixed_points(small_params):
    empty = sk.Sketch.empty(small_params)
    assert sk.compress(empty) == empty
    assert sk.find_required_cutoff(empty.table, small_params) == 0
    table = np.zeros((small_params.l, small_params.b), dtype=np.int64)
    s = sk.Sketch(small_params, table, 2)
    assert sk.compress(s) == s


def test_chi_worked_example():
    chi = sk.cutoff_derivative(np.array([[23]]))
    assert np.nonzero(chi)[0].tolist() == [10, 18, 22, 24]
    assert chi.sum() == (25).bit_length() - 1


@given(st.data())
def test_fast_cutoff_matches_naive_loop(data):
    base = derive_params(2**16, 0.5, 0.5, c6_practical=16)
    params = with_constants(base, c5_space=data.draw(st.integers(0, 4)))
    top = data.draw(st.integers(0, 70))
    arr = data.draw(st.lists(st.integers(-1, top), min_size=params.l * params.b,
                             max_size=params.l * params.b))
    table = np.array(arr).reshape(params.l, params.b)
    s = sk.Sketch(params, table, data.draw(st.integers(0, 3)))
    naive = sk.compress_naive(s)
    assert sk.compress(s) == naive
    assert sk.find_required_cutoff(table, params) == naive.q - s.q
    assert brute_usage(naive.table) <= params.space_budget


def test_space_usage_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(50):
        t = rng.integers(-1, 200, size=(3, 17))
        assert sk.space_usage(t) == brute_usage(t)


# --- estimate -------------------------------------------------------------------


def test_empty_and_singleton_estimates(accept_params, small_seed):
    assert sk.estimate(sk.Sketch.empty(accept_params)) == 0.0
    omega = sk.init(accept_params, random.Random(3))
    assert sk.estimate(sk.single(5, omega)) == 1.0
    rows = sk.row_estimates(sk.single(5, omega))
    assert all(r.threshold == 0 and r.hits == 1 and not r.saturated for r in rows)


def test_rho_inverse_consistency():
    for b in (512, 4096, 32768):
        for r in np.linspace(0, 0.9 * b, 37):
            p = sk.rho(r, b)
            assert abs(sk.rho_inverse(p, b) - r) <= 1e-9 * max(1.0, r)


def test_estimate_formula_on_synthetic_table(accept_params):
    p = accept_params
    table = np.full((p.l, p.b), -1)
    table[:, :10] = 3
    table[:, 10:30] = 7
    s = sk.Sketch(p, table, 1)
    rows = sk.row_estimates(s)
    threshold = max(0, 8 - p.log2_b + 9)
    hits = 20 if threshold > 4 else 30
    expect = 2**threshold * math.log(1 - hits / p.b) / math.log(1 - 1 / p.b)
    assert all(r.threshold == threshold and r.hits == hits for r in rows)
    assert sk.estimate(s) == pytest.approx(expect, rel=1e-12)


def test_saturated_row_is_clamped(accept_params):
    p = accept_params
    table = np.zeros((p.l, p.b), dtype=np.int64)
    rows = sk.row_estimates(sk.Sketch(p, table, 0))
    assert all(r.saturated and r.hits == p.b - 1 for r in rows)
    assert math.isfinite(sk.estimate(sk.Sketch(p, table, 0)))


def test_few_bins_put_threshold_above_every_entry(small_params):
    # with ld b < 9 the threshold always exceeds the deepest entry
    s = sk.Sketch(small_params, np.full((small_params.l, small_params.b), 4), 0)
    assert all(r.hits == 0 for r in sk.row_estimates(s))


def test_lower_median():
    assert sk.lower_median([4, 1, 3, 2]) == 2
    assert sk.lower_median([5, 1, 3]) == 3


# --- reference state and history independence ----------------------------------


def test_reference_state_needs_elements(small_seed):
    with pytest.raises(ValueError):
        sk.tau_oracle(small_seed, [])


@given(elements, elements)
def test_merge_of_reference_states(tight_seed, a, b):
    ta, tb = sk.tau_oracle(tight_seed, a), sk.tau_oracle(tight_seed, b)
    assert sk.merge(ta, tb) == sk.tau_oracle(tight_seed, a + b)


@given(elements, st.randoms(use_true_random=False))
def test_any_merge_tree_gives_reference_state(tight_seed, xs, rnd):
    # parts may overlap and contain repeats
    parts = [[x for x in xs if rnd.random() < 0.5] or [xs[0]] for _ in range(rnd.randint(1, 6))]
    parts.append(xs)
    leaves = []
    for part in parts:
        leaves.append(fold(sk.singles(part, tight_seed)) if rnd.random() < 0.5
                      else sk.sketch_of(part, tight_seed))
    expect = sk.tau_oracle(tight_seed, xs)
    assert random_tree(leaves, rnd) == expect
    assert sk.sketch_of(xs, tight_seed) == expect


def test_tight_budget_really_raises_cut_off(tight_seed):
    s = sk.sketch_of(range(0, 4000, 3), tight_seed)
    assert s.q > 0
    assert s == sk.tau_oracle(tight_seed, range(0, 4000, 3))


@given(elements, elements)
def test_monotone_in_the_element_set(tight_seed, a, b):
    small = sk.tau_oracle(tight_seed, a)
    big = sk.tau_oracle(tight_seed, a + b)
    assert small.q <= big.q
    assert ((small.table + small.q <= big.table + big.q) | (small.table == -1)).all()


@given(elements)
def test_state_invariants(tight_seed, xs):
    s = sk.sketch_of(xs, tight_seed)
    p = s.params
    assert sk.space_usage(s.table) <= p.space_budget
    assert s.q <= math.ceil(math.log2(p.n))
    assert (s.table[s.table >= 0] + s.q <= p.domain_bits).all()


def test_cut_off_stays_below_sub_sampling_level(small_params):
    # q <= max(0, ceil(ld |A|) - ld b) in at least 1 - delta/2 of trials
    rng = random.Random(8)
    trials, size, ok = 500, 1500, 0
    q_max = max(0, math.ceil(math.log2(size)) - small_params.log2_b)
    for _ in range(trials):
        omega = sk.init(small_params, rng)
        xs = rng.sample(range(small_params.n), size)
        ok += sk.sketch_of(xs, omega).q <= q_max
    rate = 1 - small_params.delta / 2
    floor = rate - 3 * math.sqrt(rate * (1 - rate) / trials)
    assert ok / trials >= floor
