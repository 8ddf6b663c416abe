import math

import pytest
from hypothesis import given, strategies as st

from f0sketch.params import (
    STRICT,
    Constants,
    ParameterError,
    derive_outer_params,
    derive_params,
    independence_for,
    log_lambda_for,
    outer_applicable,
    with_constants,
)


def test_constants_table():
    c = Constants()
    assert c.c2_eps == 4
    assert float(c.c3_bin_balls) == 7.5
    assert c.c4_bin_balls == 16
    assert c.c5_space == 33
    assert c.c6_delta == 9 * 2**23
    assert c.c7_pre_bins == 32
    assert math.isclose(c.c1_dev_bound, 29.1929, abs_tol=1e-4)
    assert c.c5_space >= math.ceil(c.c1_dev_bound + 3)


def test_rows_at_five_percent():
    # ceil(4 ln 40) = ceil(14.756)
    assert derive_params(2**32, 0.5, 0.05, STRICT).l == 15


def test_strict_bins_at_eps_one():
    # ceil(ld(9 * 2^23)) = ceil(26.17) = 27
    p = derive_params(2**32, 1.0, 0.05, STRICT)
    assert p.b == 2**27 and p.log2_b == 27


def test_independence_at_1024_bins():
    # ceil(7.5 ln 1024 + 16) = ceil(67.98)
    assert independence_for(1024) == 68


def test_outer_repetitions():
    # ceil(4 ln 1e6 / ln ln 2^32) = ceil(17.83)
    op = derive_outer_params(2**32, 0.5, 1e-6)
    assert op.m == 18
    assert math.isclose(op.inner.delta, 1 / math.log(2**32))
    assert math.isclose(op.lambda_outer, 1 / math.log(2**32))


def test_outer_boundary_and_bypass():
    n = 2**32
    edge = derive_outer_params(n, 0.5, (1 / math.log(n)) * 0.999999)
    assert edge.m >= 1
    with pytest.raises(ParameterError):
        derive_outer_params(n, 0.5, 1 / math.log(n))
    assert not outer_applicable(n, 0.2)


def test_practical_formulas():
    p = derive_params(2**20, 0.1, 0.05)
    assert (p.l, p.b, p.k) == (15, 32768, 94)
    assert p.pre_bins == 32 * 32768**2 and p.pre_bits == 35
    assert p.domain_bits == 20
    assert p.space_budget == 33 * 32768 * 15
    p64 = derive_params(2**20, 0.1, 0.05, c6_practical=64)
    assert p64.b == 8192


def test_lambda_is_carried_as_log():
    p = derive_params(2**32, 0.5, 0.05, STRICT)
    assert math.isclose(p.log_lambda, -15 * math.log(15) ** 3)
    assert p.lambda_ == math.exp(p.log_lambda)
    assert log_lambda_for(2) == math.log(1 / 16)  # 2 (ln 2)^3 < ln 16
    assert log_lambda_for(3) == -3 * math.log(3) ** 3


@pytest.mark.parametrize(
    "args",
    [(1, 0.1, 0.1), (2**10, 0.0, 0.1), (2**10, 1.5, 0.1), (2**10, 0.1, 0.0),
     (2**10, 0.1, 1.0), (2**10, float("nan"), 0.1), (2**70, 0.1, 0.1)],
)
def test_domain_errors(args):
    with pytest.raises(ParameterError):
        derive_params(*args)


def test_unknown_profile_and_single_bin():
    with pytest.raises(ParameterError):
        derive_params(2**10, 0.1, 0.1, "fast")
    with pytest.raises(ParameterError):
        derive_params(2**10, 1.0, 0.1, c6_practical=1)


@given(
    st.integers(2, 2**40),
    st.floats(0.01, 1.0),
    st.floats(0.001, 0.99),
    st.sampled_from(["strict", "practical"]),
)
def test_invariants(n, eps, delta, profile):
    try:
        p = derive_params(n, eps, delta, profile)
    except ParameterError:
        c6 = 9 * 2**23 if profile == STRICT else 256
        b = 2 ** math.ceil(math.log2(c6 / eps**2))
        assert (32 * b * b).bit_length() - 1 > 64
        return
    assert p == derive_params(n, eps, delta, profile)
    assert p.b & (p.b - 1) == 0
    if profile == STRICT:
        assert p.log2_b >= 8
    assert p.l == math.ceil(4 * math.log(2 / delta))
    assert p.k == math.ceil(7.5 * math.log(p.b) + 16)
    assert 0 < p.lambda_ <= 1 / 16 or p.log_lambda < -700


@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(0.001, 0.99), st.floats(0.001, 0.99))
def test_monotone(e1, e2, d1, d2):
    lo_e, hi_e = sorted((e1, e2))
    lo_d, hi_d = sorted((d1, d2))
    assert derive_params(2**16, lo_e, 0.1).b >= derive_params(2**16, hi_e, 0.1).b
    assert derive_params(2**16, 0.1, lo_d).l >= derive_params(2**16, 0.1, hi_d).l


def test_with_constants_rederives():
    p = derive_params(2**16, 0.5, 0.2, c6_practical=16)
    q = with_constants(p, c5_space=1)
    assert q.space_budget == q.b * q.l
    assert (q.l, q.b, q.k) == (p.l, p.b, p.k)
