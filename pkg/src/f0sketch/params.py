"""Algorithm parameters derived from (n, eps, delta).

Two profiles are supported.  ``strict`` uses the constants under which the
accuracy guarantee is proven (bins per row >= 2**27, far too large to run
experiments).  ``practical`` keeps every formula but replaces the bin
constant C6 by a configurable, much smaller value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

STRICT = "strict"
PRACTICAL = "practical"
PROFILES = (STRICT, PRACTICAL)

DEFAULT_C6_PRACTICAL = 256
MAX_FIELD_BITS = 64


class ParameterError(ValueError):
    """Raised for inputs outside the parameter domain."""


@dataclass(frozen=True)
class Constants:
    c1_dev_bound: float = math.e**2 + math.e**3 + (math.e - 1)
    c2_eps: int = 4
    c3_bin_balls: Fraction = Fraction(15, 2)
    c4_bin_balls: int = 16
    c5_space: int = 33
    c6_delta: int = 9 * 2**23
    c7_pre_bins: int = 32


@dataclass(frozen=True)
class Params:
    n: int
    eps: float
    delta: float
    profile: str
    l: int
    b: int
    k: int
    log_lambda: float
    consts: Constants = field(default_factory=Constants)
    c6_practical: int = DEFAULT_C6_PRACTICAL

    @property
    def log2_b(self) -> int:
        return self.b.bit_length() - 1

    @property
    def pre_bins(self) -> int:
        """Range size of the collision-avoiding hash, C7 * b**2."""
        return self.consts.c7_pre_bins * self.b * self.b

    @property
    def pre_bits(self) -> int:
        return self.pre_bins.bit_length() - 1

    @property
    def domain_bits(self) -> int:
        """Bits needed for an element of [n], at least 1."""
        return max(1, (self.n - 1).bit_length())

    @property
    def lambda_(self) -> float:
        # may underflow to 0.0; log_lambda is authoritative
        return math.exp(self.log_lambda)

    @property
    def space_budget(self) -> int:
        """Upper limit for the sum of floor(ld(B+2)) over the whole table."""
        return self.consts.c5_space * self.b * self.l


def _check_unit(name: str, value: float, *, allow_one: bool = False) -> None:
    upper_ok = value <= 1 if allow_one else value < 1
    if not (value > 0 and upper_ok) or math.isnan(value):
        bound = "(0, 1]" if allow_one else "(0, 1)"
        raise ParameterError(f"{name} must lie in {bound}, got {value!r}")


def _ceil_log2(x: Fraction) -> int:
    """Exact ceil(ld x) for a positive rational x."""
    e = x.numerator.bit_length() - x.denominator.bit_length()
    # now 2**(e-1) < x < 2**(e+1); settle the boundary exactly
    while Fraction(2) ** e < x:
        e += 1
    while Fraction(2) ** (e - 1) >= x:
        e -= 1
    return e


def rows_for(delta: float, consts: Constants = Constants()) -> int:
    return math.ceil(consts.c2_eps * math.log(2 / delta))


def bins_for(eps: float, c6: int) -> int:
    return 2 ** max(0, _ceil_log2(Fraction(c6) / Fraction(eps) ** 2))


def independence_for(b: int, consts: Constants = Constants()) -> int:
    return math.ceil(float(consts.c3_bin_balls) * math.log(b) + consts.c4_bin_balls)


def log_lambda_for(l: int) -> float:
    return min(math.log(1 / 16), -l * math.log(l) ** 3)


def derive_params(
    n: int,
    eps: float,
    delta: float,
    profile: str = PRACTICAL,
    *,
    c6_practical: int = DEFAULT_C6_PRACTICAL,
    consts: Constants | None = None,
) -> Params:
    """Derive the inner-algorithm parameters.

    ``delta`` below 1/ln(n) is accepted here; choosing the outer
    repetition layer for such values is the caller's business.
    ``eps == 1`` is accepted so the strict spot value at eps=1 can be
    reproduced.
    """
    if not isinstance(n, int) or n < 2:
        raise ParameterError(f"universe size must be an integer >= 2, got {n!r}")
    _check_unit("eps", eps, allow_one=True)
    _check_unit("delta", delta)
    if profile not in PROFILES:
        raise ParameterError(f"unknown profile {profile!r}")
    if c6_practical < 1:
        raise ParameterError("c6_practical must be positive")
    consts = consts or Constants()
    c6 = consts.c6_delta if profile == STRICT else c6_practical

    l = rows_for(delta, consts)
    b = bins_for(eps, c6)
    params = Params(
        n=n,
        eps=eps,
        delta=delta,
        profile=profile,
        l=l,
        b=b,
        k=independence_for(b, consts),
        log_lambda=log_lambda_for(l),
        consts=consts,
        c6_practical=c6_practical,
    )
    if b < 2:
        raise ParameterError("eps and c6 give a single bin per row; need at least 2")
    if params.domain_bits > MAX_FIELD_BITS or params.pre_bits > MAX_FIELD_BITS:
        raise ParameterError(
            f"hash domain needs {max(params.domain_bits, params.pre_bits)} bits; "
            f"at most {MAX_FIELD_BITS} are supported"
        )
    return params


def with_constants(params: Params, **changes) -> Params:
    """Re-derive ``params`` with some constants overridden (used in tests)."""
    consts = replace(params.consts, **changes)
    return derive_params(
        params.n, params.eps, params.delta, params.profile,
        c6_practical=params.c6_practical, consts=consts,
    )


@dataclass(frozen=True)
class OuterParams:
    inner: Params
    m: int
    log_lambda_outer: float
    delta: float

    @property
    def lambda_outer(self) -> float:
        return math.exp(self.log_lambda_outer)


def outer_applicable(n: int, delta: float) -> bool:
    """True when delta is below 1/ln(n), the range handled by repetition."""
    return delta < 1 / math.log(n)


def derive_outer_params(
    n: int,
    eps: float,
    delta: float,
    profile: str = PRACTICAL,
    *,
    c6_practical: int = DEFAULT_C6_PRACTICAL,
    consts: Constants | None = None,
) -> OuterParams:
    """Parameters for m repetitions of the inner sketch at failure rate 1/ln(n)."""
    _check_unit("delta", delta)
    if not isinstance(n, int) or n < 3:
        raise ParameterError(f"universe size must be an integer >= 3, got {n!r}")
    if not outer_applicable(n, delta):
        raise ParameterError(
            f"delta={delta} is not below 1/ln(n)={1 / math.log(n):.6g}; "
            "use the inner sketch directly"
        )
    delta_star = 1 / math.log(n)
    inner = derive_params(n, eps, delta_star, profile, c6_practical=c6_practical, consts=consts)
    m = math.ceil(4 * math.log(1 / delta) / math.log(math.log(n)))
    return OuterParams(inner=inner, m=m, log_lambda_outer=math.log(delta_star), delta=delta)
