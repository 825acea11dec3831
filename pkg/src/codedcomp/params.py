"""System-level problem constants shared by every coded computing scheme.

A problem instance is described by the number of servers K, the recovery
threshold q, the source matrix dimensions m x n, the number of input
vectors N, and the fraction eta of coded rows stored per server.  All
derived quantities (code length r, batch structure, field size) follow
from these.  eta is kept as an exact rational so that every divisibility
check is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Union

from .errors import DivisibilityError, ParameterRangeError

RationalLike = Union[Fraction, int, str, tuple]


def as_fraction(value: RationalLike) -> Fraction:
    """Coerce strings like "1/3", pairs, and ints to an exact Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, tuple):
        num, den = value
        return Fraction(int(num), int(den))
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, int):
        return Fraction(value)
    raise ParameterRangeError(
        f"eta must be an exact rational (got {value!r}); floats are not accepted"
    )


def default_field_bits(r: int) -> int:
    """Smallest l with 2^l >= r + 1, i.e. field size r+1 rounded up to a
    power of two."""
    return max(1, (r).bit_length())


@dataclass(frozen=True)
class SystemParams:
    """Validated scheme-independent problem constants.

    Use :func:`derive` to construct; the constructor performs no checks.
    """

    K: int                 # number of servers
    q: int                 # recovery threshold (servers needed to decode)
    m: int                 # source matrix rows
    n: int                 # source matrix columns
    N: int                 # number of input vectors
    eta: Fraction          # fraction of coded rows stored per server
    r: int                 # coded rows, r = K m / q
    batch_count: int       # C(K, eta*q) disjoint batches
    batch_size: int        # r / batch_count coded rows per batch
    field_bits: int        # arithmetic over GF(2^l)
    sigma_a: float         # time units per field addition
    sigma_m: float         # time units per field multiplication

    @property
    def eta_q(self) -> int:
        return int(self.eta * self.q)

    @property
    def eta_m(self) -> Fraction:
        # Exact; integral for strictly validated params.
        return self.eta * self.m

    @property
    def code_rate(self) -> Fraction:
        return Fraction(self.m, self.r)

    def with_overrides(self, **kwargs) -> "SystemParams":
        return replace(self, **kwargs)


def derive(
    K: int,
    q: int,
    m: int,
    n: int,
    N: int,
    eta: RationalLike,
    sigma_a: float | None = None,
    sigma_m: float | None = None,
    field_bits: int | None = None,
    strict: bool = True,
) -> SystemParams:
    """Validate raw inputs and derive all dependent constants.

    With ``strict=False`` the integrality checks on eta*m, the batch size,
    and N/q are skipped. That mode exists solely for the analytically
    defined baseline schemes (uncoded, CMR, SC), whose derived parameters
    need not be integral; user-facing configuration always validates
    strictly.
    """
    if K < 1:
        raise ParameterRangeError(f"K must be positive (got {K})")
    if not 1 <= q <= K:
        raise ParameterRangeError(f"q must satisfy 1 <= q <= K (got q={q}, K={K})")
    if m < 1 or n < 1 or N < 1:
        raise ParameterRangeError("m, n, N must all be positive")

    eta = as_fraction(eta)
    if not Fraction(1, K) <= eta <= 1:
        raise ParameterRangeError(f"eta must lie in [1/K, 1] (got {eta})")

    if (K * m) % q != 0:
        raise DivisibilityError(f"q={q} must divide K*m={K * m} so that r is an integer")
    r = K * m // q

    eta_q = eta * q
    if eta_q.denominator != 1:
        raise DivisibilityError(f"eta*q={eta_q} must be an integer")
    eta_q = int(eta_q)

    if strict and (eta * m).denominator != 1:
        raise DivisibilityError(f"eta*m={eta * m} must be an integer")

    batch_count = math.comb(K, eta_q)
    if r % batch_count != 0:
        if strict:
            raise DivisibilityError(
                f"batch count C(K, eta*q)={batch_count} must divide r={r}"
            )
        batch_size = 0
    else:
        batch_size = r // batch_count

    if strict and N % q != 0:
        raise DivisibilityError(f"q={q} must divide N={N} (each reducer owns N/q vectors)")

    if field_bits is None:
        field_bits = default_field_bits(r)
    elif (1 << field_bits) < r + 1:
        raise DivisibilityError(
            f"2^field_bits={1 << field_bits} must be at least r+1={r + 1}"
        )

    if sigma_a is None:
        sigma_a = field_bits / 64.0
    if sigma_m is None:
        sigma_m = field_bits * math.log2(field_bits) if field_bits > 1 else 1.0

    return SystemParams(
        K=K, q=q, m=m, n=n, N=N, eta=eta, r=r,
        batch_count=batch_count, batch_size=batch_size,
        field_bits=field_bits, sigma_a=sigma_a, sigma_m=sigma_m,
    )


def partition_limit(p: SystemParams) -> int:
    """Largest partition count that provably costs nothing: r / C(K, eta*q)."""
    return p.batch_size


@dataclass(frozen=True)
class PartitionedParams:
    """A system instance together with a partition count T.

    T must divide both m (decode threshold m/T per partition) and r
    (r/T coded rows per partition).
    """

    base: SystemParams
    T: int

    def __post_init__(self):
        if self.T < 1:
            raise ParameterRangeError(f"T must be positive (got {self.T})")
        if self.base.m % self.T != 0:
            raise DivisibilityError(f"T={self.T} must divide m={self.base.m}")
        if self.base.r % self.T != 0:
            raise DivisibilityError(f"T={self.T} must divide r={self.base.r}")

    @property
    def rows_per_partition(self) -> int:
        return self.base.r // self.T

    @property
    def decode_threshold(self) -> int:
        return self.base.m // self.T
