"""Special constants entering the constant term of the gap-probability expansion.

Each constant is computed by its own route so that the closed-form relations
between them are genuine cross-checks:

* ``log_glaisher``: Euler-Maclaurin corrected partial sums of ``k log k``.
* ``zeta_prime_minus_one``: ``1/12 - log A``.
* ``log_barnes_g_half``: Taylor series of ``log G(1 + z)`` at ``z = -1/2``.
* ``dyson_constant``: ``log(2)/12 + 3 zeta'(-1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from scipy.special import bernoulli, zeta

from .errors import UsageError

__all__ = ["NAMES", "NamedConstant", "constant", "named_constant", "all_constants"]

NAMES = ("zeta_prime_minus_one", "log_glaisher", "log_barnes_g_half", "dyson_constant")


@dataclass(frozen=True)
class NamedConstant:
    name: str
    value: float
    method: str


def _log_glaisher(n: int = 10, terms: int = 8) -> float:
    # sum_{k<=n} k log k = (n^2/2 + n/2 + 1/12) log n - n^2/4 + log A
    #                      - sum_{j>=2} B_{2j} / (2j (2j-1) (2j-2)) n^(2-2j)
    partial = math.fsum(k * math.log(k) for k in range(2, n + 1))
    B = bernoulli(2 * terms + 2)
    tail = math.fsum(
        B[2 * j] / (2 * j * (2 * j - 1) * (2 * j - 2)) * float(n) ** (2 - 2 * j)
        for j in range(2, terms + 2)
    )
    return math.fsum([
        partial,
        -(n * n / 2 + n / 2 + 1 / 12) * math.log(n),
        n * n / 4,
        tail,
    ])


def _log_barnes_g_half(terms: int = 60) -> float:
    # log G(1+z) = z/2 log(2 pi) - (z + (1+gamma) z^2)/2
    #              + sum_{k>=2} (-1)^k zeta(k) z^(k+1) / (k+1),  at z = -1/2
    z = -0.5
    head = [z / 2 * math.log(2 * math.pi), -(z + (1 + 0.5772156649015329) * z * z) / 2]
    series = [-float(zeta(k)) / (2.0 ** (k + 1) * (k + 1)) for k in range(2, terms)]
    return math.fsum(head + series)


@lru_cache(maxsize=None)
def named_constant(name: str) -> NamedConstant:
    """Evaluate one of :data:`NAMES`; results are cached."""
    if name == "log_glaisher":
        return NamedConstant(name, _log_glaisher(), "euler-maclaurin k log k")
    if name == "zeta_prime_minus_one":
        return NamedConstant(name, 1 / 12 - _log_glaisher(), "1/12 - log A")
    if name == "log_barnes_g_half":
        return NamedConstant(name, _log_barnes_g_half(), "taylor series of log G(1+z)")
    if name == "dyson_constant":
        zp = named_constant("zeta_prime_minus_one").value
        return NamedConstant(name, math.log(2) / 12 + 3 * zp, "log(2)/12 + 3 zeta'(-1)")
    raise UsageError(f"unknown constant {name!r}; expected one of {', '.join(NAMES)}")


def constant(name: str) -> float:
    return named_constant(name).value


def all_constants() -> dict[str, float]:
    return {name: constant(name) for name in NAMES}
