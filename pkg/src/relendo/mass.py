"""Exact mass formulas for supersingular principally polarised lattices."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, prod

from sympy import isprime

from .exact_linalg import rational_str
from .field_tower import make_field
from .pair_endo import EndoAlgebra
from .symplectic import DEFAULT_BUDGET, SymplecticSpace, sp_order, unitary_group

__all__ = [
    "MassValue",
    "bernoulli",
    "zeta_odd_neg",
    "local_factor",
    "mass_lambda",
    "mass_stratum",
]


@lru_cache(maxsize=None)
def _bernoulli_table(m: int) -> tuple[Fraction, ...]:
    """B_0..B_m from sum_{k<=n} C(n+1, k) B_k = 0 (B_1 = -1/2)."""
    B = [Fraction(1)]
    for n in range(1, m + 1):
        B.append(-sum(comb(n + 1, k) * B[k] for k in range(n)) / (n + 1))
    return tuple(B)


def bernoulli(n: int) -> Fraction:
    """B_n for even 2 <= n <= 128, checked against von Staudt-Clausen."""
    if n % 2 or not 2 <= n <= 128:
        raise ValueError("need even 2 <= n <= 128")
    b = _bernoulli_table(n)[n]
    den = prod(l for l in range(2, n + 2) if n % (l - 1) == 0 and isprime(l))
    if b.denominator != den:
        raise AssertionError(f"von Staudt-Clausen fails for B_{n}")
    return b


def zeta_odd_neg(i: int) -> Fraction:
    """zeta(1 - 2i) = -B_{2i} / (2i)."""
    if not 1 <= i <= 64:
        raise ValueError("need 1 <= i <= 64")
    return -bernoulli(2 * i) / (2 * i)


def local_factor(g: int, p: int, c: int) -> Fraction:
    """L_{g,p^c}: the local factor of a lattice with polarisation kernel of rank 2c."""
    if g < 1 or c < 0 or 2 * c > g:
        raise ValueError("need g >= 1 and 0 <= 2c <= g")
    a = prod(p**i + (-1) ** i for i in range(1, g - 2 * c + 1))
    b = prod(p ** (4 * i - 2) - 1 for i in range(1, c + 1))
    num = prod(p ** (2 * i) - 1 for i in range(1, g + 1))
    den = prod(p ** (2 * i) - 1 for i in range(1, 2 * c + 1)) * prod(
        p ** (2 * i) - 1 for i in range(1, g - 2 * c + 1)
    )
    return Fraction(a * b * num, den)


@dataclass(frozen=True)
class MassValue:
    value: Fraction
    zeta_product: Fraction
    index: Fraction
    local: Fraction

    def __post_init__(self):
        if self.value != self.zeta_product * self.index * self.local or self.value <= 0:
            raise AssertionError("inconsistent mass value")

    def to_json(self) -> dict:
        return {
            "value": rational_str(self.value),
            "zeta_product": rational_str(self.zeta_product),
            "index": rational_str(self.index),
            "local_factor": rational_str(self.local),
        }


def zeta_product(g: int) -> Fraction:
    return prod((abs(zeta_odd_neg(i)) / 2 for i in range(1, g + 1)), start=Fraction(1))


def mass_lambda(g: int, p: int, c: int, index=1) -> MassValue:
    """prod |zeta(1-2i)|/2 * index * L_{g,p^c}."""
    if not isprime(p):
        raise ValueError(f"{p} is not prime")
    index = Fraction(index)
    if index < 1:
        raise ValueError("index must be >= 1")
    z = zeta_product(g)
    L = local_factor(g, p, c)
    return MassValue(z * index * L, z, index, L)


def stratum_index(g: int, p: int, c: int, E: EndoAlgebra | None, budget: int = DEFAULT_BUDGET) -> Fraction:
    """[Sp(V_c) : E^1] with V_c of dimension 2c over F_{p^2}; 1 when g = 1."""
    if g == 1 or c == 0:
        return Fraction(1)
    if E is None:
        raise ValueError("an algebra is required when g > 1 and c > 0")
    K = make_field(p, 2)
    if E.K != K or E.n != 2 * c:
        raise ValueError("algebra must live in Mat_{2c}(F_{p^2})")
    U = unitary_group(E, SymplecticSpace(c, K), budget)
    return Fraction(sp_order(c, p * p), U.shape[0])


def mass_stratum(g: int, p: int, c: int, E: EndoAlgebra | None, budget: int = DEFAULT_BUDGET) -> MassValue:
    return mass_lambda(g, p, c, stratum_index(g, p, c, E, budget))
