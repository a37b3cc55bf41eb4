from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st
from oracles import local_factor_oracle, supersingular_mass_oracle

from relendo.field_tower import make_field
from relendo.mass import bernoulli, local_factor, mass_lambda, mass_stratum, stratum_index, zeta_odd_neg
from relendo.pair_endo import _algebra_from_vectors
from relendo.strata import lagrangian_count
from relendo.symplectic import LagrangianPoint, end_algebra_symplectic, sp_order


def test_bernoulli_against_sympy():
    for n in range(2, 129, 2):
        b = sympy.bernoulli(n)
        assert bernoulli(n) == Fraction(int(b.p), int(b.q))


def test_zeta_values():
    assert zeta_odd_neg(1) == Fraction(-1, 12)
    assert zeta_odd_neg(2) == Fraction(1, 120)
    assert zeta_odd_neg(3) == Fraction(-1, 252)
    with pytest.raises(ValueError):
        zeta_odd_neg(0)


@given(st.integers(1, 6), st.data(), st.sampled_from([2, 3, 5, 7]))
def test_local_factor_symbolic(g, data, p):
    c = data.draw(st.integers(0, g // 2))
    assert local_factor(g, p, c) == local_factor_oracle(g, p, c)


def test_local_factor_is_integral_and_trivial_cases():
    assert local_factor(1, 5, 0) == 4  # p - 1
    for g in range(1, 6):
        for c in range(g // 2 + 1):
            assert local_factor(g, 3, c).denominator == 1


@pytest.mark.parametrize("p", list(sympy.primerange(2, 51)))
def test_eichler_mass(p):
    m = mass_lambda(1, p, 0, 1)
    assert m.value == Fraction(p - 1, 24) == supersingular_mass_oracle(p)


def test_mass_examples():
    assert mass_lambda(1, 5, 0).to_json()["value"] == "1/6"
    assert mass_lambda(2, 3, 1).value == Fraction(1, 720)
    with pytest.raises(ValueError):
        mass_lambda(1, 4, 0)


def _full(K, n):
    return _algebra_from_vectors(K, n, np.eye(n * n, dtype=np.int64))


def _scalars(K, n):
    return _algebra_from_vectors(K, n, np.eye(n, dtype=np.int64).reshape(1, n * n))


@pytest.mark.parametrize("p", [3, 5])
def test_maximal_stratum_index(p):
    K = make_field(p, 2)
    assert stratum_index(2, p, 1, _scalars(K, 2)) == sp_order(1, p * p) // 2
    assert stratum_index(2, p, 1, _full(K, 2)) == 1
    assert stratum_index(1, p, 0, None) == 1


@pytest.mark.parametrize("p", [2, 3])
def test_monotone_along_closure(p):
    K = make_field(p, 2)
    L = make_field(p, 8)
    algebras = []
    for t in [0, L.embedding(make_field(p, 4))(make_field(p, 4).generator), L.generator]:
        Lp = LagrangianPoint.from_matrix(np.array([[1], [t]], dtype=object), K, L)
        algebras.append(end_algebra_symplectic(Lp))
    masses = [mass_stratum(2, p, 1, E) for E in algebras]
    for i, Ei in enumerate(algebras):
        for j, Ej in enumerate(algebras):
            if Ei.subset_of(Ej):
                assert masses[i].index >= masses[j].index
                assert masses[i].value >= masses[j].value
    assert all(m.value > 0 for m in masses)


@pytest.mark.parametrize("p", [2, 3])
def test_rational_lagrangian_index_counts_lagrangians(p):
    K = make_field(p, 2)
    Lp = LagrangianPoint.from_matrix(np.array([[1], [0]], dtype=object), K, make_field(p, 4))
    E = end_algebra_symplectic(Lp)
    idx = stratum_index(2, p, 1, E)
    assert idx == lagrangian_count(1, p * p)
    assert mass_stratum(2, p, 1, E).value == mass_lambda(2, p, 1, lagrangian_count(1, p * p)).value


def test_mass_denominator_divides():
    p = 3
    K = make_field(p, 2)
    m = mass_stratum(2, p, 1, _scalars(K, 2))
    zden = np.lcm.reduce([zeta_odd_neg(i).denominator * 2 for i in (1, 2)])
    assert (int(zden) * sp_order(1, p * p)) % m.value.denominator == 0
