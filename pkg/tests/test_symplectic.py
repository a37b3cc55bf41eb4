import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import brute_sp_stabiliser, sp_order_oracle

from relendo import exact_linalg as xl
from relendo.field_tower import make_field
from relendo.pair_endo import _algebra_from_vectors, envelope, rational_kernel
from relendo.strata import enumerate_lagrangian
from relendo.symplectic import (
    BudgetError,
    LagrangianPoint,
    SymplecticSpace,
    dagger,
    end_algebra_symplectic,
    enumerate_sp,
    generic_lagrangian,
    is_lagrangian,
    perp,
    random_symplectic,
    reduced_index,
    sp_order,
    std_form,
    unitary_group,
)


def _scalars(K, n):
    return _algebra_from_vectors(K, n, np.eye(n, dtype=np.int64).reshape(1, n * n))


def _random_lagrangian(r, K, L, rng):
    """h [I; T] with T symmetric over L and h a random element of Sp_2r(K)."""
    T = np.zeros((r, r), dtype=object)
    for i in range(r):
        for j in range(i, r):
            T[i, j] = T[j, i] = rng.randrange(L.q)
    P0 = np.vstack([np.eye(r, dtype=np.int64).astype(object), T])
    space = SymplecticSpace(r, K)
    h = random_symplectic(space, rng)
    emb = L.embedding(K)
    hl = np.vectorize(emb, otypes=[object])(h)
    return LagrangianPoint.from_matrix(xl.matmul(hl, P0, L), K, L)


def _is_symplectic(g, space):
    K = space.K
    J = space.gram
    return np.array_equal(
        np.asarray(xl.matmul(xl.matmul(np.asarray(g).T, J, K), g, K)).astype(np.int64), J
    )


@pytest.mark.parametrize("r,q", [(1, 2), (1, 3), (1, 4), (2, 2), (2, 3)])
def test_sp_order_formula_and_enumeration(r, q):
    p, e = {2: (2, 1), 3: (3, 1), 4: (2, 2)}[q]
    K = make_field(p, e)
    assert sp_order(r, q) == sp_order_oracle(r, q)
    G = enumerate_sp(r, K)
    assert G.shape[0] == sp_order(r, q)
    space = SymplecticSpace(r, K)
    rng = np.random.default_rng(0)
    for g in G[rng.integers(0, G.shape[0], 20)]:
        assert _is_symplectic(g, space)
    assert len({g.tobytes() for g in G}) == G.shape[0]


def test_alternating_form_char2():
    J = std_form(2, 2)
    assert not np.any(np.diag(J))
    assert np.array_equal(J, (-J.T) % 2)


@pytest.mark.parametrize("q", [2, 3, 4])
def test_unitary_group_is_a_group(q):
    p, e = {2: (2, 1), 3: (3, 1), 4: (2, 2)}[q]
    K = make_field(p, e)
    L = make_field(p, 4 * e)
    space = SymplecticSpace(1, K)
    for t in [0, 1, L.generator]:
        Lp = LagrangianPoint.from_matrix(np.array([[1], [t]], dtype=object), K, L)
        E = end_algebra_symplectic(Lp)
        U = unitary_group(E, space)
        keys = {g.tobytes() for g in U}
        minus = np.eye(2, dtype=np.int64) * (p - 1)
        assert np.eye(2, dtype=np.int64).tobytes() in keys and minus.tobytes() in keys
        for a in U[:6]:
            for b in U[:6]:
                assert np.asarray(xl.matmul(a, b, K)).astype(np.int64).tobytes() in keys
            assert np.asarray(xl.inverse(a, K)).astype(np.int64).tobytes() in keys


@pytest.mark.parametrize("q", [2, 3])
def test_unitary_group_matches_brute_force(q):
    K = make_field(q, 1)
    L = make_field(q, 4)
    space = SymplecticSpace(1, K)
    for t in range(L.q):
        P = np.array([[1], [t]], dtype=object)
        E = end_algebra_symplectic(LagrangianPoint.from_matrix(P, K, L))
        U = {tuple(int(x) for x in g.reshape(-1)) for g in unitary_group(E, space)}
        assert U == brute_sp_stabiliser(P, K, L)


def test_scalar_unitary_orders():
    for p, e, expected in [(2, 1, 1), (3, 1, 2), (2, 2, 1), (3, 2, 2), (5, 2, 2)]:
        K = make_field(p, e)
        for r in (1, 2):
            assert unitary_group(_scalars(K, 2 * r), SymplecticSpace(r, K)).shape[0] == expected


@given(st.sampled_from([(2, 1, 4), (3, 1, 2), (2, 2, 2)]), st.data())
def test_enumerated_lagrangians_w0_is_perp_of_envelope(fields, data):
    p, d, e = fields
    K, L = make_field(p, d), make_field(p, e)
    pts = list(enumerate_lagrangian(2 if L.q <= 4 else 1, L))
    P = data.draw(st.sampled_from(pts))
    Lp = LagrangianPoint.from_matrix(P, K, L)
    W0 = rational_kernel(Lp.pair)
    assert np.array_equal(xl.echelon_basis(W0, K), perp(envelope(Lp.pair), Lp.space))


@given(st.sampled_from([(2, 1, 4), (3, 1, 2), (2, 2, 4)]), st.integers(0, 10**6))
def test_dagger_stability_and_sp_equivariance(fields, seed):
    p, d, e = fields
    K, L = make_field(p, d), make_field(p, e)
    rng = random.Random(seed)
    r = 2 if K.q <= 3 else 1
    Lp = _random_lagrangian(r, K, L, rng)
    P = Lp.pair.P
    E = end_algebra_symplectic(Lp)
    for b in E.basis:
        assert E.contains(dagger(b, Lp.space))
    g = random_symplectic(Lp.space, rng)
    assert _is_symplectic(g, Lp.space)
    gP = xl.matmul(Lp.pair.embed(g), P, L)
    E2 = end_algebra_symplectic(LagrangianPoint.from_matrix(gP, K, L))
    assert E2.key() == E.conjugate(g).key()


def test_generic_lagrangian_scalars():
    for r in (1, 2):
        Lp = generic_lagrangian(r, make_field(3, 1))
        assert is_lagrangian(Lp.pair.P, Lp.space, Lp.pair.L)[0]
        assert end_algebra_symplectic(Lp).dim == 1


def test_reduced_index_block_example():
    K = make_field(2, 2)
    gen = generic_lagrangian(1, K, seed=1)
    L = gen.pair.L
    t = int(gen.pair.P[1, 0])
    # W = span(e1, e2 + t f2) in the basis e1, e2, f1, f2
    P = np.array([[1, 0], [0, 1], [0, 0], [0, t]], dtype=object)
    Lp = LagrangianPoint.from_matrix(P, K, L)
    rep = reduced_index(Lp)
    assert rep.w0 == 1
    ref = reduced_index(gen)
    assert rep.index == ref.index == sp_order(1, 4)  # scalar E1 is trivial in characteristic 2


def test_reduced_index_basis_independent():
    K = make_field(3, 1)
    gen = generic_lagrangian(1, K)
    base = reduced_index(gen).index
    rng = random.Random(4)
    for _ in range(3):
        g = random_symplectic(gen.space, rng)
        P = xl.matmul(gen.pair.embed(g), gen.pair.P, gen.pair.L)
        assert reduced_index(LagrangianPoint.from_matrix(P, K, gen.pair.L)).index == base
    assert base == sp_order(1, 3) // 2


def test_budget_errors():
    K = make_field(3, 1)
    with pytest.raises(BudgetError):
        enumerate_sp(2, K, budget=10)
    with pytest.raises(BudgetError):
        unitary_group(_scalars(K, 4), SymplecticSpace(2, K), budget=1)


def test_not_lagrangian_rejected():
    K, L = make_field(3, 1), make_field(3, 2)
    P = np.array([[1, 0], [0, 0], [0, 1], [0, 0]], dtype=object)  # e1, f1
    assert not is_lagrangian(P, SymplecticSpace(2, K), L)[0]
    with pytest.raises(ValueError):
        LagrangianPoint.from_matrix(P, K, L)
