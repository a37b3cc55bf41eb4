import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import brute_end, span_set

from relendo import exact_linalg as xl
from relendo.field_tower import make_field
from relendo.pair_endo import (
    ExtensionTooSmall,
    SubspacePair,
    canonical_flag,
    degree_two_rank,
    direct_sum,
    dual,
    end_algebra,
    envelope,
    generic_subspace,
    hom_space,
    random_point,
    rational_kernel,
)


def _pair(n, r, q_p, d, e, seed):
    K, L = make_field(q_p, d), make_field(q_p, e)
    return SubspacePair(n, r, K, L, random_point(n, r, L, random.Random(seed)))


def _random_gl(n, K, rng):
    while True:
        g = np.array([[rng.randrange(K.q) for _ in range(n)] for _ in range(n)], dtype=np.int64)
        if xl.rank(g, K) == n:
            return g


def test_gr21_over_f4_examples():
    K, L = make_field(2, 1), make_field(2, 2)
    for t in range(L.q):
        E = end_algebra(SubspacePair(2, 1, K, L, np.array([[1], [t]], dtype=object)))
        if t in (0, 1):
            assert E.dim == 3  # Borel
        else:
            assert E.dim == 2
            assert E.contains(np.array([[0, 1], [1, 1]]))
    E = end_algebra(SubspacePair(2, 1, K, L, np.array([[1], [0]], dtype=object)))
    assert E.contains(np.array([[1, 1], [0, 0]])) and not E.contains(np.array([[0, 0], [1, 0]]))


@given(
    st.sampled_from([(2, 1, 2, 1, 4), (3, 1, 2, 1, 3), (3, 2, 2, 1, 3), (2, 1, 3, 1, 2), (3, 1, 3, 1, 2)]),
    st.integers(0, 10**6),
)
def test_solver_matches_brute_force(shape, seed):
    n, r, p, d, e = shape
    S = _pair(n, r, p, d, e, seed)
    E = end_algebra(S)
    assert span_set(E.vectors, S.K) == brute_end(S.P, S.K, S.L)


@given(st.sampled_from([(2, 1, 2, 4), (3, 1, 2, 4), (3, 2, 3, 2), (4, 2, 2, 2)]), st.integers(0, 10**6))
def test_closed_and_contains_identity(shape, seed):
    n, r, p, e = shape
    S = _pair(n, r, p, 1, e, seed)
    E = end_algebra(S)
    assert E.contains_identity and E.is_closed()
    w0, wt = rational_kernel(S).shape[0], envelope(S).shape[0]
    assert w0 <= r <= wt <= n
    assert E.signature == (E.dim, w0, wt)


@given(st.sampled_from([(2, 1, 2, 4), (3, 1, 3, 2), (3, 2, 2, 3), (4, 2, 2, 2)]), st.integers(0, 10**6))
def test_gl_equivariance(shape, seed):
    n, r, p, e = shape
    S = _pair(n, r, p, 1, e, seed)
    rng = random.Random(seed + 1)
    g = _random_gl(n, S.K, rng)
    gP = xl.matmul(S.embed(g), S.P, S.L)
    S2 = SubspacePair(n, r, S.K, S.L, gP)
    assert end_algebra(S2).key() == end_algebra(S).conjugate(g).key()


@given(st.sampled_from([(2, 1), (3, 1), (3, 2), (4, 2), (4, 1)]), st.integers(0, 10**6))
def test_rational_point_gives_parabolic(shape, seed):
    n, r = shape
    K = make_field(3, 1)
    L = make_field(3, 2)
    P = random_point(n, r, K, random.Random(seed))
    S = SubspacePair(n, r, K, L, P)
    E = end_algebra(S)
    assert E.dim == r * r + (n - r) ** 2 + r * (n - r)
    assert rational_kernel(S).shape[0] == r


def test_generic_subspace_gives_scalars():
    K = make_field(2, 1)
    S = generic_subspace(2, 1, K, 8, seed=3)
    vals = [int(S.P[0, 0])]
    assert degree_two_rank(vals, K, S.L) == (3, 3)
    E = end_algebra(S)
    assert E.dim == 1 and E.contains_identity
    S3 = generic_subspace(3, 1, make_field(3, 1))
    assert degree_two_rank([int(x) for x in S3.P[:2, 0]], S3.K, S3.L)[1] == 6
    assert end_algebra(S3).dim == 1


def test_extension_too_small():
    with pytest.raises(ExtensionTooSmall):
        generic_subspace(2, 1, make_field(2, 1), 2)


def test_degenerate_rejected():
    K, L = make_field(2, 1), make_field(2, 2)
    with pytest.raises(ValueError):
        SubspacePair(2, 2, K, L, np.eye(2, dtype=object))
    with pytest.raises(ValueError):
        SubspacePair(3, 2, K, L, np.array([[1, 1], [0, 0], [0, 0]], dtype=object))


@given(st.integers(0, 10**6))
def test_direct_sum_assembles_from_hom_grid(seed):
    S1 = _pair(2, 1, 2, 1, 2, seed)
    S2 = _pair(2, 1, 2, 1, 2, seed + 7)
    S = direct_sum(S1, S2)
    E = end_algebra(S)
    parts = [S1, S2]
    sizes = [2, 2]
    vecs = []
    for i in range(2):
        for j in range(2):
            for h in hom_space(parts[j], parts[i]):
                M = np.zeros((4, 4), dtype=np.int64)
                M[2 * i : 2 * i + sizes[i], 2 * j : 2 * j + sizes[j]] = np.asarray(h).reshape(sizes[i], sizes[j])
                vecs.append(M.reshape(-1))
    grid = xl.echelon_basis(np.array(vecs), S.K)
    assert np.array_equal(grid, E.vectors)


@given(st.integers(0, 10**6))
def test_direct_sum_envelopes_and_kernels(seed):
    S1 = _pair(2, 1, 2, 1, 2, seed)
    S2 = _pair(3, 1, 2, 1, 3, seed + 1)
    L = make_field(2, 6)
    lift = lambda S: SubspacePair(S.n, S.r, S.K, L, np.vectorize(L.embedding(S.L), otypes=[object])(S.P))  # noqa: E731
    A, B = lift(S1), lift(S2)
    S = direct_sum(A, B)
    assert envelope(S).shape[0] == envelope(A).shape[0] + envelope(B).shape[0]
    assert rational_kernel(S).shape[0] == rational_kernel(A).shape[0] + rational_kernel(B).shape[0]
    # End is insensitive to enlarging the coordinate field
    assert end_algebra(A).key() == end_algebra(S1).key()


@given(st.sampled_from([(2, 1, 4), (3, 1, 3), (3, 2, 3), (4, 2, 2)]), st.integers(0, 10**6))
def test_dual_transposes_algebra(shape, seed):
    n, r, e = shape
    S = _pair(n, r, 2, 1, e, seed)
    D = dual(S)
    ET = {tuple(np.asarray(b).T.reshape(-1)) for b in end_algebra(S).basis}
    ED = end_algebra(D)
    assert ED.dim == end_algebra(S).dim
    assert all(ED.contains(np.array(v).reshape(n, n)) for v in ET)


@given(st.sampled_from([(3, 1, 3, 2), (4, 2, 2, 2), (4, 2, 3, 2), (3, 2, 2, 2)]), st.integers(0, 10**6))
def test_canonical_flag_certificate(shape, seed):
    n, r, p, e = shape
    S = _pair(n, r, p, 1, e, seed)
    E = end_algebra(S)
    cert = canonical_flag(S, E)
    assert cert.block_ok and cert.dim_ok
    assert sum(cert.sizes) == n
    if cert.sizes[1]:
        assert cert.middle_matches or cert.reduced.r in (0, cert.sizes[1])


def test_json_is_deterministic():
    S = _pair(3, 1, 2, 1, 4, 5)
    assert end_algebra(S).to_json() == end_algebra(S).to_json()
    assert S.to_json()["P"]
