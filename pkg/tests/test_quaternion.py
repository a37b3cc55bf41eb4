import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from relendo import exact_linalg as xl
from relendo.field_tower import make_field
from relendo.quaternion_dieudonne import (
    QuatRing,
    TruncatedM3,
    aut_polarized_M0,
    beta_values,
    build_chain,
    congruence_modulus,
    end_mp_M1,
    end_mV3_M0,
    exhaustive_torsion,
    galois_ring,
    genericity_check,
    mv3_residual,
    quat_mul,
    sample_chain,
    torsion_free,
    torsion_probe,
)

RINGS = [(2, 2, 3), (3, 2, 2), (5, 3, 2), (2, 4, 4), (3, 1, 3)]


@given(st.sampled_from(RINGS), st.integers(0, 2**32))
def test_galois_ring_axioms_and_sigma(params, seed):
    R = galois_ring(*params)
    rng = np.random.default_rng(seed)
    a, b, c = (R.random(rng) for _ in range(3))
    assert np.array_equal(R.mul(R.mul(a, b), c), R.mul(a, R.mul(b, c)))
    assert np.array_equal(R.mul(a, R.add(b, c)), R.add(R.mul(a, b), R.mul(a, c)))
    assert np.array_equal(R.mul(a, b), R.mul(b, a))
    # sigma is a ring automorphism of order e lifting x -> x^p
    assert np.array_equal(R.sigma(R.mul(a, b)), R.mul(R.sigma(a), R.sigma(b)))
    assert np.array_equal(R.sigma(R.add(a, b)), R.add(R.sigma(a), R.sigma(b)))
    assert np.array_equal(R.sigma(a, R.e), a)
    assert R.residue(R.sigma(a)) == R.F.frob(R.residue(a))
    if R.residue(a):
        assert np.array_equal(R.mul(a, R.inverse(a)), R.one())


@given(st.sampled_from(RINGS), st.data())
def test_teichmuller(params, data):
    R = galois_ring(*params)
    x = data.draw(st.integers(0, R.F.q - 1))
    y = data.draw(st.integers(0, R.F.q - 1))
    tx, ty = R.teichmuller(x), R.teichmuller(y)
    assert R.residue(tx) == x
    assert np.array_equal(R.pow(tx, R.F.q), tx)
    assert np.array_equal(R.mul(tx, ty), R.teichmuller(R.F.mul(x, y)))
    assert np.array_equal(R.sigma(tx), R.teichmuller(R.F.frob(x)))


@given(st.sampled_from([2, 3, 5]), st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32))
def test_quaternion_ring_associative(p, n, s, seed):
    Q = QuatRing(p, n, s)
    rng = np.random.default_rng(seed)
    X, Y, Z = (Q.random(rng) for _ in range(3))
    assert Q.equal(quat_mul(quat_mul(X, Y), Z), quat_mul(X, quat_mul(Y, Z)))
    assert Q.equal(Q.mul(Q.identity(), X), X) and Q.equal(Q.mul(X, Q.identity()), X)
    lhs = Q.mul(X, Q.add(Y, Z))
    assert Q.equal(lhs, Q.add(Q.mul(X, Y), Q.mul(X, Z)))


@pytest.mark.parametrize("p", [2, 3, 5])
def test_pi_relations(p):
    Q = QuatRing(p, 1, 6)
    Pi = Q.pi()
    assert Q.equal(Q.mul(Pi, Pi), Q.scalar(-p))
    rng = np.random.default_rng(p)
    a = Q.hi.random(rng, (1, 1))
    A = Q.make(a, np.zeros((1, 1, 2), dtype=np.int64))
    As = Q.make(Q.hi.sigma(a), np.zeros((1, 1, 2), dtype=np.int64))
    assert Q.equal(Q.mul(Pi, A), Q.mul(As, Pi))
    assert Q.valuation_at_least(Q.pi_power(3), 3) and not Q.valuation_at_least(Q.pi_power(3), 4)


def test_precision_mismatch():
    with pytest.raises(ValueError):
        quat_mul(QuatRing(2, 1, 3).identity(), QuatRing(2, 1, 4).identity())


def test_torsion_cases():
    rep = torsion_probe(2, 1, 2)
    assert (rep.torsion_element, rep.torsion_order) == ("-1", 2)
    rep = torsion_probe(3, 2, 1)
    assert rep.torsion_order == 3 and not rep.torsion_free
    assert rep.to_json()["torsion_element"] == "(-1+Pi)/2"
    assert torsion_free(2, 3) and torsion_free(3, 2) and torsion_free(5, 1)
    assert not torsion_free(2, 2) and not torsion_free(3, 1)
    with pytest.raises(ValueError):
        congruence_modulus(2, 2)


@pytest.mark.parametrize("p,s", [(2, 3), (3, 2), (5, 1)])
def test_congruence_probes(p, s):
    for n in (1, 2):
        rep = torsion_probe(p, n, s, trials=300, seed=11)
        assert rep.torsion_free and rep.congruence_ok and rep.trials == 300


def test_exhaustive_small():
    assert exhaustive_torsion(2, 3)
    assert exhaustive_torsion(3, 2)


@pytest.mark.parametrize("p", [2, 3, 5])
def test_truncated_m3_f_and_v(p):
    M = TruncatedM3(p, 3)
    R = M.R
    rng = np.random.default_rng(p)
    for _ in range(5):
        m = R.random(rng, (8,))
        pm = R.scale(m, p)
        assert np.array_equal(M.F(M.V(m)), pm) and np.array_equal(M.V(M.F(m)), pm)
        a = R.random(rng)
        am = R.mul(a[None, :], m)
        assert np.array_equal(M.F(am), R.mul(R.sigma(a)[None, :], M.F(m)))


# ------------------------------------------------------------ g = 4 chain


@pytest.fixture(scope="module", params=[2, 3])
def chain(request):
    ch, attempts = sample_chain(request.param, 94, seed=5)
    return ch


def test_chain_invariants(chain):
    assert chain.f1_residual() == 0 and chain.f2_residual() == 0
    assert chain.t2p == chain.t4pp
    assert genericity_check(chain)
    direct, closed = beta_values(chain)
    assert direct == closed
    G, k = chain.gram_scaled()
    p = chain.p
    assert (G[0, 1], G[2, 3], G[4, 5], G[6, 7], k) == (1, 1, p, p, 2)
    assert np.array_equal(G, -G.T)
    assert np.count_nonzero(G) == 8


def test_end_mp_m1_is_scalar(chain):
    E = end_mp_M1(chain)
    assert E.dim == 1 and E.contains_identity and E.is_closed()
    assert E.meta["fp_dim"] == 1


def test_end_mv3_is_scalar(chain):
    rep = end_mV3_M0(chain)
    assert rep.scalars
    I = np.eye(4, dtype=np.int64)
    assert not any(mv3_residual(chain, I))
    K2 = make_field(chain.p, 2)
    probe = I.copy()
    probe[0, 1] = 1
    assert any(mv3_residual(chain, probe))
    for S in rep.residue_solutions:
        assert xl.rank(S, K2) in (0, 4)


def test_aut_is_plus_minus_one(chain):
    p = chain.p
    aut = aut_polarized_M0(chain)
    assert sorted(aut) == sorted({1, p * p - 1})
    assert len(aut) == 2


def test_build_chain_rejects():
    with pytest.raises(ValueError):
        build_chain(2, 93, 0, 0, 0, 0, 0)
    with pytest.raises(ValueError):
        build_chain(2, 94, 1, 2, 3, 4, 5)


def test_sample_chain_is_deterministic():
    a, _ = sample_chain(2, 94, seed=9)
    b, _ = sample_chain(2, 94, seed=9)
    assert a.to_json() == b.to_json()
