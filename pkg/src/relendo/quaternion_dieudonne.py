"""Galois rings, truncated quaternion matrices and the g = 4 Dieudonne chain.

GaloisRing(p, e, j) is W(F_{p^e}) / p^j with elements stored as integer
coefficient arrays of shape (..., e) in the basis 1, w, ..., w^{e-1}, w a
root of the lifted modulus.  All operations broadcast over leading axes.

QuatRing(p, n, s) models Mat_n(O_p / Pi^s) with O_p = Z_{p^2}[Pi],
Pi^2 = -p, Pi a = a^sigma Pi.  An element is a pair (A, B) standing for
A + Pi B, with A mod p^ceil(s/2) and B mod p^floor(s/2).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import exact_linalg as xl
from .field_tower import FieldCtx, make_field
from .pair_endo import EndoAlgebra

__all__ = [
    "GaloisRing",
    "gr_frobenius",
    "QuatRing",
    "QuatMatrix",
    "quat_mul",
    "TorsionReport",
    "torsion_probe",
    "exhaustive_torsion",
    "DieudonneChain",
    "sample_chain",
    "build_chain",
    "genericity_check",
    "end_mp_M1",
    "end_mV3_M0",
    "aut_polarized_M0",
    "G4Certificate",
    "verify_g4",
    "TruncatedM3",
]


# ------------------------------------------------------------ Galois rings


class GaloisRing:
    def __init__(self, p: int, e: int, j: int):
        if j < 0 or e < 1:
            raise ValueError("need e >= 1 and j >= 0")
        self.p, self.e, self.j = p, e, j
        self.mod = p**j
        self.F = make_field(p, e)
        f = [int(c) for c in self.F.modulus]  # low degree first, monic
        self.f = f
        # rows: w^k mod f for k < 2e - 1
        R = np.zeros((max(2 * e - 1, 1), e), dtype=np.int64)
        cur = [0] * e
        cur[0] = 1
        for k in range(2 * e - 1):
            R[k] = np.array(cur) % self.mod if self.mod > 1 else 0
            # multiply by w
            top = cur[-1]
            cur = [0] + cur[:-1]
            cur = [(c - top * f[i]) for i, c in enumerate(cur)]
            cur = [c % self.mod if self.mod > 1 else 0 for c in cur]
        self.R = R
        self.S = self._sigma_matrix()

    def __repr__(self) -> str:
        return f"GR({self.p}^{self.j}, {self.e})"

    # basic arithmetic
    def zeros(self, shape=()) -> np.ndarray:
        return np.zeros(tuple(shape) + (self.e,), dtype=np.int64)

    def one(self, shape=()) -> np.ndarray:
        a = self.zeros(shape)
        if self.mod > 1:
            a[..., 0] = 1
        return a

    def from_int(self, c: int, shape=()) -> np.ndarray:
        a = self.zeros(shape)
        a[..., 0] = c % self.mod if self.mod > 1 else 0
        return a

    def reduce(self, a) -> np.ndarray:
        return np.asarray(a, dtype=np.int64) % self.mod

    def add(self, a, b) -> np.ndarray:
        return (np.asarray(a) + np.asarray(b)) % self.mod

    def sub(self, a, b) -> np.ndarray:
        return (np.asarray(a) - np.asarray(b)) % self.mod

    def neg(self, a) -> np.ndarray:
        return (-np.asarray(a)) % self.mod

    def scale(self, a, c: int) -> np.ndarray:
        return (np.asarray(a) * (c % self.mod)) % self.mod

    def mul(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        e = self.e
        shape = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
        conv = np.zeros(shape + (2 * e - 1,), dtype=np.int64)
        for i in range(e):
            conv[..., i : i + e] += a[..., i : i + 1] * b
        conv %= self.mod
        return (conv @ self.R) % self.mod

    def pow(self, a, n: int) -> np.ndarray:
        out = self.one(np.asarray(a).shape[:-1])
        base = np.asarray(a)
        while n:
            if n & 1:
                out = self.mul(out, base)
            base = self.mul(base, base)
            n >>= 1
        return out

    def matmul(self, A, B) -> np.ndarray:
        """(..., m, k, e) @ (..., k, n, e)."""
        A = np.asarray(A)
        B = np.asarray(B)
        prod = self.mul(A[..., :, :, None, :], B[..., None, :, :, :])
        return prod.sum(axis=-3) % self.mod

    def sigma(self, a, k: int = 1) -> np.ndarray:
        out = np.asarray(a, dtype=np.int64)
        for _ in range(k % self.e):
            out = (out @ self.S) % self.mod
        return out

    # residues and lifts
    def residue(self, a) -> int:
        """F_{p^e} code of a single element mod p."""
        return self.F.from_coeffs([int(c) % self.p for c in np.asarray(a)])

    def lift(self, code: int) -> np.ndarray:
        c = self.F.coeffs(code)
        out = self.zeros()
        out[: len(c)] = c
        return out % self.mod if self.mod > 1 else out * 0

    def teichmuller(self, code: int) -> np.ndarray:
        """The unique (p^e - 1)-th root of unity (or 0) lifting the residue."""
        if self.j <= 1:
            return self.lift(code)
        return self.pow(self.lift(code), self.p ** (self.e * (self.j - 1)))

    def inverse(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        r = self.residue(a)
        if r == 0:
            raise ZeroDivisionError("not a unit")
        y = self.lift(self.F.inv(r))
        for _ in range(max(self.j, 1).bit_length() + 1):
            y = self.mul(y, self.sub(self.from_int(2), self.mul(a, y)))
        return y

    def random(self, rng: np.random.Generator, shape=()) -> np.ndarray:
        return rng.integers(0, max(self.mod, 1), size=tuple(shape) + (self.e,), dtype=np.int64) % self.mod

    def _eval_f(self, r) -> np.ndarray:
        out = self.zeros()
        pw = self.one()
        for c in self.f:
            out = self.add(out, self.scale(pw, c))
            pw = self.mul(pw, r)
        return out

    def _eval_df(self, r) -> np.ndarray:
        out = self.zeros()
        pw = self.one()
        for k, c in enumerate(self.f[1:], start=1):
            out = self.add(out, self.scale(pw, k * c))
            pw = self.mul(pw, r)
        return out

    def _sigma_matrix(self) -> np.ndarray:
        e = self.e
        if self.mod == 1:
            return np.eye(e, dtype=np.int64)
        w = self.zeros()
        if e > 1:
            w[1] = 1
        else:
            w[0] = 0
        if e == 1:
            return np.eye(1, dtype=np.int64)
        # Hensel lift of the root congruent to w^p
        r = self.pow(w, self.p)
        for _ in range(self.j.bit_length() + 1):
            d = self._eval_df(r)
            r = self.sub(r, self.mul(self._eval_f(r), self.inverse(d)))
        if np.any(self._eval_f(r)):
            raise AssertionError("Hensel lift failed")
        S = np.zeros((e, e), dtype=np.int64)
        pw = self.one()
        for i in range(e):
            S[i] = pw
            pw = self.mul(pw, r)
        return S


@lru_cache(maxsize=None)
def galois_ring(p: int, e: int, j: int) -> GaloisRing:
    return GaloisRing(p, e, j)


def gr_frobenius(R: GaloisRing, a, k: int = 1) -> np.ndarray:
    """The Frobenius lift sigma^k, reducing to x -> x^(p^k) mod p."""
    return R.sigma(a, k)


# ------------------------------------------------------------ quaternions


@dataclass
class QuatMatrix:
    A: np.ndarray  # (..., n, n, 2) mod p^ceil(s/2)
    B: np.ndarray  # (..., n, n, 2) mod p^floor(s/2)
    ring: "QuatRing"


class QuatRing:
    """Mat_n(O_p / Pi^s) with O_p the maximal order of the quaternion division algebra over Q_p."""

    def __init__(self, p: int, n: int, s: int):
        if s < 1 or n < 1:
            raise ValueError("need n, s >= 1")
        self.p, self.n, self.s = p, n, s
        self.hi = galois_ring(p, 2, (s + 1) // 2)
        self.lo = galois_ring(p, 2, s // 2)

    def make(self, A, B) -> QuatMatrix:
        return QuatMatrix(self.hi.reduce(A), self.lo.reduce(B), self)

    def identity(self, batch=()) -> QuatMatrix:
        n = self.n
        A = np.zeros(tuple(batch) + (n, n, 2), dtype=np.int64)
        for i in range(n):
            A[..., i, i, :] = self.hi.one()
        return self.make(A, np.zeros_like(A))

    def scalar(self, c: int, batch=()) -> QuatMatrix:
        I = self.identity(batch)
        return self.make(self.hi.scale(I.A, c), I.B)

    def pi(self, batch=()) -> QuatMatrix:
        I = self.identity(batch)
        return self.make(np.zeros_like(I.A), I.A % max(self.lo.mod, 1))

    def pi_power(self, k: int, batch=()) -> QuatMatrix:
        """Pi^k = (-p)^(k//2) Pi^(k%2)."""
        c = (-self.p) ** (k // 2)
        X = self.pi(batch) if k % 2 else self.identity(batch)
        return self.make(self.hi.scale(X.A, c), self.lo.scale(X.B, c))

    def add(self, X: QuatMatrix, Y: QuatMatrix) -> QuatMatrix:
        return self.make(X.A + Y.A, X.B + Y.B)

    def sub(self, X: QuatMatrix, Y: QuatMatrix) -> QuatMatrix:
        return self.make(X.A - Y.A, X.B - Y.B)

    def scale(self, X: QuatMatrix, c: int) -> QuatMatrix:
        return self.make(X.A * c, X.B * c)

    def mul(self, X: QuatMatrix, Y: QuatMatrix) -> QuatMatrix:
        """(A + Pi B)(C + Pi D) = (AC - p B^s D) + Pi (B C + A^s D)."""
        hi, lo = self.hi, self.lo
        AC = hi.matmul(X.A, Y.A)
        if lo.mod > 1:
            BsD = hi.matmul(hi.sigma(X.B), Y.B)
            A_new = hi.sub(AC, hi.scale(BsD, self.p))
            B_new = lo.add(lo.matmul(X.B, lo.reduce(Y.A)), lo.matmul(lo.sigma(lo.reduce(X.A)), Y.B))
        else:
            A_new = AC
            B_new = np.zeros_like(X.B)
        return self.make(A_new, B_new)

    def pow(self, X: QuatMatrix, k: int) -> QuatMatrix:
        out = self.identity(X.A.shape[:-3])
        base = X
        while k:
            if k & 1:
                out = self.mul(out, base)
            base = self.mul(base, base)
            k >>= 1
        return out

    def equal(self, X: QuatMatrix, Y: QuatMatrix) -> np.ndarray:
        a = np.all((X.A - Y.A) % self.hi.mod == 0, axis=(-3, -2, -1))
        b = np.all((X.B - Y.B) % max(self.lo.mod, 1) == 0, axis=(-3, -2, -1))
        return a & b

    def valuation_at_least(self, X: QuatMatrix, k: int) -> np.ndarray:
        """Is X in Pi^k Mat_n(O_p / Pi^s)?"""
        ka = (k + 1) // 2  # A in p^ceil(k/2)
        kb = k // 2  # B in p^floor(k/2)
        a = np.all(X.A % self.p**ka == 0, axis=(-3, -2, -1))
        b = np.all(X.B % self.p**kb == 0, axis=(-3, -2, -1)) if kb else np.ones_like(a)
        return a & b

    def truncate(self, X: QuatMatrix, s: int) -> QuatMatrix:
        R = QuatRing(self.p, self.n, s)
        return R.make(X.A % R.hi.mod, X.B % max(R.lo.mod, 1))

    def random(self, rng: np.random.Generator, batch=()) -> QuatMatrix:
        n = self.n
        A = self.hi.random(rng, tuple(batch) + (n, n))
        B = self.lo.random(rng, tuple(batch) + (n, n))
        return self.make(A, B)


def quat_mul(X: QuatMatrix, Y: QuatMatrix) -> QuatMatrix:
    if X.ring.n != Y.ring.n or X.ring.s != Y.ring.s or X.ring.p != Y.ring.p:
        raise ValueError("precision or size mismatch")
    return X.ring.mul(X, Y)


# ------------------------------------------------------------ torsion


def torsion_free(p: int, s: int) -> bool:
    return s >= 3 or (p >= 3 and s == 2) or (p >= 5 and s == 1)


def congruence_modulus(p: int, s0: int) -> int:
    """Precision at which alpha^p = 1 + p Pi^s0 beta for alpha = 1 + Pi^s0 beta."""
    if s0 >= 3:
        return 2 * s0
    if s0 == 2 and p >= 3:
        return 6
    if s0 == 1 and p >= 5:
        return 4
    raise ValueError("no congruence in this case")


@dataclass
class TorsionReport:
    p: int
    n: int
    s: int
    torsion_free: bool
    torsion_element: str | None = None
    torsion_order: int | None = None
    trials: int = 0
    congruence_ok: bool | None = None
    exhaustive_ok: bool | None = None

    def to_json(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def _explicit_torsion(p: int, n: int, s: int, N: int = 8):
    """An element of 1 + Pi^s Mat_n(O_p) of order p, in the excluded cases."""
    R = QuatRing(p, n, N)
    if p == 2:
        X = R.scalar(-1)  # -1 = 1 + Pi^2
        return "-1", X, R
    # p = 3, s = 1: zeta_3 = (-1 + Pi) / 2 since Pi^2 = -3
    half = pow(2, -1, R.hi.mod)
    I = R.identity()
    X = R.make(R.hi.scale(I.A, -half), R.lo.scale(I.A % max(R.lo.mod, 1), half))
    return "(-1+Pi)/2", X, R


def torsion_probe(p: int, n: int, s: int, trials: int = 1000, seed: int = 0, exhaustive: bool = False) -> TorsionReport:
    if s < 1 or not 1 <= n <= 4 or trials > 10**6:
        raise ValueError("need s >= 1, 1 <= n <= 4, trials <= 10^6")
    rep = TorsionReport(p, n, s, torsion_free(p, s))
    if not rep.torsion_free:
        name, X, R = _explicit_torsion(p, n, s)
        one = R.identity()
        if R.equal(X, one) or not R.valuation_at_least(R.sub(X, one), s):
            raise AssertionError("torsion witness outside the group")
        if not R.equal(R.pow(X, p), one):
            raise AssertionError("torsion witness has wrong order")
        rep.torsion_element, rep.torsion_order = name, p
        return rep
    rng = np.random.default_rng(seed)
    ok = True
    for s0 in range(s, s + 3):
        if s0 < 3 and not torsion_free(p, s0):
            continue
        m = congruence_modulus(p, s0)
        R = QuatRing(p, n, m)
        k = trials // 3 + (1 if s0 - s < trials % 3 else 0)
        if k == 0:
            continue
        beta = R.random(rng, (k,))
        # force beta not in (Pi): make the residue of A nonzero
        bad = np.all(beta.A % p == 0, axis=(-3, -2, -1))
        beta.A[bad, 0, 0, 0] = (beta.A[bad, 0, 0, 0] + 1) % R.hi.mod
        x = R.mul(R.pi_power(s0, (k,)), beta)
        alpha = R.add(R.identity((k,)), x)
        lhs = R.pow(alpha, p)
        rhs = R.add(R.identity((k,)), R.scale(x, p))
        ok &= bool(np.all(R.equal(lhs, rhs)))
        ok &= not bool(np.any(R.equal(lhs, R.identity((k,)))))
        rep.trials += k
    rep.congruence_ok = ok
    if exhaustive and n == 1:
        rep.exhaustive_ok = exhaustive_torsion(p, s)
    return rep


def exhaustive_torsion(p: int, s: int, N: int = 6, chunk: int = 2**20) -> bool:
    """In 1 + Pi^s O_p / Pi^N the p-torsion is exactly 1 + Pi^(N-2) O_p / Pi^N.

    The latter part is forced by truncation (p Pi^(N-2) = 0 mod Pi^N), so
    this says no element of order p survives from the full group.
    """
    R = QuatRing(p, 1, N)
    hi, lo = R.hi, R.lo
    a0 = p ** ((s + 1) // 2)  # A - 1 in p^ceil(s/2)
    b0 = p ** (s // 2)  # B in p^floor(s/2)
    na = (hi.mod // a0) ** 2
    nb = (lo.mod // b0) ** 2 if lo.mod > 1 else 1
    total = na * nb
    ok = True
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        ia, ib = idx // nb, idx % nb
        ma, mb = hi.mod // a0, max(lo.mod // b0, 1)
        A = np.stack([(ia % ma) * a0, (ia // ma) * a0], axis=-1)
        A[:, 0] += 1
        B = np.stack([(ib % mb) * b0, (ib // mb) * b0], axis=-1)
        X = R.make(A[:, None, None, :], B[:, None, None, :])
        one = R.identity((idx.size,))
        is_torsion = R.equal(R.pow(X, p), one)
        forced = R.valuation_at_least(R.sub(X, one), N - 2)
        ok &= bool(np.array_equal(is_torsion, forced))
    return ok


# ------------------------------------------------------------ g = 4 chain


@dataclass
class DieudonneChain:
    p: int
    e: int
    L: FieldCtx
    t2: int
    t3: int
    t4: int
    u2: int
    u3: int
    s2: int
    t2p: int = 0  # t2'
    t4p: int = 0  # t4'
    t2pp: int = 0  # t2''
    t4pp: int = 0  # t4''
    meta: dict = field(default_factory=dict)

    @property
    def alphas(self) -> list[int]:
        return [1, self.t2, self.t3, self.t4, self.t2p, self.t4p, self.t2pp, self.u3, self.u2]

    def U(self) -> np.ndarray:
        """Columns u, v1, v2 of m_p(M1) in the basis x1..x4, y1..y4."""
        u = [1, self.t2, self.t3, self.t4, 0, self.u2, 0, self.u3]
        v1 = [0, 0, 0, 0, 1, self.t2pp, 0, self.t4pp]
        v2 = [0, 0, 0, 0, 0, self.t2p, 1, self.t4p]
        return np.array([u, v1, v2], dtype=object).T

    def P(self) -> np.ndarray:
        """The 5 x 3 block of [I_3; P] in the basis x1, y1, y3, x2, x3, x4, y2, y4."""
        return np.array(
            [
                [self.t2, 0, 0],
                [self.t3, 0, 0],
                [self.t4, 0, 0],
                [self.u2, self.t2pp, self.t2p],
                [self.u3, self.t4pp, self.t4p],
            ],
            dtype=object,
        )

    def gram_scaled(self) -> tuple[np.ndarray, int]:
        """p^2 <,> on x1..x4, y1..y4 and the scale exponent 2."""
        p = self.p
        G = np.zeros((8, 8), dtype=np.int64)
        for a, b, v in [(0, 1, 1), (2, 3, 1), (4, 5, p), (6, 7, p)]:
            G[a, b] = v
            G[b, a] = -v
        return G, 2

    def f1_residual(self) -> int:
        L, q2 = self.L, self.p**2
        t2, t3, t4 = self.t2, self.t3, self.t4
        r = L.sub(L.pow(t2, q2), t2)
        r = L.add(r, L.mul(t3, L.pow(t4, q2)))
        return L.sub(r, L.mul(t4, L.pow(t3, q2)))

    def f2_residual(self) -> int:
        L, p = self.L, self.p
        r = L.add(L.pow(self.u2, p), L.mul(self.t3, L.pow(self.u3, p)))
        r = L.add(r, self.u2)
        return L.add(r, L.mul(self.u3, L.pow(self.t3, p)))

    def to_json(self) -> dict:
        L = self.L
        enc = lambda a: [int(c) for c in L.coeffs(int(a))]  # noqa: E731
        return {
            "p": self.p,
            "e": self.e,
            "coordinates": {
                "t2": enc(self.t2),
                "t3": enc(self.t3),
                "t4": enc(self.t4),
                "u2": enc(self.u2),
                "u3": enc(self.u3),
                "s2": enc(self.s2),
            },
        }


def _linear_map(L: FieldCtx, fn) -> np.ndarray:
    """F_p matrix (acting on coefficient columns) of an F_p-linear map L -> L."""
    cols = [L.coeffs(fn(L.p**k)) for k in range(L.e)]
    return np.array(cols, dtype=np.int64).T % L.p


def _random_kernel_element(M: np.ndarray, p: int, rng: random.Random) -> np.ndarray:
    Kr = xl.kernel_fp(M, p)
    x = np.zeros(M.shape[1], dtype=np.int64)
    for k in range(Kr.shape[1]):
        x = (x + rng.randrange(p) * Kr[:, k]) % p
    return x


def _surface_fiber(L: FieldCtx, t3: int, rng: random.Random) -> tuple[int, int, int, int]:
    """Random (t2, t4, u2, u3) on the surface over a fixed t3.

    For fixed t3 both defining equations are F_p-linear, in (t2, t4) and
    in (u2, u3) respectively, so a uniform point of each fibre is a random
    kernel vector.
    """
    p, e = L.p, L.e
    q2 = p * p
    A2 = _linear_map(L, lambda x: L.sub(L.pow(x, q2), x))
    A4 = _linear_map(L, lambda x: L.sub(L.mul(t3, L.pow(x, q2)), L.mul(x, L.pow(t3, q2))))
    v = _random_kernel_element(np.hstack([A2, A4]), p, rng)
    t2, t4 = L.from_coeffs(v[:e]), L.from_coeffs(v[e:])
    B2 = _linear_map(L, lambda x: L.add(L.pow(x, p), x))
    B3 = _linear_map(L, lambda x: L.add(L.mul(t3, L.pow(x, p)), L.mul(x, L.pow(t3, p))))
    w = _random_kernel_element(np.hstack([B2, B3]), p, rng)
    return t2, t4, L.from_coeffs(w[:e]), L.from_coeffs(w[e:])


def build_chain(p: int, e: int, t2: int, t3: int, t4: int, u2: int, u3: int, s2: int = 0) -> DieudonneChain:
    if e % 2:
        raise ValueError("e must be even so that F_{p^2} lies in F_{p^e}")
    L = make_field(p, e)
    ch = DieudonneChain(p, e, L, t2, t3, t4, u2, u3, s2)
    if ch.f1_residual() or ch.f2_residual():
        raise ValueError("coordinates do not lie on the surface")
    if L.is_in_subfield(t3, 2):
        raise ValueError("t3 lies in F_{p^2}")
    K2 = make_field(p, 2)
    R = xl.restrict_scalars(np.array([[1, t2, t3, t4]], dtype=object), L, K2, "vector")
    if xl.rank(R, K2) < 4:
        raise ValueError("(1 : t2 : t3 : t4) lies on an F_{p^2}-rational hyperplane")
    root = lambda a: L.frob(a, e - 1)  # noqa: E731
    den = L.sub(L.pow(t3, p), root(t3))
    ch.t2p = L.div(L.sub(L.pow(t2, p), root(t2)), den)
    ch.t4p = L.div(L.sub(L.pow(t4, p), root(t4)), den)
    ch.t2pp = L.sub(L.pow(t2, p), L.mul(L.pow(t3, p), ch.t2p))
    ch.t4pp = L.sub(L.pow(t4, p), L.mul(L.pow(t3, p), ch.t4p))
    if ch.t2p != ch.t4pp:
        raise AssertionError("t2' differs from t4''")
    return ch


def sample_chain(p: int, e: int = 94, seed: int = 0, max_attempts: int = 50) -> tuple[DieudonneChain, int]:
    """Random surface point passing genericity; returns (chain, attempts used)."""
    L = make_field(p, e)
    rng = random.Random(seed)
    for attempt in range(1, max_attempts + 1):
        t3 = rng.randrange(L.q)
        t2, t4, u2, u3 = _surface_fiber(L, t3, rng)
        try:
            ch = build_chain(p, e, t2, t3, t4, u2, u3, rng.randrange(L.q))
        except ValueError:
            continue
        if genericity_check(ch):
            ch.meta["attempts"] = attempt
            ch.meta["seed"] = seed
            return ch, attempt
    raise RuntimeError(f"no generic point in {max_attempts} attempts")


def genericity_check(ch: DieudonneChain) -> bool:
    """The 45 products alpha_i alpha_j (i <= j) are F_{p^2}-independent."""
    if ch.e < 90:
        raise ValueError(f"e = {ch.e} < 90 leaves fewer than 45 F_(p^2)-dimensions")
    L = ch.L
    a = ch.alphas
    prods = [L.mul(a[i], a[j]) for i in range(9) for j in range(i, 9)]
    K2 = make_field(ch.p, 2)
    R = xl.restrict_scalars(np.array([prods], dtype=object), L, K2, "vector")
    return xl.rank(R, K2) == len(prods)


def beta_values(ch: DieudonneChain) -> tuple[list[int], list[int]]:
    """(t3^(p^2) - t3) alpha_i^p for i <= 6, directly and via closed forms."""
    L, p = ch.L, ch.p
    q2 = p * p
    t2, t3, t4 = ch.t2, ch.t3, ch.t4
    d = L.sub(L.pow(t3, q2), t3)
    direct = [L.mul(d, L.pow(a, p)) for a in ch.alphas[:7]]
    b4 = L.sub(L.mul(t4, L.pow(t3, q2)), L.mul(t3, L.pow(t4, q2)))
    closed = [
        d,
        L.mul(d, L.pow(t2, p)),
        L.mul(d, L.pow(t3, p)),
        L.mul(d, L.pow(t4, p)),
        b4,
        L.sub(L.pow(t4, q2), t4),
        L.sub(L.mul(d, t2), L.mul(t3, b4)),
    ]
    return direct, closed


def _fp2_basis(L: FieldCtx) -> list[int]:
    """Images in L of the F_p-basis {1, w} of F_{p^2}."""
    emb = L.embedding(make_field(L.p, 2))
    return [emb(1), emb(L.p)]


def end_mp_M1(ch: DieudonneChain) -> EndoAlgebra:
    """{g = (A 0; B A^sigma) : g span(u, v1, v2) within span(u, v1, v2)} over F_p.

    Unknowns are the F_p-coordinates of A, B in Mat_4(F_{p^2}); the
    sigma-coupling makes the condition N g U = 0 F_p-linear.
    """
    L, p = ch.L, ch.p
    U = ch.U()
    N = xl.left_annihilator(U, L)  # 5 x 8
    basis = _fp2_basis(L)
    cols = []
    mats = []  # the 8 x 8 contribution of each unknown, over L
    for blk in ("A", "B"):
        for i in range(4):
            for j in range(4):
                for b in basis:
                    C = {}
                    if blk == "A":
                        C[(i, j)] = b
                        C[(4 + i, 4 + j)] = L.frob(b)
                    else:
                        C[(4 + i, j)] = b
                    mats.append(C)
    for C in mats:
        out = [[0] * 3 for _ in range(N.shape[0])]
        for (a, bcol), val in C.items():
            for r in range(N.shape[0]):
                n_ra = int(N[r, a])
                if not n_ra:
                    continue
                coef = L.mul(n_ra, val)
                for k in range(3):
                    if U[bcol, k]:
                        out[r][k] = L.add(out[r][k], L.mul(coef, int(U[bcol, k])))
        cols.append([x for row in out for x in row])
    M = np.array(cols, dtype=object).T  # 15 x 64 over L
    Fp = make_field(p, 1)
    R = xl.restrict_scalars(M, L, Fp, "vector")
    ker = xl.kernel_fp(R.astype(np.int64), p).T
    vecs = []
    emb = L.embedding(make_field(p, 2))
    for v in ker:
        g = np.zeros((8, 8), dtype=object)
        for k, c in enumerate(v):
            if not c:
                continue
            for pos, val in mats[k].items():
                g[pos] = L.add(int(g[pos]), L.mul(int(c), val))
        vecs.append(np.vectorize(lambda a: emb.preimage(int(a)), otypes=[object])(g).reshape(-1))
    K2 = make_field(p, 2)
    arr = np.array(vecs, dtype=np.int64).reshape(len(vecs), 64) if vecs else np.zeros((0, 64), dtype=np.int64)
    E = EndoAlgebra(K2, 8, xl.echelon_basis(arr, K2), (len(vecs),))
    E.meta.update({"system_shape": R.shape, "fp_dim": ker.shape[0]})
    return E


@dataclass
class MV3Report:
    fp_dim: int
    residue_solutions: list  # F_p-basis of the a_ij part, as 4 x 4 matrices over F_{p^2}
    description: str
    order: int
    system_shape: tuple

    @property
    def scalars(self) -> bool:
        return self.description == "scalars Z/p^2"


def _mv3_system(ch: DieudonneChain) -> tuple[np.ndarray, list]:
    """F_p-matrix of the expanded congruence in the unknowns a_ij in F_{p^2}."""
    L, p = ch.L, ch.p
    x = [1, ch.t2, ch.t3, ch.t4]
    y = [0, ch.u2, 0, ch.u3]
    basis = _fp2_basis(L)
    cols, labels = [], []
    for i in range(4):
        for j in range(4):
            for k, b in enumerate(basis):
                bp = L.frob(b)
                col = [0] * 8
                col[i] = L.add(col[i], L.mul(b, x[j]))
                col[4 + i] = L.add(col[4 + i], L.mul(bp, y[j]))
                if i == 0:
                    # lambda = sum_j a_1j x_j enters every row
                    for r in range(4):
                        col[r] = L.sub(col[r], L.mul(L.mul(b, x[j]), x[r]))
                        col[4 + r] = L.sub(col[4 + r], L.mul(L.mul(b, x[j]), y[r]))
                cols.append(col)
                labels.append((i, j, k))
    M = np.array(cols, dtype=object).T
    return xl.restrict_scalars(M, L, make_field(p, 1), "vector").astype(np.int64), labels


def end_mV3_M0(ch: DieudonneChain) -> MV3Report:
    """Endomorphisms of M0 mod V^3 inside those of M1: solve the mod-p congruence for A = a I + p (a_ij)."""
    p = ch.p
    R, labels = _mv3_system(ch)
    ker = xl.kernel_fp(R, p).T
    K2 = make_field(p, 2)
    sols = []
    for v in ker:
        A = np.zeros((4, 4), dtype=np.int64)
        for c, (i, j, k) in zip(v, labels):
            if c:
                A[i, j] = K2.add(int(A[i, j]), K2.mul(int(c), [1, p][k]))
        sols.append(A)
    scal = len(sols) == 1 and all(
        np.array_equal(S, S[0, 0] * np.eye(4, dtype=np.int64)) and int(S[0, 0]) < p for S in sols
    )
    # a in Z/p^2 from the residue part (F_p by Cor.) and p * (F_p-scalars)
    order = p * p**len(sols)
    desc = "scalars Z/p^2" if scal else f"dimension {len(sols)} over F_p"
    return MV3Report(len(sols), sols, desc, order, R.shape)


def mv3_residual(ch: DieudonneChain, A) -> list[int]:
    """Left minus right side of the expanded congruence for a 4 x 4 matrix A over F_{p^2}."""
    L = ch.L
    emb = L.embedding(make_field(ch.p, 2))
    a = [[emb(int(A[i][j])) for j in range(4)] for i in range(4)]
    x = [1, ch.t2, ch.t3, ch.t4]
    y = [0, ch.u2, 0, ch.u3]
    lam = 0
    for j in range(4):
        lam = L.add(lam, L.mul(a[0][j], x[j]))
    out = []
    for i in range(4):
        s = 0
        for j in range(4):
            s = L.add(s, L.mul(a[i][j], x[j]))
        out.append(L.sub(s, L.mul(lam, x[i])))
    for i in range(4):
        s = 0
        for j in range(4):
            s = L.add(s, L.mul(L.frob(a[i][j]), y[j]))
        out.append(L.sub(s, L.mul(lam, y[i])))
    return out


def aut_polarized_M0(ch: DieudonneChain, mv3: MV3Report | None = None) -> list[int]:
    """Scalars a in Z/p^2 with a a^* = a^2 = 1."""
    if mv3 is None:
        mv3 = end_mV3_M0(ch)
    if not mv3.scalars:
        raise ValueError("End(M0) mod V^3 is not scalar")
    m = ch.p**2
    return [a for a in range(m) if a * a % m == 1]


@dataclass
class G4Certificate:
    p: int
    e: int
    seed: int
    attempts: int
    genericity: bool
    end_mp_dim: int
    end_mV3_description: str
    aut: list
    aut_order: int
    t2p_eq_t4pp: bool
    chain: dict
    steps: list

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        return d


def verify_g4(p: int, e: int = 94, seed: int = 0, max_attempts: int = 50) -> G4Certificate:
    ch, attempts = sample_chain(p, e, seed, max_attempts)
    E1 = end_mp_M1(ch)
    ident = np.eye(8, dtype=np.int64).reshape(-1)
    mp_ok = E1.dim == 1 and np.array_equal(E1.vectors[0], ident)
    mv3 = end_mV3_M0(ch)
    aut = aut_polarized_M0(ch, mv3) if mp_ok else []
    steps = [
        "genericity: 45 products of degree <= 2 are F_{p^2}-independent",
        f"m_p End(M1) = F_p I_8 (F_p-dimension {E1.meta['fp_dim']})",
        f"m_V3 End(M0) = {mv3.description}",
        "m_V3 Aut(M0, <,>) = {a in Z/p^2 : a^2 = 1}",
        "1 + Pi^3 Mat_4(O_p) is torsion-free, so m_V3 is injective on Aut(X, lambda)",
    ]
    return G4Certificate(
        p=p,
        e=e,
        seed=seed,
        attempts=attempts,
        genericity=True,
        end_mp_dim=E1.meta["fp_dim"],
        end_mV3_description=mv3.description,
        aut=aut,
        aut_order=len(aut),
        t2p_eq_t4pp=ch.t2p == ch.t4pp,
        chain=ch.to_json(),
        steps=steps,
    )


# ------------------------------------------------------------ F and V on M3


class TruncatedM3:
    """M3 / p^j M3 with F x_i = y_i, F y_i = -p x_i, V x_i = -y_i, V y_i = p x_i.

    Elements are (8, e) arrays over GR(p, e, j): rows x1..x4, y1..y4.
    """

    def __init__(self, p: int, j: int, e: int = 2):
        self.R = galois_ring(p, e, j)
        self.p = p

    def F(self, m) -> np.ndarray:
        R = self.R
        m = np.asarray(m)
        s = R.sigma(m)
        out = R.zeros((8,))
        out[4:] = s[:4]
        out[:4] = R.scale(s[4:], -self.p)
        return out

    def V(self, m) -> np.ndarray:
        R = self.R
        m = np.asarray(m)
        s = R.sigma(m, R.e - 1)
        out = R.zeros((8,))
        out[4:] = R.neg(s[:4])
        out[:4] = R.scale(s[4:], self.p)
        return out
