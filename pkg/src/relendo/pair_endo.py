"""Subspace pairs (V0, W) and their relative endomorphism algebras.

A pair is given by an n x r representative matrix P over L = F_{p^e}
whose columns span W inside V0 (x) L, with V0 = K^n and K = F_{p^d}.
End(V0, W) is computed as the K-rational solution space of the L-linear
system N alpha P = 0, where the rows of N span the left annihilator of P.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from math import comb
from typing import Sequence

import numpy as np

from . import exact_linalg as xl
from .field_tower import FieldCtx, make_field

__all__ = [
    "SubspacePair",
    "EndoAlgebra",
    "FlagCertificate",
    "end_algebra",
    "rational_kernel",
    "envelope",
    "hull",
    "canonical_flag",
    "hom_space",
    "direct_sum",
    "dual",
    "generic_subspace",
    "linearized_end",
    "monomial_values",
    "degree_two_rank",
    "ExtensionTooSmall",
]


class ExtensionTooSmall(ValueError):
    """The coordinate field cannot host a generic point."""


@dataclass(frozen=True, eq=False)
class SubspacePair:
    n: int
    r: int
    K: FieldCtx
    L: FieldCtx
    P: np.ndarray
    strict: bool = True

    def __post_init__(self):
        P = np.asarray(self.P)
        if P.shape != (self.n, self.r):
            raise ValueError(f"P has shape {P.shape}, expected {(self.n, self.r)}")
        if self.L.e % self.K.e or self.L.p != self.K.p:
            raise ValueError("K is not a subfield of L")
        if self.strict and not 0 < self.r < self.n:
            raise ValueError("need 0 < r < n")
        if self.r and xl.rank(P, self.L) != self.r:
            raise ValueError("representative matrix is degenerate (rank < r)")
        object.__setattr__(self, "P", P)

    @property
    def p(self) -> int:
        return self.K.p

    @property
    def q(self) -> int:
        return self.K.q

    @property
    def d(self) -> int:
        return self.K.e

    @property
    def e(self) -> int:
        return self.L.e

    def embed(self, A) -> np.ndarray:
        """Image in L of a matrix over K."""
        emb = self.L.embedding(self.K)
        A = np.asarray(A)
        return np.vectorize(lambda a: emb(int(a)), otypes=[object])(A) if A.size else A

    def colspan(self) -> np.ndarray:
        """Canonical L-basis of W as rows."""
        return xl.echelon_basis(self.P.T, self.L)

    def to_json(self) -> dict:
        L = self.L
        return {
            "n": self.n,
            "r": self.r,
            "p": self.p,
            "d": self.d,
            "e": self.e,
            "P": [[[int(c) for c in L.coeffs(int(x))] for x in row] for row in self.P],
        }


@dataclass(eq=False)
class EndoAlgebra:
    """K-subalgebra of Mat_n(K) given by an echelon-canonical basis."""

    K: FieldCtx
    n: int
    vectors: np.ndarray  # dim x n^2, reduced echelon rows
    signature: tuple = ()
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @property
    def basis(self) -> list[np.ndarray]:
        return [v.reshape(self.n, self.n) for v in self.vectors]

    @property
    def contains_identity(self) -> bool:
        return self.contains(np.eye(self.n, dtype=np.int64))

    def contains(self, alpha) -> bool:
        v = np.asarray(alpha).reshape(1, -1)
        return xl.span_membership(v, self.vectors, self.K)

    def key(self) -> tuple:
        return (self.K.p, self.K.e, self.n, tuple(int(x) for x in self.vectors.reshape(-1)))

    def __eq__(self, other) -> bool:
        return isinstance(other, EndoAlgebra) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def is_closed(self) -> bool:
        B = self.basis
        for a in B:
            for b in B:
                if not self.contains(xl.matmul(a, b, self.K)):
                    return False
        return True

    def subset_of(self, other: "EndoAlgebra") -> bool:
        return all(other.contains(b) for b in self.basis)

    def conjugate(self, g, g_inv=None) -> "EndoAlgebra":
        """The algebra g E g^-1."""
        if g_inv is None:
            g_inv = xl.inverse(g, self.K)
        vecs = [xl.matmul(xl.matmul(g, b, self.K), g_inv, self.K).reshape(-1) for b in self.basis]
        arr = np.array(vecs).reshape(len(vecs), self.n * self.n)
        return EndoAlgebra(self.K, self.n, xl.echelon_basis(arr, self.K), self.signature)

    def to_json(self) -> dict:
        K = self.K
        return {
            "n": self.n,
            "dim": self.dim,
            "signature": list(self.signature),
            "basis": [
                [[[int(c) for c in K.coeffs(int(x))] for x in row] for row in b] for b in self.basis
            ],
        }


def _algebra_from_vectors(K: FieldCtx, n: int, vecs, signature=()) -> EndoAlgebra:
    vecs = np.asarray(vecs)
    if vecs.size == 0:
        vecs = np.zeros((0, n * n), dtype=np.int64)
    return EndoAlgebra(K, n, xl.echelon_basis(vecs.reshape(-1, n * n), K), tuple(signature))


# ---------------------------------------------------------------- solvers


def _hom_system(N: np.ndarray, P: np.ndarray, n_src: int, n_tgt: int, L: FieldCtx) -> np.ndarray:
    """L-matrix of f -> N f P with f an n_tgt x n_src unknown (row-major)."""
    a_rows, r = N.shape[0], P.shape[1]
    M = [[0] * (n_tgt * n_src) for _ in range(a_rows * r)]
    Nl = [[int(x) for x in row] for row in N]
    Pl = [[int(x) for x in row] for row in P]
    for a in range(a_rows):
        for k in range(n_tgt):
            nak = Nl[a][k]
            if not nak:
                continue
            for l in range(n_src):
                col = k * n_src + l
                for b in range(r):
                    plb = Pl[l][b]
                    if plb:
                        M[a * r + b][col] = L.mul(nak, plb)
    return np.array(M, dtype=object).reshape(a_rows * r, n_tgt * n_src)


def end_algebra(S: SubspacePair, cross_check: bool = True) -> EndoAlgebra:
    """End(V0, W) = {alpha in Mat_n(K) : alpha W within W}."""
    L, K, n = S.L, S.K, S.n
    N = xl.left_annihilator(S.P, L)
    if N.shape[0] == 0:
        vecs = np.eye(n * n, dtype=np.int64)
    else:
        vecs = xl.rational_kernel(_hom_system(N, S.P, n, n, L), L, K)
    w0 = rational_kernel(S).shape[0]
    wt = envelope(S).shape[0]
    E = _algebra_from_vectors(K, n, vecs, (vecs.shape[0], w0, wt))
    if not E.contains_identity:
        raise AssertionError("solver output misses the identity")
    if cross_check:
        form = _affine_form(S)
        if form is not None:
            lin = linearized_end(form[2], form[0], form[1], K, L)
            if lin != E:
                raise AssertionError("annihilator and linearised solvers disagree")
            E.meta["cross_checked"] = True
    return E


def rational_kernel(S: SubspacePair) -> np.ndarray:
    """Echelon K-basis (rows) of W0 = W intersect V0."""
    if S.r == 0:
        return np.zeros((0, S.n), dtype=np.int64)
    N = xl.left_annihilator(S.P, S.L)
    if N.shape[0] == 0:
        return np.eye(S.n, dtype=np.int64)
    return xl.rational_kernel(N, S.L, S.K)


def hull(S: SubspacePair) -> np.ndarray:
    """Echelon L-basis (rows) of the sum of the Frob^(dj)(W)."""
    L, d = S.L, S.d
    cur = S.colspan()
    if cur.shape[0] == 0:
        return cur
    frob = np.vectorize(lambda a: L.frob(int(a), d), otypes=[object])
    for _ in range(S.e // d):
        new = xl.echelon_basis(np.vstack([cur, frob(cur)]), L)
        if new.shape[0] == cur.shape[0]:
            break
        cur = new
    return cur


def envelope(S: SubspacePair) -> np.ndarray:
    """Echelon K-basis (rows) of the rational model of the hull."""
    H = hull(S)
    if H.shape[0] == 0:
        return np.zeros((0, S.n), dtype=np.int64)
    N = xl.left_annihilator(H.T, S.L)
    if N.shape[0] == 0:
        out = np.eye(S.n, dtype=np.int64)
    else:
        out = xl.rational_kernel(N, S.L, S.K)
    if out.shape[0] != H.shape[0]:
        raise AssertionError("hull is not defined over K")
    return out


# ------------------------------------------------------------ decompositions


@dataclass
class FlagCertificate:
    V1: np.ndarray
    V2: np.ndarray
    V3: np.ndarray
    g: np.ndarray  # columns: V1 | V2 | V3
    sizes: tuple
    block_ok: bool
    dim_ok: bool
    reduced: SubspacePair | None
    middle: EndoAlgebra | None
    middle_matches: bool

    @property
    def ok(self) -> bool:
        return self.block_ok and self.dim_ok and self.middle_matches


def canonical_flag(S: SubspacePair, E: EndoAlgebra | None = None) -> FlagCertificate:
    """Block upper-triangular form of End(V0, W) along W0 within W~0 within V0."""
    K, L, n = S.K, S.L, S.n
    if E is None:
        E = end_algebra(S)
    V1 = rational_kernel(S)
    Wt = envelope(S)
    w = V1.shape[0]
    ext = []
    cur = V1
    for row in Wt:
        fresh = not xl.span_membership(row, cur, K) if cur.shape[0] else bool(np.any(row))
        if fresh:
            ext.append(row)
            cur = np.vstack([cur, row.reshape(1, -1)])
    V2 = np.array(ext, dtype=np.int64).reshape(len(ext), n)
    V3 = xl.complement_basis(Wt, n, K)
    n2, n3 = V2.shape[0], V3.shape[0]
    g = np.vstack([V1, V2, V3]).T.astype(np.int64)
    g_inv = xl.inverse(g, K)
    block_ok = True
    mids = []
    for b in E.basis:
        bp = xl.matmul(xl.matmul(g_inv, b, K), g, K)
        if np.any(bp[w:, :w].astype(bool)) or np.any(bp[w + n2 :, : w + n2].astype(bool)):
            block_ok = False
        mids.append(bp[w : w + n2, w : w + n2].reshape(-1))
    expected = w * w + n3 * n3 + w * n2 + w * n3 + n2 * n3
    reduced = None
    middle = None
    middle_matches = True
    if n2:
        Pp = xl.matmul(S.embed(g_inv), S.P, L)
        if np.any(Pp[w + n2 :, :].astype(bool)):
            raise AssertionError("W is not contained in its hull")
        P2 = xl.echelon_basis(Pp[w : w + n2, :].T, L).T
        reduced = SubspacePair(n2, P2.shape[1], K, L, P2, strict=False)
        E2 = end_algebra(reduced) if 0 < reduced.r < n2 else None
        middle = _algebra_from_vectors(K, n2, np.array(mids))
        if E2 is not None:
            middle_matches = middle == E2
            expected += E2.dim
        else:
            middle_matches = False
    dim_ok = E.dim == expected
    return FlagCertificate(V1, V2, V3, g, (w, n2, n3), block_ok, dim_ok, reduced, middle, middle_matches)


def hom_space(S: SubspacePair, T: SubspacePair) -> np.ndarray:
    """Rows: echelon basis of Hom((V0,W),(V0',W')) as n' x n matrices."""
    if S.K != T.K or S.L != T.L:
        raise ValueError("pairs over different fields")
    N = xl.left_annihilator(T.P, T.L)
    if N.shape[0] == 0 or S.r == 0:
        return np.eye(T.n * S.n, dtype=np.int64)
    return xl.rational_kernel(_hom_system(N, S.P, S.n, T.n, S.L), S.L, S.K)


def direct_sum(S1: SubspacePair, S2: SubspacePair) -> SubspacePair:
    P = np.zeros((S1.n + S2.n, S1.r + S2.r), dtype=object)
    P[: S1.n, : S1.r] = S1.P
    P[S1.n :, S1.r :] = S2.P
    return SubspacePair(S1.n + S2.n, S1.r + S2.r, S1.K, S1.L, P, strict=False)


def dual(S: SubspacePair) -> SubspacePair:
    """(V0^v, W^v) with W^v the annihilator of W, in column form."""
    N = xl.left_annihilator(S.P, S.L)
    return SubspacePair(S.n, S.n - S.r, S.K, S.L, N.T, strict=S.strict)


# ------------------------------------------------------------ linearised solver


def _affine_form(S: SubspacePair):
    """Write W as the span of U + sum t_v E_v with identity at pivot rows.

    Uses [T; I_r] (bottom block invertible).  Returns (variables, pivots)
    where variables maps (row, col) -> value, or None when the bottom
    block is singular.
    """
    n, r, L = S.n, S.r, S.L
    bottom = S.P[n - r :, :]
    if xl.rank(bottom, L) < r:
        return None
    Pn = xl.matmul(S.P, xl.inverse(bottom, L), L)
    variables = [((i, j),) for i in range(n - r) for j in range(r)]
    values = [int(Pn[i, j]) for i in range(n - r) for j in range(r)]
    return list(zip(variables, values)), list(range(n - r, n)), Pn


def monomial_values(values: Sequence[int], L: FieldCtx) -> tuple[list[int], list[tuple]]:
    """Values of 1, t_v, t_v t_w (v <= w) and their index labels."""
    labels: list[tuple] = [()]
    vals = [1]
    m = len(values)
    for v in range(m):
        labels.append((v,))
        vals.append(int(values[v]))
    for v in range(m):
        for w in range(v, m):
            labels.append((v, w))
            vals.append(L.mul(int(values[v]), int(values[w])))
    return vals, labels


def degree_two_rank(values: Sequence[int], K: FieldCtx, L: FieldCtx) -> tuple[int, int]:
    """(d(T), N_2): K-rank of the degree <= 2 monomial values and its maximum."""
    vals, _ = monomial_values(values, L)
    R = xl.restrict_scalars(np.array([vals], dtype=object), L, K, "vector")
    return xl.rank(R, K), len(vals)


def linearized_end(P, variables, pivots, K: FieldCtx, L: FieldCtx) -> EndoAlgebra:
    """End(V0, W) by expanding alpha P = P (alpha P)[pivots] in monomials.

    ``variables`` is a list of (positions, value) where positions is a
    tuple of (row, col) cells of P carrying the same variable (symmetric
    matrices put one variable in two cells).  The remaining entries of P
    are the constant part U, which must be 0/1 valued with identity rows
    at ``pivots``.  A maximal K-independent subset of the monomial values
    turns the polynomial identity into a K-linear system.
    """
    P = np.asarray(P)
    n, r = P.shape
    p = K.p
    U = np.array([[int(x) for x in row] for row in P], dtype=object)
    Ev = []
    for positions, _ in variables:
        E = np.zeros((n, r), dtype=np.int64)
        for (i, j) in positions:
            E[i, j] = 1
            U[i, j] = 0
        Ev.append(E)
    if any(int(x) not in (0, 1) for x in U.reshape(-1)):
        raise ValueError("constant part must be 0/1")
    U = U.astype(np.int64)
    pv = list(pivots)
    m = len(Ev)
    vals, labels = monomial_values([v for _, v in variables], L)
    idx = {lab: k for k, lab in enumerate(labels)}
    nm = len(labels)
    # coefficient tensors: coef[mon, i, b, unknown]
    coef = np.zeros((nm, n, r, n * n), dtype=np.int64)
    for k in range(n):
        for l in range(n):
            A = np.zeros((n, n), dtype=np.int64)
            A[k, l] = 1
            u = k * n + l
            AU = A @ U
            coef[idx[()], :, :, u] += AU - U @ AU[pv]
            AE = [A @ E for E in Ev]
            for v in range(m):
                coef[idx[(v,)], :, :, u] += AE[v] - U @ AE[v][pv] - Ev[v] @ AU[pv]
                for w in range(m):
                    key = (min(v, w), max(v, w))
                    coef[idx[key], :, :, u] -= Ev[v] @ AE[w][pv]
    coef %= p
    R = xl.restrict_scalars(np.array([vals], dtype=object), L, K, "vector")
    Rr, piv, rk = xl.rref(R, K)
    nonpiv = [j for j in range(nm) if j not in set(piv)]
    blocks = []
    if K.e == 1:
        for i, s in enumerate(piv):
            tot = coef[s].copy()
            for j in nonpiv:
                c = int(Rr[i, j])
                if c:
                    tot = (tot + c * coef[j]) % p
            blocks.append(tot.reshape(n * r, n * n))
        sysm = np.vstack(blocks) if blocks else np.zeros((0, n * n), dtype=np.int64)
    else:
        rows = []
        for i, s in enumerate(piv):
            tot = [[int(x) for x in row] for row in coef[s].reshape(n * r, n * n)]
            for j in nonpiv:
                c = int(Rr[i, j])
                if not c:
                    continue
                cj = coef[j].reshape(n * r, n * n)
                for a in range(n * r):
                    for u in range(n * n):
                        if cj[a, u]:
                            tot[a][u] = K.add(tot[a][u], K.mul(c, int(cj[a, u])))
            rows.extend(tot)
        sysm = np.array(rows, dtype=object).reshape(len(rows), n * n)
    sol = xl.kernel(sysm, K).T
    return _algebra_from_vectors(K, n, sol)


# ------------------------------------------------------------ generic points


def _random_element(L: FieldCtx, rng: random.Random) -> int:
    return rng.randrange(L.q)


def generic_subspace(
    n: int,
    r: int,
    K: FieldCtx,
    e: int | None = None,
    seed: int = 0,
    attempts: int = 64,
) -> SubspacePair:
    """A point [T; I_r] whose degree <= 2 monomials in T are K-independent."""
    if not 0 < r < n:
        raise ValueError("need 0 < r < n")
    m = (n - r) * r
    N2 = comb(m + 2, 2)
    if e is None:
        e = K.e * (N2 + 1)
    if e % K.e or e // K.e < N2 + 1:
        raise ExtensionTooSmall(f"[L:K] = {e / K.e:g} < N2 + 1 = {N2 + 1}")
    L = make_field(K.p, e)
    rng = random.Random(seed)
    T = _search_generic(m, K, L, rng, attempts)
    P = np.zeros((n, r), dtype=object)
    for i in range(n - r):
        for j in range(r):
            P[i, j] = T[i * r + j]
    for j in range(r):
        P[n - r + j, j] = 1
    return SubspacePair(n, r, K, L, P)


def _search_generic(m: int, K: FieldCtx, L: FieldCtx, rng: random.Random, attempts: int) -> list[int]:
    for _ in range(attempts):
        vals = [_random_element(L, rng) for _ in range(m)]
        rk, N2 = degree_two_rank(vals, K, L)
        if rk == N2:
            return vals
    # deterministic fallback: distinct exponents with base-3 digits <= 2
    g = L.generator
    vals = [L.pow(g, 3**v) for v in range(m)]
    rk, N2 = degree_two_rank(vals, K, L)
    if rk == N2:
        return vals
    raise ExtensionTooSmall("no generic point found within the attempt budget")


def random_point(n: int, r: int, L: FieldCtx, rng: random.Random) -> np.ndarray:
    """Uniformly random full-rank n x r matrix over L."""
    while True:
        P = np.array([[rng.randrange(L.q) for _ in range(r)] for _ in range(n)], dtype=object)
        if xl.rank(P, L) == r:
            return P
