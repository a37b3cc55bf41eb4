"""Symplectic spaces, Lagrangian points and unitary groups.

V0 = K^{2r} carries the standard form J = [[0, I], [-I, 0]].  Group
elements are code arrays over K; enumeration is vectorised through the
field tables, so K must be a table field (q <= 4096).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from math import comb, prod

import numpy as np

from . import exact_linalg as xl
from .field_tower import FieldCtx, make_field
from .pair_endo import (
    EndoAlgebra,
    ExtensionTooSmall,
    SubspacePair,
    _search_generic,
    end_algebra,
    envelope,
    linearized_end,
    rational_kernel,
)

__all__ = [
    "BudgetError",
    "SymplecticSpace",
    "LagrangianPoint",
    "is_lagrangian",
    "normalize_lagrangian",
    "dagger",
    "end_algebra_symplectic",
    "sp_order",
    "enumerate_sp",
    "unitary_group",
    "reduced_index",
    "generic_lagrangian",
    "random_symplectic",
    "DEFAULT_BUDGET",
]

DEFAULT_BUDGET = 2**24


class BudgetError(RuntimeError):
    """An enumeration would exceed its budget."""

    def __init__(self, msg: str, required: int):
        super().__init__(f"{msg} (required {required})")
        self.required = required


@dataclass(frozen=True)
class SymplecticSpace:
    r: int
    K: FieldCtx

    @property
    def n(self) -> int:
        return 2 * self.r

    @property
    def gram(self) -> np.ndarray:
        return std_form(self.r, self.K.p)

    @property
    def q(self) -> int:
        return self.K.q

    def pair(self, u, v, F: FieldCtx | None = None) -> int:
        F = F or self.K
        u = [int(x) for x in u]
        v = [int(x) for x in v]
        r = self.r
        acc = 0
        for i in range(r):
            acc = F.add(acc, F.sub(F.mul(u[i], v[r + i]), F.mul(u[r + i], v[i])))
        return acc


def std_form(r: int, p: int) -> np.ndarray:
    """J_{2r} as prime-field codes (valid in every field of characteristic p)."""
    J = np.zeros((2 * r, 2 * r), dtype=np.int64)
    for i in range(r):
        J[i, r + i] = 1
        J[r + i, i] = (p - 1) % p
    return J


def dagger(alpha, space: SymplecticSpace) -> np.ndarray:
    """alpha^dagger = J^-1 alpha^T J, with J^-1 = -J."""
    K = space.K
    J = space.gram
    Jinv = _neg(J, K)
    return xl.matmul(xl.matmul(Jinv, np.asarray(alpha).T, K), J, K)


def _neg(A, F: FieldCtx) -> np.ndarray:
    A = np.asarray(A)
    return np.vectorize(lambda a: F.neg(int(a)), otypes=[A.dtype])(A) if A.size else A


# ------------------------------------------------------------ Lagrangians


@dataclass
class LagrangianPoint:
    pair: SubspacePair
    space: SymplecticSpace

    def __post_init__(self):
        ok, _ = is_lagrangian(self.pair.P, self.space, self.pair.L)
        if not ok:
            raise ValueError("not a Lagrangian subspace")

    @classmethod
    def from_matrix(cls, P, K: FieldCtx, L: FieldCtx) -> "LagrangianPoint":
        P = np.asarray(P, dtype=object)
        r = P.shape[1]
        return cls(SubspacePair(2 * r, r, K, L, P), SymplecticSpace(r, K))


def is_lagrangian(P, space: SymplecticSpace, L: FieldCtx) -> tuple[bool, dict]:
    P = np.asarray(P)
    if P.shape != (space.n, space.r):
        raise ValueError(f"expected shape {(space.n, space.r)}, got {P.shape}")
    G = xl.matmul(xl.matmul(P.T, space.gram, L), P, L)
    rk = xl.rank(P, L)
    iso = not np.any(G.astype(bool))
    return iso and rk == space.r, {"isotropic": iso, "rank": rk}


def _eps(r: int, i: int, p: int) -> np.ndarray:
    """epsilon_i: e_i -> -f_i, f_i -> e_i, identity elsewhere."""
    h = np.eye(2 * r, dtype=np.int64)
    h[i, i] = 0
    h[r + i, r + i] = 0
    h[r + i, i] = (p - 1) % p
    h[i, r + i] = 1
    return h


def normalize_lagrangian(P, space: SymplecticSpace, L: FieldCtx) -> tuple[np.ndarray, np.ndarray]:
    """Return (h, [I_r; T]) with h in <eps_i> and hP column-equivalent to [I_r; T]."""
    r, p = space.r, space.K.p
    P = np.asarray(P, dtype=object)
    h = np.eye(2 * r, dtype=np.int64)
    cur = P
    # greedy rank increase of the top block, one eps_i at a time
    while xl.rank(cur[:r], L) < r:
        base = xl.rank(cur[:r], L)
        for i in range(r):
            e = _eps(r, i, p)
            cand = xl.matmul(e, cur, L)
            if xl.rank(cand[:r], L) > base:
                h = (e @ h) % p
                cur = cand
                break
        else:
            # every Lagrangian is transversal to some coordinate Lagrangian
            for mask in range(1, 2**r):
                e = np.eye(2 * r, dtype=np.int64)
                for i in range(r):
                    if mask >> i & 1:
                        e = (_eps(r, i, p) @ e) % p
                cand = xl.matmul(e, cur, L)
                if xl.rank(cand[:r], L) == r:
                    h = (e @ h) % p
                    cur = cand
                    break
            else:
                raise AssertionError("no coordinate transversal found")
    out = xl.matmul(cur, xl.inverse(cur[:r], L), L)
    T = out[r:]
    if not np.array_equal(np.asarray(T, dtype=object), np.asarray(T.T, dtype=object)):
        raise AssertionError("normalised block is not symmetric")
    return h, out


def end_algebra_symplectic(Lp: LagrangianPoint, cross_check: bool = True) -> EndoAlgebra:
    S, space = Lp.pair, Lp.space
    K, L, r = S.K, S.L, space.r
    E = end_algebra(S, cross_check=False)
    for b in E.basis:
        if not E.contains(dagger(b, space)):
            raise AssertionError("End(V0, W) is not dagger-stable")
    if cross_check:
        h, Pn = normalize_lagrangian(S.P, space, L)
        variables = []
        for i in range(r):
            for j in range(i, r):
                cells = ((r + i, j),) if i == j else ((r + i, j), (r + j, i))
                variables.append((cells, int(Pn[r + i, j])))
        lin = linearized_end(Pn, variables, list(range(r)), K, L)
        # End(h W) = h End(W) h^-1
        if lin != E.conjugate(h):
            raise AssertionError("symplectic linearised solver disagrees")
        E.meta["cross_checked"] = True
    return E


def generic_lagrangian(r: int, K: FieldCtx, e: int | None = None, seed: int = 0, attempts: int = 64) -> LagrangianPoint:
    """[I_r; T] with T symmetric and degree <= 2 monomials in T K-independent."""
    m = r * (r + 1) // 2
    N2 = comb(m + 2, 2)
    if e is None:
        e = K.e * (N2 + 1)
    if e % K.e or e // K.e < N2 + 1:
        raise ExtensionTooSmall(f"[L:K] = {e / K.e:g} < N2 + 1 = {N2 + 1}")
    L = make_field(K.p, e)
    vals = _search_generic(m, K, L, random.Random(seed), attempts)
    P = np.zeros((2 * r, r), dtype=object)
    for i in range(r):
        P[i, i] = 1
    k = 0
    for i in range(r):
        for j in range(i, r):
            P[r + i, j] = vals[k]
            P[r + j, i] = vals[k]
            k += 1
    return LagrangianPoint.from_matrix(P, K, L)


# ------------------------------------------------------------ groups


def sp_order(r: int, q: int) -> int:
    return q ** (r * r) * prod(q ** (2 * i) - 1 for i in range(1, r + 1))


def _vectors(n: int, K: FieldCtx) -> np.ndarray:
    """All of K^n as code rows, index = sum v_i q^i."""
    q = K.q
    idx = np.arange(q**n, dtype=np.int64)
    return np.stack([(idx // q**i) % q for i in range(n)], axis=1)


def _pairing_table(r: int, K: FieldCtx, V: np.ndarray) -> np.ndarray:
    acc = np.zeros((V.shape[0], V.shape[0]), dtype=np.int64)
    for i in range(r):
        a = K.vmul(V[:, None, i], V[None, :, r + i])
        b = K.vmul(V[:, None, r + i], V[None, :, i])
        acc = K.vadd(acc, K.vsub(a, b))
    return acc


def enumerate_sp(r: int, K: FieldCtx, budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """All of Sp_{2r}(K) as an (N, 2r, 2r) code array, sorted lexicographically.

    Columns are built in the order e_1, f_1, e_2, f_2, ... with each new
    column filtered from K^{2r} by its required pairings with earlier ones.
    """
    N = sp_order(r, K.q)
    if N > budget:
        raise BudgetError(f"|Sp_{2 * r}(F_{K.q})| exceeds budget {budget}", N)
    n = 2 * r
    V = _vectors(n, K)
    Psi = _pairing_table(r, K, V)
    order = []
    for i in range(r):
        order += [i, r + i]
    states = np.zeros((1, 0), dtype=np.int64)
    for step, col in enumerate(order):
        mask = np.ones((states.shape[0], V.shape[0]), dtype=bool)
        for k in range(step):
            prev = order[k]
            want = 0
            if col == prev + r and prev < r:
                want = 1  # psi(e_i, f_i) = 1
            mask &= Psi[states[:, k]] == want
        if step == 0:
            mask[:, 0] = False
        si, vi = np.nonzero(mask)
        states = np.concatenate([states[si], vi[:, None]], axis=1)
    G = np.zeros((states.shape[0], n, n), dtype=np.int64)
    for k, col in enumerate(order):
        G[:, :, col] = V[states[:, k]]
    if G.shape[0] != N:
        raise AssertionError("symplectic enumeration count mismatch")
    return _sort_mats(G)


def _sort_mats(G: np.ndarray) -> np.ndarray:
    if G.shape[0] == 0:
        return G
    flat = G.reshape(G.shape[0], -1)
    idx = np.lexsort(flat.T[::-1])
    return G[idx]


def _span_elements(E: EndoAlgebra) -> np.ndarray:
    """All K-linear combinations of the basis, as (q^dim, n, n)."""
    K, n, dim = E.K, E.n, E.dim
    C = _vectors(dim, K)
    B = E.vectors.astype(np.int64)
    out = np.zeros((C.shape[0], n * n), dtype=np.int64)
    for i in range(dim):
        out = K.vadd(out, K.vmul(C[:, i : i + 1], B[i][None, :]))
    return out.reshape(-1, n, n)


def _in_span_mask(M: np.ndarray, E: EndoAlgebra) -> np.ndarray:
    """Membership in E of each matrix of the batch M, via the echelon pivots."""
    K = E.K
    flat = M.reshape(M.shape[0], -1)
    R = E.vectors.astype(np.int64)
    res = flat.copy()
    for row in R:
        piv = int(np.nonzero(row)[0][0])
        coef = res[:, piv : piv + 1]
        res = K.vsub(res, K.vmul(coef, row[None, :]))
    return ~np.any(res != 0, axis=1)


def _unitary_mask(G: np.ndarray, space: SymplecticSpace) -> np.ndarray:
    """alpha^dagger alpha = I, i.e. alpha^T J alpha = J."""
    K = space.K
    J = space.gram
    GT = np.swapaxes(G, 1, 2)
    lhs = K.vmatmul(K.vmatmul(GT, np.broadcast_to(J, G.shape)), G)
    return np.all(lhs.reshape(G.shape[0], -1) == J.reshape(1, -1), axis=1)


def unitary_group(E: EndoAlgebra, space: SymplecticSpace, budget: int = DEFAULT_BUDGET, chunk: int = 2**16) -> np.ndarray:
    """Sp(V0, W) = {alpha in E : alpha^dagger alpha = 1}, sorted.

    Takes the cheaper of two routes: scan the q^dim E points of E, or
    filter the enumerated Sp_{2r}(K) by membership in E.
    """
    K = space.K
    span_cost = K.q**E.dim
    sp_cost = sp_order(space.r, K.q)
    if min(span_cost, sp_cost) > budget:
        raise BudgetError("unitary group enumeration exceeds budget", min(span_cost, sp_cost))
    if span_cost <= sp_cost:
        pts = _span_elements(E)
        keep = np.concatenate(
            [_unitary_mask(pts[i : i + chunk], space) for i in range(0, pts.shape[0], chunk)]
        )
        return _sort_mats(pts[keep])
    G = enumerate_sp(space.r, K, budget)
    keep = np.concatenate([_in_span_mask(G[i : i + chunk], E) for i in range(0, G.shape[0], chunk)])
    return _sort_mats(G[keep])


# ------------------------------------------------------------ reduced index


def _symplectic_basis(C: np.ndarray, space: SymplecticSpace) -> np.ndarray:
    """Rows (a_1..a_m, b_1..b_m) spanning span(C) with psi(a_i, b_j) = delta_ij."""
    K = space.K
    rows = [np.array([int(x) for x in v], dtype=np.int64) for v in C]
    A, B = [], []

    def axpy(c, x, y):  # y + c x
        return np.array([K.add(int(yy), K.mul(c, int(xx))) for xx, yy in zip(x, y)], dtype=np.int64)

    while rows:
        a = rows.pop(0)
        j = next((k for k, v in enumerate(rows) if space.pair(a, v)), None)
        if j is None:
            raise AssertionError("degenerate restriction of the form")
        b = rows.pop(j)
        c = space.pair(a, b)
        b = np.array([K.div(int(x), c) for x in b], dtype=np.int64)
        new = []
        for v in rows:
            # v - psi(v, b) a + psi(v, a) b
            v = axpy(K.neg(space.pair(v, b)), a, v)
            v = axpy(space.pair(v, a), b, v)
            new.append(v)
        rows = new
        A.append(a)
        B.append(b)
    return np.array(A + B, dtype=np.int64).reshape(len(A) + len(B), space.n)


def perp(U: np.ndarray, space: SymplecticSpace) -> np.ndarray:
    """Echelon basis of the symplectic complement of the row span of U."""
    K = space.K
    if U.shape[0] == 0:
        return np.eye(space.n, dtype=np.int64)
    return xl.echelon_basis(xl.kernel(xl.matmul(U, space.gram, K), K).T, K)


@dataclass
class IndexReport:
    index: int
    w0: int
    sp_order: int
    unitary_order: int
    reduced: SubspacePair | None
    algebra: EndoAlgebra | None


def reduced_index(Lp: LagrangianPoint, budget: int = DEFAULT_BUDGET) -> IndexReport:
    """[Sp(W0^perp / W0) : Sp(W0^perp / W0, Wbar)]."""
    S, space = Lp.pair, Lp.space
    K, L = S.K, S.L
    W0 = rational_kernel(S)
    w = W0.shape[0]
    W0p = perp(W0, space)
    if not np.array_equal(xl.echelon_basis(W0, K), perp(envelope(S), space)):
        raise AssertionError("W0 differs from the complement of the rational envelope")
    m = space.r - w
    if m == 0:
        return IndexReport(1, w, 1, 1, None, None)
    ext = []
    cur = W0
    for v in W0p:
        if not (xl.span_membership(v, cur, K) if cur.shape[0] else not np.any(v)):
            ext.append(v)
            cur = np.vstack([cur, v.reshape(1, -1)])
    B = _symplectic_basis(np.array(ext, dtype=np.int64), space)
    # coordinates of W in the basis B modulo W0
    A = np.vstack([B, W0]).T
    Al = S.embed(A)
    cols = []
    for j in range(S.r):
        x = xl.solve(Al, S.P[:, j], L)
        if x is None:
            raise AssertionError("W is not inside W0^perp")
        cols.append([int(v) for v in x[: 2 * m]])
    Pbar = xl.echelon_basis(np.array(cols, dtype=object), L).T
    sub = SymplecticSpace(m, K)
    Sbar = SubspacePair(2 * m, m, K, L, Pbar)
    E = end_algebra(Sbar, cross_check=False)
    U = unitary_group(E, sub, budget)
    N = sp_order(m, K.q)
    if N % U.shape[0]:
        raise AssertionError("unitary group order does not divide |Sp|")
    return IndexReport(N // U.shape[0], w, N, U.shape[0], Sbar, E)


# ------------------------------------------------------------ random elements


def transvection(v, c: int, space: SymplecticSpace) -> np.ndarray:
    """x -> x + c psi(x, v) v as a matrix."""
    K = space.K
    n = space.n
    g = np.eye(n, dtype=np.int64)
    v = [int(x) for x in v]
    for j in range(n):
        ej = [int(i == j) for i in range(n)]
        s = K.mul(c, space.pair(ej, v))
        for i in range(n):
            g[i, j] = K.add(int(g[i, j]), K.mul(s, v[i]))
    return g


def random_symplectic(space: SymplecticSpace, rng: random.Random, steps: int = 8) -> np.ndarray:
    K = space.K
    g = np.eye(space.n, dtype=np.int64)
    for _ in range(steps):
        v = [rng.randrange(K.q) for _ in range(space.n)]
        t = transvection(v, rng.randrange(1, K.q), space)
        g = xl.matmul(t, g, K)
    return g
