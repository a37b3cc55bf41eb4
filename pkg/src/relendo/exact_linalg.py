"""Exact dense linear algebra over prime and extension finite fields.

Matrices are 2-D numpy arrays of element codes (see ``field_tower``).
Prime-field routines are vectorised with int64 numpy arrays; extension
fields fall back to row operations on Python ints.  Bases of subspaces are
always returned in reduced echelon form so that equal subspaces produce
identical arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .field_tower import FieldCtx, make_field

__all__ = [
    "Matrix",
    "ExactRational",
    "rational_str",
    "parse_rational",
    "rref_fp",
    "kernel_fp",
    "solve_fp",
    "rank_fp",
    "rref",
    "kernel",
    "rank",
    "solve",
    "inverse",
    "matmul",
    "left_annihilator",
    "restrict_scalars",
    "rational_kernel",
    "echelon_basis",
    "span_membership",
    "span_sum",
    "span_intersection",
    "complement_basis",
]

# Fraction already keeps numerator/denominator reduced with a positive
# denominator, which is exactly the ExactRational contract.
ExactRational = Fraction


def rational_str(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_rational(s: str) -> Fraction:
    return Fraction(s)


# ---------------------------------------------------------------- F_p core


def rref_fp(M: np.ndarray, p: int) -> tuple[np.ndarray, list[int], int]:
    """Reduced row echelon form over F_p."""
    A = np.array(M, dtype=np.int64) % p
    if A.ndim != 2:
        raise ValueError("matrix must be 2-D")
    rows, cols = A.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(A[r:, c])[0]
        if nz.size == 0:
            continue
        piv = r + nz[0]
        if piv != r:
            A[[r, piv]] = A[[piv, r]]
        inv = pow(int(A[r, c]), -1, p)
        A[r] = (A[r] * inv) % p
        col = A[:, c].copy()
        col[r] = 0
        nzr = np.nonzero(col)[0]
        if nzr.size:
            A[nzr] = (A[nzr] - np.outer(col[nzr], A[r])) % p
        pivots.append(c)
        r += 1
    return A, pivots, r


def rank_fp(M: np.ndarray, p: int) -> int:
    M = np.asarray(M)
    if M.size == 0:
        return 0
    return rref_fp(M, p)[2]


def kernel_fp(M: np.ndarray, p: int) -> np.ndarray:
    """Columns form a basis of the right null space over F_p."""
    M = np.asarray(M, dtype=np.int64)
    cols = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(cols, dtype=np.int64)
    R, piv, rk = rref_fp(M, p)
    free = [c for c in range(cols) if c not in set(piv)]
    K = np.zeros((cols, len(free)), dtype=np.int64)
    for j, f in enumerate(free):
        K[f, j] = 1
        for i, pc in enumerate(piv):
            K[pc, j] = (-R[i, f]) % p
    return K


def solve_fp(A: np.ndarray, b: np.ndarray, p: int) -> np.ndarray | None:
    """One solution of A x = b over F_p, or None."""
    A = np.asarray(A, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64).reshape(-1, 1)
    R, piv, rk = rref_fp(np.hstack([A, b]), p)
    n = A.shape[1]
    if n in piv:
        return None
    x = np.zeros(n, dtype=np.int64)
    for i, c in enumerate(piv):
        x[c] = R[i, n]
    return x


# ---------------------------------------------------------------- general


def _is_prime_field(F: FieldCtx) -> bool:
    return F.e == 1


def _to_rows(M) -> list[list[int]]:
    return [[int(x) for x in row] for row in np.asarray(M, dtype=object).tolist()]


def _from_rows(rows: list[list[int]], F: FieldCtx, ncols: int) -> np.ndarray:
    dtype = np.int64 if F.q < 2**62 else object
    if not rows:
        return np.zeros((0, ncols), dtype=dtype)
    return np.array(rows, dtype=dtype).reshape(len(rows), ncols)


def rref(M, F: FieldCtx) -> tuple[np.ndarray, list[int], int]:
    """Reduced row echelon form over F; returns (R, pivot columns, rank)."""
    M = np.asarray(M)
    if M.ndim != 2:
        raise ValueError("matrix must be 2-D")
    if _is_prime_field(F):
        return rref_fp(M, F.p)
    A = _to_rows(M)
    rows, cols = M.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        piv = next((i for i in range(r, rows) if A[i][c]), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        inv = F.inv(A[r][c])
        A[r] = [F.mul(x, inv) for x in A[r]]
        for i in range(rows):
            f = A[i][c]
            if i != r and f:
                A[i] = [F.sub(x, F.mul(f, y)) for x, y in zip(A[i], A[r])]
        pivots.append(c)
        r += 1
    return _from_rows(A, F, cols), pivots, r


def rank(M, F: FieldCtx) -> int:
    M = np.asarray(M)
    if M.size == 0:
        return 0
    return rref(M, F)[2]


def kernel(M, F: FieldCtx) -> np.ndarray:
    """Columns form a basis of the right null space of M over F."""
    M = np.asarray(M)
    cols = M.shape[1]
    if _is_prime_field(F):
        return kernel_fp(M, F.p)
    if M.shape[0] == 0:
        return _from_rows([[int(i == j) for j in range(cols)] for i in range(cols)], F, cols)
    R, piv, rk = rref(M, F)
    pset = set(piv)
    free = [c for c in range(cols) if c not in pset]
    K = [[0] * len(free) for _ in range(cols)]
    for j, f in enumerate(free):
        K[f][j] = 1
        for i, pc in enumerate(piv):
            K[pc][j] = F.neg(int(R[i, f]))
    return _from_rows(K, F, len(free))


def solve(A, b, F: FieldCtx) -> np.ndarray | None:
    """One solution x of A x = b over F, or None if inconsistent."""
    A = np.asarray(A)
    b = np.asarray(b).reshape(-1, 1)
    aug = np.hstack([A.astype(object), b.astype(object)])
    R, piv, rk = rref(aug, F)
    n = A.shape[1]
    if n in piv:
        return None
    x = [0] * n
    for i, c in enumerate(piv):
        x[c] = int(R[i, n])
    return np.array(x, dtype=object)


def matmul(A, B, F: FieldCtx) -> np.ndarray:
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape[1] != B.shape[0]:
        raise ValueError("shape mismatch")
    if _is_prime_field(F):
        return (A.astype(np.int64) @ B.astype(np.int64)) % F.p
    m, k = A.shape
    n = B.shape[1]
    out = [[0] * n for _ in range(m)]
    Ar = _to_rows(A)
    Br = _to_rows(B)
    for i in range(m):
        for t in range(k):
            a = Ar[i][t]
            if not a:
                continue
            row = Br[t]
            oi = out[i]
            for j in range(n):
                if row[j]:
                    oi[j] = F.add(oi[j], F.mul(a, row[j]))
    return _from_rows(out, F, n)


def inverse(A, F: FieldCtx) -> np.ndarray:
    A = np.asarray(A)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("square matrix required")
    eye = np.eye(n, dtype=np.int64)
    R, piv, rk = rref(np.hstack([A.astype(object), eye.astype(object)]), F)
    if rk < n or piv[:n] != list(range(n)):
        raise ValueError("matrix is singular")
    return R[:, n:]


def left_annihilator(P, F: FieldCtx) -> np.ndarray:
    """Rows span {y : y P = 0}."""
    P = np.asarray(P)
    return kernel(P.T, F).T


# ------------------------------------------------------- restriction of scalars


class _ScalarData:
    """Cached change of basis between F_p-coordinates of L and K-coordinates.

    The K-basis of L is 1, x, ..., x^(m-1) with x the polynomial variable
    of L (x generates L over F_p, hence over every subfield K) and
    m = [L:K].
    """

    def __init__(self, L: FieldCtx, K: FieldCtx):
        if L.e % K.e:
            raise ValueError(f"{K.e} does not divide {L.e}")
        self.L, self.K = L, K
        self.emb = L.embedding(K)
        m = L.e // K.e
        self.m = m
        d = K.e
        p = L.p
        xs = [1]
        for _ in range(1, m):
            xs.append(L.mul(xs[-1], p if L.e > 1 else 1))
        rows = []
        for j in range(m):
            for k in range(d):
                rows.append(L.mul(self.emb.basis[k], xs[j]))
        B = L.coeff_matrix(rows)  # row (j,k) = coeffs of rho^k x^j
        self.xpow = xs
        self.Binv = inverse(B, make_field(p, 1)).astype(np.int64)

    def coords(self, elems: Sequence[int]) -> np.ndarray:
        """K-coordinates (len(elems) x m array of K-codes)."""
        if len(elems) == 0:
            return np.zeros((0, self.m), dtype=np.int64)
        C = self.L.coeff_matrix(list(elems)) @ self.Binv % self.L.p
        C = C.reshape(len(elems), self.m, self.K.e)
        if self.K.e == 1:
            return C[:, :, 0]
        w = np.array([self.K.p**k for k in range(self.K.e)], dtype=object)
        return (C.astype(object) * w).sum(axis=2)


_SCALAR_CACHE: dict = {}


def _scalar_data(L: FieldCtx, K: FieldCtx) -> _ScalarData:
    key = (L.p, L.modulus, K.modulus)
    if key not in _SCALAR_CACHE:
        _SCALAR_CACHE[key] = _ScalarData(L, K)
    return _SCALAR_CACHE[key]


def restrict_scalars(M, L: FieldCtx, K: FieldCtx, mode: str = "vector") -> np.ndarray:
    """Expand a matrix over L into a matrix over the subfield K.

    ``vector`` mode replaces each entry by the column of its m = [L:K]
    coordinates; the K-kernel of the result is the K-rational kernel of M.
    ``block`` mode replaces each entry by the m x m matrix of multiplication
    by that entry.
    """
    M = np.asarray(M)
    if L.e % K.e:
        raise ValueError(f"{K.e} does not divide {L.e}")
    if L.e == K.e:
        return M.copy()
    sd = _scalar_data(L, K)
    rows, cols = M.shape
    m = sd.m
    flat = [int(x) for x in M.reshape(-1)]
    if mode == "vector":
        C = sd.coords(flat).reshape(rows, cols, m)
        out = np.transpose(C, (0, 2, 1)).reshape(rows * m, cols)
    elif mode == "block":
        prods = [L.mul(a, x) for a in flat for x in sd.xpow]
        C = sd.coords(prods).reshape(rows, cols, m, m)  # [i, j, col t, coord s]
        out = np.transpose(C, (0, 3, 1, 2)).reshape(rows * m, cols * m)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return out.astype(np.int64) if K.q < 2**62 else out


def rational_kernel(M, L: FieldCtx, K: FieldCtx) -> np.ndarray:
    """Echelonised K-basis (as rows) of {x in K^cols : M x = 0}."""
    M = np.asarray(M)
    cols = M.shape[1]
    if M.shape[0] == 0:
        return echelon_basis(np.eye(cols, dtype=np.int64), K)
    R = restrict_scalars(M, L, K, "vector")
    return echelon_basis(kernel(R, K).T, K)


# ---------------------------------------------------------------- subspaces


def echelon_basis(V, F: FieldCtx) -> np.ndarray:
    """Canonical basis (nonzero rows of the rref) of the row span of V."""
    V = np.asarray(V)
    if V.shape[0] == 0:
        return V.reshape(0, V.shape[1] if V.ndim == 2 else 0)
    R, piv, rk = rref(V, F)
    return R[:rk]


def span_membership(v, V, F: FieldCtx) -> bool:
    """Is the row vector v in the row span of V?"""
    V = np.asarray(V)
    v = np.asarray(v).reshape(1, -1)
    if V.shape[0] == 0:
        return not np.any(v.astype(bool))
    return rank(np.vstack([V, v]), F) == rank(V, F)


def span_sum(U, V, F: FieldCtx) -> np.ndarray:
    U = np.asarray(U)
    V = np.asarray(V)
    if U.shape[1] != V.shape[1]:
        raise ValueError("shape mismatch")
    return echelon_basis(np.vstack([U, V]), F)


def span_intersection(U, V, F: FieldCtx) -> np.ndarray:
    """Row span intersection, via the kernel of [U; -V]^T."""
    U = echelon_basis(U, F)
    V = echelon_basis(V, F)
    if U.shape[1] != V.shape[1]:
        raise ValueError("shape mismatch")
    n = U.shape[1]
    if U.shape[0] == 0 or V.shape[0] == 0:
        return np.zeros((0, n), dtype=np.int64)
    stacked = np.vstack([U, V])
    K = kernel(stacked.T, F)  # columns c with c_U U + c_V V = 0
    if K.shape[1] == 0:
        return np.zeros((0, n), dtype=np.int64)
    coeffs = K[: U.shape[0], :].T
    return echelon_basis(matmul(coeffs, U, F), F)


def complement_basis(V, n: int, F: FieldCtx) -> np.ndarray:
    """Standard unit vectors completing the rows of V to a basis of F^n."""
    V = echelon_basis(np.asarray(V).reshape(-1, n), F)
    _, piv, _ = rref(V, F) if V.shape[0] else (None, [], 0)
    rest = [i for i in range(n) if i not in set(piv)]
    out = np.zeros((len(rest), n), dtype=np.int64)
    for j, i in enumerate(rest):
        out[j, i] = 1
    return out


@dataclass
class Matrix:
    """Serialisable matrix with its coefficient domain."""

    entries: np.ndarray
    field: FieldCtx

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    def to_json(self) -> dict:
        F = self.field
        return {
            "domain": F.to_json(),
            "rows": self.rows,
            "cols": self.cols,
            "entries": [[[int(c) for c in F.coeffs(int(x))] for x in row] for row in self.entries],
        }

    @classmethod
    def from_json(cls, d: dict) -> "Matrix":
        from .field_tower import FieldCtx as _F

        F = _F(d["domain"]["p"], d["domain"]["e"], d["domain"]["modulus"])
        ent = [[F.from_coeffs(c) for c in row] for row in d["entries"]]
        return cls(_from_rows(ent, F, d["cols"]), F)
