"""Finite fields F_{p^e} with Frobenius, subfield tests and embeddings.

Elements are encoded as Python ints: the coefficient vector
(c_0, ..., c_{e-1}) of the polynomial representative is stored as the
base-p integer sum c_i p^i.  The encoding is canonical, hashable and
independent of the arithmetic backend.  Small fields use log/exp tables;
large fields multiply coefficient vectors with numpy and reduce by a
precomputed matrix.
"""

from __future__ import annotations

import functools
from typing import Iterable, Sequence

import numpy as np
from sympy import factorint, isprime
from sympy.polys.domains import ZZ
from sympy.polys.galoistools import gf_irred_p_ben_or

__all__ = [
    "FieldCtx",
    "FieldElement",
    "make_field",
    "frobenius",
    "subfield_member",
    "minimal_poly",
    "MAX_DEGREE",
]

MAX_DEGREE = 512
# fields up to this size get log/exp tables and vectorised arithmetic
TABLE_Q = 4096
# fields up to this size also get a full addition table (odd p only)
ADD_TABLE_Q = 729


def _digits(a: int, p: int, e: int) -> list[int]:
    out = []
    for _ in range(e):
        a, r = divmod(a, p)
        out.append(r)
    return out


def _poly_reduce_matrix(mod: Sequence[int], p: int) -> np.ndarray:
    """Rows i hold x^(e+i) mod f, for i = 0..e-2."""
    e = len(mod) - 1
    rows = []
    cur = [(-c) % p for c in mod[:e]]  # x^e
    for _ in range(max(e - 1, 0)):
        rows.append(cur)
        top = cur[-1]
        nxt = [0] + cur[:-1]
        if top:
            nxt = [(nxt[i] - top * mod[i]) % p for i in range(e)]
        cur = nxt
    if not rows:
        return np.zeros((0, e), dtype=np.int64)
    return np.array(rows, dtype=np.int64)


def _least_irreducible(p: int, e: int) -> tuple[int, ...]:
    """Lexicographically least monic irreducible of degree e over F_p.

    Candidates x^e + c_{e-1}x^{e-1} + ... + c_0 are ordered by the integer
    sum c_i p^i, i.e. lexicographically on (c_{e-1}, ..., c_0).
    """
    if e == 1:
        return (0, 1)
    code = 0
    while True:
        c = _digits(code, p, e)
        if c[0] != 0 and gf_irred_p_ben_or([1] + c[::-1], p, ZZ):
            return tuple(c) + (1,)
        code += 1


class FieldCtx:
    """Arithmetic context for F_{p^e}; immutable after construction."""

    def __init__(self, p: int, e: int, modulus: Sequence[int]):
        self.p = p
        self.e = e
        self.q = p**e
        self.modulus = tuple(int(c) % p for c in modulus)
        if len(self.modulus) != e + 1 or self.modulus[-1] != 1:
            raise ValueError("modulus must be monic of degree e")
        if e > 1 and not gf_irred_p_ben_or(list(self.modulus[::-1]), p, ZZ):
            raise ValueError("modulus is not irreducible")
        self._pw = [p**i for i in range(e)]
        self._red = _poly_reduce_matrix(self.modulus, p)
        self._frob_cache: dict[int, np.ndarray] = {}
        self._emb_cache: dict[tuple, object] = {}
        self.small = self.q <= TABLE_Q
        if self.small:
            self._build_tables()

    # ------------------------------------------------------------------ repr
    def __repr__(self) -> str:
        return f"FieldCtx(p={self.p}, e={self.e})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FieldCtx)
            and self.p == other.p
            and self.modulus == other.modulus
        )

    def __hash__(self) -> int:
        return hash((self.p, self.modulus))

    def to_json(self) -> dict:
        return {"p": self.p, "e": self.e, "modulus": list(self.modulus)}

    # ------------------------------------------------------------ encoding
    def coeffs(self, a: int) -> np.ndarray:
        if self.small:
            return self._dig[a].astype(np.int64)
        if self.p == 2:
            return np.array([(a >> i) & 1 for i in range(self.e)], dtype=np.int64)
        return np.array(_digits(a, self.p, self.e), dtype=np.int64)

    def from_coeffs(self, c: Iterable[int]) -> int:
        c = [int(x) % self.p for x in c]
        if self.p == 2:
            out = 0
            for i, b in enumerate(c):
                if b:
                    out |= 1 << i
            return out
        out = 0
        for b in reversed(c):
            out = out * self.p + b
        return out

    def coeff_matrix(self, elems: Sequence[int]) -> np.ndarray:
        """Stack coefficient vectors of several elements as rows."""
        if self.small:
            return self._dig[np.asarray(elems, dtype=np.int64)].astype(np.int64)
        return np.array([self.coeffs(a) for a in elems], dtype=np.int64).reshape(
            len(elems), self.e
        )

    def elem(self, a) -> "FieldElement":
        return FieldElement(self, int(a))

    # ------------------------------------------------------------ tables
    def _build_tables(self) -> None:
        p, e, q = self.p, self.e, self.q
        dig = np.zeros((q, e), dtype=np.int16)
        codes = np.arange(q)
        for i in range(e):
            dig[:, i] = (codes // p**i) % p
        self._dig = dig
        self._wts = np.array(self._pw, dtype=np.int64)
        if p != 2 and q <= ADD_TABLE_Q:
            self._add_tab = (
                ((dig[:, None, :] + dig[None, :, :]) % p).astype(np.int64) @ self._wts
            )
        else:
            self._add_tab = None
        self._neg_tab = ((-dig.astype(np.int64)) % p) @ self._wts
        g = self.generator
        exp = np.zeros(2 * (q - 1), dtype=np.int64)
        log = np.full(q, -1, dtype=np.int64)
        mg = self._mulmat_slow(g)
        v = np.zeros(e, dtype=np.int64)
        v[0] = 1
        for i in range(q - 1):
            c = int(v @ self._wts)
            exp[i] = c
            log[c] = i
            v = (v @ mg) % p
        exp[q - 1 :] = exp[: q - 1]
        self._exp, self._log = exp, log

    def _mulmat_slow(self, a: int) -> np.ndarray:
        """Matrix of x -> a*x on coefficient rows (row-vector convention)."""
        rows = []
        for i in range(self.e):
            rows.append(self._mul_poly(a, self._pw[i]))
        return np.array([self._coeffs_raw(r) for r in rows], dtype=np.int64)

    def _coeffs_raw(self, a: int) -> list[int]:
        return _digits(a, self.p, self.e)

    # ------------------------------------------------------------ arithmetic
    def _mul_poly(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        ca = np.array(_digits(a, self.p, self.e), dtype=np.int64)
        cb = np.array(_digits(b, self.p, self.e), dtype=np.int64)
        return self.from_coeffs(self._mul_vec(ca, cb))

    def _mul_vec(self, ca: np.ndarray, cb: np.ndarray) -> np.ndarray:
        e = self.e
        full = np.convolve(ca, cb)
        if e == 1:
            return full % self.p
        res = full[:e].copy()
        res += full[e:] @ self._red
        return res % self.p

    def add(self, a: int, b: int) -> int:
        if self.p == 2:
            return a ^ b
        if self.e == 1:
            return (a + b) % self.p
        if self.small:
            if self._add_tab is not None:
                return int(self._add_tab[a, b])
            return int(((self._dig[a] + self._dig[b]) % self.p) @ self._wts)
        return self.from_coeffs(self.coeffs(a) + self.coeffs(b))

    def neg(self, a: int) -> int:
        if self.p == 2:
            return a
        if self.e == 1:
            return (-a) % self.p
        if self.small:
            return int(self._neg_tab[a])
        return self.from_coeffs(-self.coeffs(a))

    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.neg(b))

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        if self.e == 1:
            return (a * b) % self.p
        if self.small:
            return int(self._exp[self._log[a] + self._log[b]])
        return self.from_coeffs(self._mul_vec(self.coeffs(a), self.coeffs(b)))

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("inverse of zero in finite field")
        if self.e == 1:
            return pow(a, -1, self.p)
        if self.small:
            return int(self._exp[(self.q - 1 - self._log[a]) % (self.q - 1)])
        return self.pow(a, self.q - 2)

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, n: int) -> int:
        if n < 0:
            return self.pow(self.inv(a), -n)
        if a == 0:
            return 1 if n == 0 else 0
        if self.e == 1:
            return pow(a, n, self.p)
        if self.small:
            return int(self._exp[(self._log[a] * n) % (self.q - 1)])
        result = np.zeros(self.e, dtype=np.int64)
        result[0] = 1
        base = self.coeffs(a)
        while n:
            if n & 1:
                result = self._mul_vec(result, base)
            n >>= 1
            if n:
                base = self._mul_vec(base, base)
        return self.from_coeffs(result)

    def frob_matrix(self, k: int = 1) -> np.ndarray:
        """F_p-matrix M with coeffs(a^(p^k)) = coeffs(a) @ M (mod p)."""
        k %= self.e
        if k in self._frob_cache:
            return self._frob_cache[k]
        if k == 0:
            m = np.eye(self.e, dtype=np.int64)
        elif k == 1:
            xp = self._pow_slow(self.p, self.p)  # x has code p
            rows = [self.coeffs(self.pow(xp, i)) for i in range(self.e)]
            m = np.array(rows, dtype=np.int64)
        else:
            m1 = self.frob_matrix(1)
            m = self.frob_matrix(k - 1) @ m1 % self.p
        self._frob_cache[k] = m
        return m

    def frob(self, a: int, k: int = 1) -> int:
        k %= self.e
        if k == 0 or a == 0 or self.e == 1:
            return a
        if self.small:
            return int(self._exp[(self._log[a] * pow(self.p, k, self.q - 1)) % (self.q - 1)])
        return self.from_coeffs(self.coeffs(a) @ self.frob_matrix(k))

    def trace_fp(self, a: int) -> int:
        s = 0
        for k in range(self.e):
            s = self.add(s, self.frob(a, k))
        return s

    # ------------------------------------------------------------ generator
    @functools.cached_property
    def generator(self) -> int:
        """Least (by code) element of multiplicative order q - 1."""
        q = self.q
        if q == 2:
            return 1
        primes = list(factorint(q - 1))
        for g in range(2, q):
            if all(self._pow_slow(g, (q - 1) // ell) != 1 for ell in primes):
                return g
        raise RuntimeError("no primitive element found")  # pragma: no cover

    def _pow_slow(self, a: int, n: int) -> int:
        if self.e == 1:
            return pow(a, n, self.p)
        result = np.zeros(self.e, dtype=np.int64)
        result[0] = 1
        base = np.array(_digits(a, self.p, self.e), dtype=np.int64)
        while n:
            if n & 1:
                result = self._mul_vec(result, base)
            n >>= 1
            if n:
                base = self._mul_vec(base, base)
        return self.from_coeffs(result)

    def order(self, a: int) -> int:
        if a == 0:
            raise ValueError("zero has no multiplicative order")
        n = self.q - 1
        for ell, k in factorint(n).items():
            for _ in range(k):
                if self.pow(a, n // ell) == 1:
                    n //= ell
                else:
                    break
        return n

    # ------------------------------------------------------------ vectorised
    def vadd(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self._need_tables()
        if self.p == 2:
            return np.bitwise_xor(a, b)
        if self.e == 1:
            return (a + b) % self.p
        if self._add_tab is not None:
            return self._add_tab[a, b]
        return ((self._dig[a] + self._dig[b]) % self.p).astype(np.int64) @ self._wts

    def vneg(self, a: np.ndarray) -> np.ndarray:
        self._need_tables()
        return self._neg_tab[a]

    def vsub(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return self.vadd(a, self.vneg(b))

    def vmul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self._need_tables()
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if self.e == 1:
            return (a * b) % self.p
        out = self._exp[(self._log[a] + self._log[b]) % (self.q - 1)]
        return np.where((a == 0) | (b == 0), 0, out)

    def vpow(self, a: np.ndarray, n: int) -> np.ndarray:
        self._need_tables()
        a = np.asarray(a, dtype=np.int64)
        out = self._exp[(self._log[a] * n) % (self.q - 1)]
        if n == 0:
            return np.ones_like(a)
        return np.where(a == 0, 0, out)

    def vmatmul(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        """Batched matrix product of code arrays (..., m, k) @ (..., k, n)."""
        A = np.asarray(A, dtype=np.int64)
        B = np.asarray(B, dtype=np.int64)
        k = A.shape[-1]
        out = self.vmul(A[..., :, 0:1], B[..., 0:1, :])
        for j in range(1, k):
            out = self.vadd(out, self.vmul(A[..., :, j : j + 1], B[..., j : j + 1, :]))
        return out

    def _need_tables(self) -> None:
        if not self.small:
            raise ValueError(f"vectorised arithmetic needs q <= {TABLE_Q}, got q={self.q}")

    # ------------------------------------------------------------ subfields
    def subfield_root(self, d: int) -> int:
        """Least root (by code) in this field of the F_{p^d} modulus."""
        if self.e % d:
            raise ValueError(f"{d} does not divide {self.e}")
        key = ("root", d)
        if key not in self._emb_cache:
            small = make_field(self.p, d)
            if d == 1:
                self._emb_cache[key] = 0
            else:
                self._emb_cache[key] = self._least_root(small.modulus, d)
        return self._emb_cache[key]

    def subfield_elements(self, d: int) -> list[int]:
        """All elements of F_{p^d} inside this field, sorted by code."""
        from .exact_linalg import kernel_fp

        if self.e % d:
            raise ValueError(f"{d} does not divide {self.e}")
        if self.small:
            return [a for a in range(self.q) if self.frob(a, d) == a]
        # kernel of Frob^d - 1 as an F_p-linear map on coefficient rows
        m = (self.frob_matrix(d) - np.eye(self.e, dtype=np.int64)) % self.p
        basis = kernel_fp(m.T, self.p).T
        out = []
        for code in range(self.p ** basis.shape[0]):
            c = np.array(_digits(code, self.p, basis.shape[0]), dtype=np.int64)
            out.append(self.from_coeffs(c @ basis % self.p))
        return sorted(out)

    def _least_root(self, mod: Sequence[int], d: int) -> int:
        cands = self.subfield_elements(d)
        for c in cands:
            acc = 0
            for coef in reversed(mod):
                acc = self.add(self.mul(acc, c), coef % self.p)
            if acc == 0:
                return c
        raise RuntimeError("subfield modulus has no root")  # pragma: no cover

    def embedding(self, small: "FieldCtx") -> "Embedding":
        """Embedding of the subfield F_{p^d} (given as its own context)."""
        key = ("emb", small.modulus)
        if key not in self._emb_cache:
            self._emb_cache[key] = Embedding(small, self)
        return self._emb_cache[key]

    def is_in_subfield(self, a: int, d: int) -> bool:
        if self.e % d:
            raise ValueError(f"{d} does not divide {self.e}")
        return self.frob(a, d) == a


class Embedding:
    """Field embedding K = F_{p^d} -> L = F_{p^e} fixed by the least root."""

    def __init__(self, K: FieldCtx, L: FieldCtx):
        if L.e % K.e or K.p != L.p:
            raise ValueError("not a subfield")
        self.K, self.L = K, L
        self.root = L.subfield_root(K.e) if K.e > 1 else None
        basis = [1]
        for _ in range(1, K.e):
            basis.append(L.mul(basis[-1], self.root))
        self.basis = basis  # images of 1, x, ..., x^{d-1}
        # F_p-coordinates of the basis in L, used by the inverse map
        self._bmat = L.coeff_matrix(basis) % K.p
        self._table = None
        if K.q <= 1 << 16:
            self._table = [self._apply(a) for a in range(K.q)]

    def _apply(self, a: int) -> int:
        out = 0
        for c, b in zip(_digits(a, self.K.p, self.K.e), self.basis):
            if c:
                out = self.L.add(out, self.L.mul(c, b))
        return out

    def __call__(self, a: int) -> int:
        if self._table is not None:
            return self._table[a]
        return self._apply(a)

    def preimage(self, b: int) -> int:
        """Inverse of the embedding on its image; ValueError otherwise."""
        from .exact_linalg import solve_fp

        coords = self.L.coeffs(b)
        sol = solve_fp(self._bmat.T, coords, self.K.p)
        if sol is None:
            raise ValueError("element does not lie in the subfield")
        return self.K.from_coeffs(sol)


class FieldElement:
    """Value wrapper around an int code tied to a FieldCtx."""

    __slots__ = ("ctx", "code")

    def __init__(self, ctx: FieldCtx, code: int):
        if not 0 <= code < ctx.q:
            raise ValueError("code out of range")
        self.ctx = ctx
        self.code = code

    @property
    def coeffs(self) -> list[int]:
        return [int(c) for c in self.ctx.coeffs(self.code)]

    def _wrap(self, other):
        if isinstance(other, FieldElement):
            if other.ctx != self.ctx:
                raise ValueError("elements of different fields")
            return other.code
        return int(other) % self.ctx.p

    def __add__(self, o):
        return FieldElement(self.ctx, self.ctx.add(self.code, self._wrap(o)))

    __radd__ = __add__

    def __sub__(self, o):
        return FieldElement(self.ctx, self.ctx.sub(self.code, self._wrap(o)))

    def __rsub__(self, o):
        return FieldElement(self.ctx, self.ctx.sub(self._wrap(o), self.code))

    def __mul__(self, o):
        return FieldElement(self.ctx, self.ctx.mul(self.code, self._wrap(o)))

    __rmul__ = __mul__

    def __truediv__(self, o):
        return FieldElement(self.ctx, self.ctx.div(self.code, self._wrap(o)))

    def __neg__(self):
        return FieldElement(self.ctx, self.ctx.neg(self.code))

    def __pow__(self, n: int):
        return FieldElement(self.ctx, self.ctx.pow(self.code, n))

    def inverse(self):
        return FieldElement(self.ctx, self.ctx.inv(self.code))

    def __eq__(self, o) -> bool:
        if isinstance(o, FieldElement):
            return self.ctx == o.ctx and self.code == o.code
        if isinstance(o, int):
            return self.code == o % self.ctx.p
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.ctx.p, self.ctx.e, self.code))

    def __repr__(self) -> str:
        return f"FieldElement({self.coeffs}, F_{self.ctx.p}^{self.ctx.e})"

    def to_json(self) -> list[int]:
        return self.coeffs


@functools.lru_cache(maxsize=None)
def make_field(p: int, e: int) -> FieldCtx:
    """Deterministic context for F_{p^e}."""
    if not isinstance(p, int) or p < 2 or not isprime(p):
        raise ValueError(f"p={p} is not prime")
    if not 1 <= e <= MAX_DEGREE:
        raise ValueError(f"degree {e} outside 1..{MAX_DEGREE}")
    return FieldCtx(p, e, _least_irreducible(p, e))


def frobenius(a: FieldElement, k: int = 1) -> FieldElement:
    """a^(p^k)."""
    return FieldElement(a.ctx, a.ctx.frob(a.code, k))


def subfield_member(a: FieldElement, d: int) -> bool:
    """True iff a lies in F_{p^d}, i.e. a^(p^d) = a."""
    return a.ctx.is_in_subfield(a.code, d)


def minimal_poly(a: FieldElement, base_d: int = 1) -> list[int]:
    """Minimal polynomial of a over F_{p^base_d}.

    Returned as a list of coefficient codes in the ambient field, low degree
    first; every coefficient lies in the subfield F_{p^base_d}.
    """
    F = a.ctx
    if F.e % base_d:
        raise ValueError(f"{base_d} does not divide {F.e}")
    orbit = [a.code]
    while True:
        nxt = F.frob(orbit[-1], base_d)
        if nxt == a.code:
            break
        orbit.append(nxt)
    poly = [1]
    for r in orbit:
        # multiply by (X - r)
        new = [0] * (len(poly) + 1)
        for i, c in enumerate(poly):
            new[i + 1] = F.add(new[i + 1], c)
            new[i] = F.sub(new[i], F.mul(c, r))
        poly = new
    return poly
