"""Point enumeration, stratification by endomorphism algebra, EO sequences."""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import prod
from typing import Iterable, Iterator

import numpy as np

from . import exact_linalg as xl
from .field_tower import FieldCtx, make_field
from .pair_endo import EndoAlgebra, SubspacePair, end_algebra
from .symplectic import BudgetError, SymplecticSpace, enumerate_sp, is_lagrangian

__all__ = [
    "gaussian_binomial",
    "lagrangian_count",
    "enumerate_grassmannian",
    "enumerate_lagrangian",
    "enumerate_gl",
    "StratumReport",
    "Stratification",
    "stratify",
    "ElementarySequence",
    "eo_sequences",
    "ENUM_BUDGET",
]

ENUM_BUDGET = 10**7
CONJ_BUDGET = 2**24


def gaussian_binomial(n: int, r: int, q: int) -> int:
    if not 0 <= r <= n:
        return 0
    num = prod(q ** (n - i) - 1 for i in range(r))
    den = prod(q ** (i + 1) - 1 for i in range(r))
    return num // den


def lagrangian_count(r: int, q: int) -> int:
    return prod(q**i + 1 for i in range(1, r + 1))


def enumerate_grassmannian(n: int, r: int, L: FieldCtx, budget: int = ENUM_BUDGET) -> Iterator[np.ndarray]:
    """Column-reduced echelon representatives of Gr(n, r)(L)."""
    if not 0 < r < n:
        raise ValueError("need 0 < r < n")
    total = gaussian_binomial(n, r, L.q)
    if total > budget:
        raise BudgetError(f"Gr({n},{r}) over F_{L.q} exceeds budget {budget}", total)
    for piv in itertools.combinations(range(n), r):
        pset = set(piv)
        free = [(i, j) for j, c in enumerate(piv) for i in range(c + 1, n) if i not in pset]
        for vals in itertools.product(range(L.q), repeat=len(free)):
            P = np.zeros((n, r), dtype=object)
            for j, c in enumerate(piv):
                P[c, j] = 1
            for (i, j), v in zip(free, vals):
                P[i, j] = v
            yield P


def enumerate_lagrangian(r: int, L: FieldCtx, budget: int = ENUM_BUDGET) -> Iterator[np.ndarray]:
    """Lagrangian points of K^{2r} (x) L, filtered from the Grassmannian."""
    total = gaussian_binomial(2 * r, r, L.q)
    if total > budget:
        raise BudgetError(f"Gr({2 * r},{r}) over F_{L.q} exceeds budget {budget}", total)
    space = SymplecticSpace(r, make_field(L.p, 1))
    for P in enumerate_grassmannian(2 * r, r, L, budget):
        if is_lagrangian(P, space, L)[0]:
            yield P


def enumerate_gl(n: int, K: FieldCtx, budget: int = CONJ_BUDGET) -> np.ndarray:
    """All of GL_n(K) as (N, n, n) codes, built column by column."""
    order = prod(K.q**n - K.q**i for i in range(n))
    if K.q ** (n * n) > budget:
        raise BudgetError(f"GL_{n}(F_{K.q}) search exceeds budget {budget}", K.q ** (n * n))
    q = K.q
    idx = np.arange(q**n, dtype=np.int64)
    V = np.stack([(idx // q**i) % q for i in range(n)], axis=1)
    coeffs = {
        k: np.stack([(np.arange(q**k) // q**i) % q for i in range(k)], axis=1) if k else np.zeros((1, 0), dtype=np.int64)
        for k in range(n)
    }
    states = [()]
    for k in range(n):
        nxt = []
        for st in states:
            span = np.zeros((q**k, n), dtype=np.int64)
            for i, vi in enumerate(st):
                span = K.vadd(span, K.vmul(coeffs[k][:, i : i + 1], V[vi][None, :]))
            bad = np.zeros(q**n, dtype=bool)
            bad[(span * (q ** np.arange(n))).sum(axis=1)] = True
            nxt.extend(st + (int(v),) for v in np.nonzero(~bad)[0])
        states = nxt
    G = np.stack([V[list(st)].T for st in states]) if states else np.zeros((0, n, n), dtype=np.int64)
    if G.shape[0] != order:
        raise AssertionError("GL enumeration count mismatch")
    return G


def batch_inverse(G: np.ndarray, K: FieldCtx) -> np.ndarray:
    """Gauss-Jordan inverse of each matrix of an invertible batch."""
    N, n, _ = G.shape
    A = np.concatenate([G, np.broadcast_to(np.eye(n, dtype=np.int64), G.shape)], axis=2).copy()
    ar = np.arange(N)
    for c in range(n):
        piv = c + np.argmax(A[:, c:, c] != 0, axis=1)
        rows_c = A[ar, c].copy()
        A[ar, c] = A[ar, piv]
        A[ar, piv] = rows_c
        inv = K.vpow(A[:, c, c], K.q - 2)
        A[:, c] = K.vmul(A[:, c], inv[:, None])
        for i in range(n):
            if i != c:
                A[:, i] = K.vsub(A[:, i], K.vmul(A[:, i, c : c + 1], A[:, c]))
    return A[:, :, n:]


class _ConjugacyOracle:
    """Exhaustive conjugacy and inclusion tests under a finite group."""

    def __init__(self, G: np.ndarray, K: FieldCtx):
        self.G = G
        self.Gi = batch_inverse(G, K)
        self.K = K

    def _conj_masks(self, A: EndoAlgebra, B: EndoAlgebra) -> np.ndarray:
        """Indices of gamma with gamma A gamma^-1 within B (survivors pruned per basis element)."""
        from .symplectic import _in_span_mask

        K = self.K
        alive = np.arange(self.G.shape[0])
        for b in A.basis:
            G, Gi = self.G[alive], self.Gi[alive]
            bb = np.broadcast_to(b.astype(np.int64), G.shape)
            C = K.vmatmul(K.vmatmul(G, bb), Gi)
            alive = alive[_in_span_mask(C, B)]
            if alive.size == 0:
                break
        return alive

    def contained(self, A: EndoAlgebra, B: EndoAlgebra) -> bool:
        if A.dim > B.dim:
            return False
        return self._conj_masks(A, B).size > 0

    def conjugate(self, A: EndoAlgebra, B: EndoAlgebra) -> bool:
        return A.dim == B.dim and self.contained(A, B)


@dataclass
class StratumReport:
    signature: tuple
    class_id: int
    count: int
    representative: np.ndarray
    field: tuple  # (p, e)
    algebra: EndoAlgebra
    n_algebras: int = 1

    @property
    def dim(self) -> int:
        return self.signature[0]

    def to_row(self, L: FieldCtx) -> dict:
        rep = [[[int(c) for c in L.coeffs(int(x))] for x in row] for row in self.representative]
        return {
            "signature": "/".join(map(str, self.signature)),
            "class_id": self.class_id,
            "count": self.count,
            "representative": rep,
            "field": f"F_{self.field[0]}^{self.field[1]}",
        }


@dataclass
class Stratification:
    strata: list[StratumReport]
    total: int
    coarse: bool
    lattice: list[list[bool]] = field(default_factory=list)
    closure_ok: bool | None = None
    collisions: list[tuple] = field(default_factory=list)


def _end_chunk(args):
    p, d, e, n, r, mats = args
    K, L = make_field(p, d), make_field(p, e)
    out = []
    for P in mats:
        E = end_algebra(SubspacePair(n, r, K, L, np.array(P, dtype=object)), cross_check=False)
        out.append((E.vectors.tolist(), E.signature))
    return out


def stratify(
    points: Iterable[np.ndarray],
    K: FieldCtx,
    L: FieldCtx,
    mode: str = "GL",
    conj_budget: int = CONJ_BUDGET,
    workers: int = 1,
) -> Stratification:
    """Bucket points by End(V0, W) up to conjugacy under GL_n(K) or Sp_2r(K)."""
    pts = [np.asarray(P, dtype=object) for P in points]
    if not pts:
        return Stratification([], 0, True)
    n, r = pts[0].shape
    jobs = [[[[int(x) for x in row] for row in P] for P in pts[i::max(workers, 1)]] for i in range(max(workers, 1))]
    args = [(K.p, K.e, L.e, n, r, job) for job in jobs]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_end_chunk, args))
    else:
        parts = [_end_chunk(a) for a in args]
    results = [None] * len(pts)
    for w, part in enumerate(parts):
        for k, res in enumerate(part):
            results[w + k * max(workers, 1)] = res

    # distinct algebras, in first-seen order
    algebras: dict[tuple, EndoAlgebra] = {}
    members: dict[tuple, list[int]] = {}
    for i, (vecs, sig) in enumerate(results):
        E = EndoAlgebra(K, n, np.array(vecs, dtype=np.int64).reshape(-1, n * n), tuple(sig))
        key = E.key()
        algebras.setdefault(key, E)
        members.setdefault(key, []).append(i)

    coarse = True
    oracle = None
    try:
        if mode == "Sp":
            if K.q ** (n * n) > conj_budget:
                raise BudgetError("conjugacy search budget", K.q ** (n * n))
            G = enumerate_sp(n // 2, K, conj_budget)
        else:
            G = enumerate_gl(n, K, conj_budget)
        oracle = _ConjugacyOracle(G, K)
        coarse = False
    except BudgetError:
        pass

    classes: list[list[tuple]] = []
    collisions = []
    for key, E in algebras.items():
        placed = False
        shared = False
        for cl in classes:
            R = algebras[cl[0]]
            if R.signature != E.signature:
                continue
            shared = True
            if oracle is None or oracle.conjugate(R, E):
                cl.append(key)
                placed = True
                break
        if not placed:
            if shared:
                collisions.append(E.signature)
            classes.append([key])

    reports = []
    for cid, cl in enumerate(classes):
        idx = sorted(i for key in cl for i in members[key])
        rep = algebras[cl[0]]
        reports.append(
            StratumReport(rep.signature, cid, len(idx), pts[idx[0]], (L.p, L.e), rep, len(cl))
        )
    order = sorted(range(len(reports)), key=lambda k: (-reports[k].signature[0], reports[k].signature, k))
    reports = [reports[k] for k in order]
    for new_id, rep in enumerate(reports):
        rep.class_id = new_id
    out = Stratification(reports, len(pts), coarse, collisions=collisions)
    if oracle is not None:
        _check_closure(out, algebras, members, classes, order, oracle)
    return out


def _check_closure(out, algebras, members, classes, order, oracle) -> None:
    """[E] within [E'] iff Gr_[E'] within Gr_[E], on the enumerated points.

    Gr_[E] is the set of points whose algebra contains a conjugate of E.
    Membership is read off the class lattice; the last member of every
    class is tested directly against each representative as a spot check.
    """
    reps = [algebras[classes[k][0]] for k in order]
    m = len(reps)
    lattice = [[oracle.contained(reps[a], reps[b]) for b in range(m)] for a in range(m)]
    spot = all(
        oracle.contained(reps[a], algebras[classes[order[b]][-1]]) == lattice[a][b]
        for a in range(m)
        for b in range(m)
    )
    cls_pts = [{i for key in classes[k] for i in members[key]} for k in order]
    gr = [set().union(*(cls_pts[b] for b in range(m) if lattice[a][b])) for a in range(m)]
    ok = all(lattice[a][b] == (gr[b] <= gr[a]) for a in range(m) for b in range(m))
    out.lattice = lattice
    out.closure_ok = ok and spot


# ------------------------------------------------------------ EO sequences


@dataclass(frozen=True)
class ElementarySequence:
    values: tuple

    def __post_init__(self):
        v = self.values
        if not v or v[0] != 0:
            raise ValueError("phi(0) must be 0")
        if any(not (v[i] <= v[i + 1] <= v[i] + 1) for i in range(len(v) - 1)):
            raise ValueError("steps must be 0 or 1")

    @property
    def g(self) -> int:
        return len(self.values) - 1

    def __call__(self, i: int) -> int:
        return self.values[i]

    @property
    def size(self) -> int:
        return sum(self.values)

    def is_supersingular(self) -> bool:
        g = self.g
        return all(self(g - c) == 0 for c in range(g // 2, g + 1))

    @property
    def c(self) -> int:
        """Least c with phi(g - c) = 0."""
        return next(c for c in range(self.g + 1) if self(self.g - c) == 0)

    def __le__(self, other: "ElementarySequence") -> bool:
        return all(a <= b for a, b in zip(self.values, other.values))


def phi_max(g: int) -> ElementarySequence:
    h = g // 2
    vals = [0] * (g + 1)
    for i in range(h + 1):
        vals[g - i] = h - i
    return ElementarySequence(tuple(vals))


@dataclass
class EOData:
    g: int
    phi: list[ElementarySequence]
    phi_ss: list[ElementarySequence]
    phi_max: ElementarySequence

    @property
    def dimensions(self) -> dict:
        return {s.values: s.size for s in self.phi}


def eo_sequences(g: int) -> EOData:
    if not 0 <= g <= 20:
        raise ValueError("need 0 <= g <= 20")
    seqs = []
    for steps in itertools.product((0, 1), repeat=g):
        seqs.append(ElementarySequence(tuple(itertools.accumulate(steps, initial=0))))
    ss = [s for s in seqs if s.is_supersingular()]
    return EOData(g, seqs, ss, phi_max(g))
