"""Min-rank decoding over GF(q).

Three decoders share one outcome type:

* :func:`minrank_oracle` enumerates every candidate matrix (tiny sizes only);
* :func:`minrank_reduced` writes a rank-r candidate as X = U V^T, enumerates one
  basis U per column space, and solves the linear system left in V;
* :func:`minrank_noisy` minimises rank(X) + lam * ||w||_0 by walking the noise
  weight upwards and running the reduced search on each corrected syndrome.

Inputs may be ``MatFq``/``VecFq`` objects or plain integer arrays; ``H`` is a
sequence of k matrices of shape N x n (or a (k, N, n) array).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .counting import gaussian_binomial
from .field import GF, CapExceeded, field_for
from .matfq import (PACK_LIMIT, AffineSolver, MatFq, VecFq, _all_vectors, _eliminate_gf2_packed,
                    all_matrices, batch_rank, batch_rref, vect)

CLASS_CHUNK = 4096
ORACLE_LIMIT = 1 << 22
AFFINE_ENUM_LIMIT = 1 << 12


class Status(str, Enum):
    UNIQUE = "unique"
    AMBIGUOUS = "ambiguous"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class DecodeOutcome:
    """Result of a decoder run.

    ``X_star`` (and ``w_star`` for the noisy decoder) are set only when the
    minimiser is unique.  ``achieved_rank`` is None when infeasible.
    """

    status: Status
    X_star: MatFq | None
    achieved_rank: int | None
    achieved_noise_weight: int = 0
    solutions_examined: int = 0
    w_star: VecFq | None = None
    objective: Fraction | None = None

    @property
    def unique(self) -> bool:
        return self.status is Status.UNIQUE


# -- input normalisation --------------------------------------------------------------

def _as_field(q) -> GF:
    return q if isinstance(q, GF) else field_for(int(q))


def _as_stack(H_list, F: GF) -> np.ndarray:
    if isinstance(H_list, np.ndarray):
        H = np.asarray(H_list, dtype=np.int64)
        if H.ndim != 3:
            raise ValueError("H must be a (k, N, n) array")
    else:
        mats = list(H_list)
        for M in mats:
            if isinstance(M, MatFq) and M.field != F:
                raise ValueError("field mismatch")
        if not mats:
            raise ValueError("empty H list needs an explicit (0, N, n) array")
        H = np.stack([M.data if isinstance(M, MatFq) else np.asarray(M, np.int64) for M in mats])
    F.check(H)
    return H


def _as_vec(y, F: GF, k: int) -> np.ndarray:
    if isinstance(y, VecFq):
        if y.field != F:
            raise ValueError("field mismatch")
        y = y.data
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if len(y) != k:
        raise ValueError(f"syndrome length {len(y)} does not match {k} sensing matrices")
    F.check(y)
    return y


# -- exhaustive oracle ---------------------------------------------------------------------

@lru_cache(maxsize=8)
def _all_with_ranks(N: int, n: int, q: int):
    F = field_for(q)
    mats = all_matrices(N, n, q)
    ranks = batch_rank(mats, F)
    flat = mats.reshape(len(mats), -1)
    flat.setflags(write=False)
    ranks.setflags(write=False)
    return flat, ranks


def _measure_all(H: np.ndarray, F: GF) -> tuple[np.ndarray, np.ndarray]:
    k, N, n = H.shape
    if F.q ** (N * n) > ORACLE_LIMIT:
        raise CapExceeded(f"exhaustive search over {F.q}^{N * n} matrices is too large")
    flat, ranks = _all_with_ranks(N, n, F.q)
    meas = F.matmul(flat, H.reshape(k, -1).T)  # (M, k)
    return meas, ranks


def minrank_oracle(y, H_list, q, r_cap: int | None = None) -> DecodeOutcome:
    """Brute-force min-rank decoding by enumerating every N x n matrix."""
    F = _as_field(q)
    H = _as_stack(H_list, F)
    y = _as_vec(y, F, H.shape[0])
    k, N, n = H.shape
    meas, ranks = _measure_all(H, F)
    feasible = np.all(meas == y[None, :], axis=1)
    if r_cap is not None:
        feasible &= ranks <= r_cap
    M = len(ranks)
    if not feasible.any():
        return DecodeOutcome(Status.INFEASIBLE, None, None, 0, M)
    r = int(ranks[feasible].min())
    idx = np.flatnonzero(feasible & (ranks == r))
    if len(idx) > 1:
        return DecodeOutcome(Status.AMBIGUOUS, None, r, 0, M)
    flat, _ = _all_with_ranks(N, n, F.q)
    return DecodeOutcome(Status.UNIQUE, MatFq(flat[idx[0]].reshape(N, n), F), r, 0, M)


def minrank_noisy_oracle(y, H_list, q, lam) -> DecodeOutcome:
    """Brute-force joint minimisation of rank(X) + lam * ||w||_0.

    For every X the noise is forced to w = y - H(X), so enumerating X alone
    covers every feasible pair.
    """
    F = _as_field(q)
    H = _as_stack(H_list, F)
    y = _as_vec(y, F, H.shape[0])
    k, N, n = H.shape
    lam = Fraction(lam).limit_denominator(10**9)
    meas, ranks = _measure_all(H, F)
    W = F.sub(y[None, :], meas)
    weights = np.count_nonzero(W, axis=1)
    # compare lam*s + r exactly on a common denominator
    score = ranks * lam.denominator + weights * lam.numerator
    best = score.min()
    idx = np.flatnonzero(score == best)
    # report ties the way the search meets them: smallest noise weight first
    i = int(idx[np.argmin(weights[idx])])
    obj = Fraction(int(best), lam.denominator)
    if len(idx) > 1:
        return DecodeOutcome(Status.AMBIGUOUS, None, int(ranks[i]), int(weights[i]), len(ranks),
                             objective=obj)
    flat, _ = _all_with_ranks(N, n, F.q)
    return DecodeOutcome(Status.UNIQUE, MatFq(flat[i].reshape(N, n), F), int(ranks[i]),
                         int(weights[i]), len(ranks), VecFq(W[i], F), obj)


# -- coset augmentation and basis classes ---------------------------------------------------

def coset_augment(y, H_list, q=None) -> list[VecFq]:
    """Syndrome-augmented check vectors [vect(H_a); -y_a] of length N*n + 1.

    A vector [vect(X1); x2] orthogonal to all of them either has x2 = 0, and
    then X1 solves the homogeneous system, or x2 != 0, and then x2^{-1} X1
    satisfies <H_a, X> = y_a.
    """
    if q is None:
        if isinstance(y, VecFq):
            F = y.field
        else:
            raise ValueError("q is required when y is not a VecFq")
    else:
        F = _as_field(q)
    H = _as_stack(H_list, F)
    y = _as_vec(y, F, H.shape[0])
    out = []
    for a in range(H.shape[0]):
        v = np.concatenate([vect(MatFq(H[a], F)).data, [F.neg(int(y[a]))]])
        out.append(VecFq(v, F))
    return out


def coset_recover(x_aug: VecFq, N: int, n: int) -> MatFq | None:
    """Map a solution of the augmented system back to a solution of the original
    one; None when x2 = 0 (a homogeneous solution)."""
    F = x_aug.field
    x2 = int(x_aug.data[-1])
    if x2 == 0:
        return None
    x1 = F.mul(x_aug.data[:-1], F.inv(x2))
    return MatFq(np.asarray(x1).reshape(n, N).T, F)


def _rcef_pivot_layout(N: int, r: int, pivots: Sequence[int]) -> list[tuple[int, int]]:
    """Free (row, col) positions of a reduced column echelon form with the given
    pivot rows."""
    pset = set(pivots)
    return [(i, l) for l, p in enumerate(pivots) for i in range(p + 1, N) if i not in pset]


def class_rep_batches(N: int, r: int, q: int, chunk: int = CLASS_CHUNK) -> Iterator[np.ndarray]:
    """Yield the basis-class representatives as (B, N, r) arrays, in order."""
    if not 1 <= r <= N:
        raise ValueError(f"need 1 <= r <= N, got r={r}, N={N}")
    for pivots in itertools.combinations(range(N), r):
        free = _rcef_pivot_layout(N, r, pivots)
        base = np.zeros((N, r), dtype=np.int64)
        base[list(pivots), list(range(r))] = 1
        total = q ** len(free)
        rows = np.array([i for i, _ in free], dtype=np.int64)
        cols = np.array([l for _, l in free], dtype=np.int64)
        for start in range(0, total, chunk):
            stop = min(start + chunk, total)
            idx = np.arange(start, stop, dtype=np.int64)
            B = np.repeat(base[None], stop - start, axis=0)
            if len(free):
                pw = q ** np.arange(len(free) - 1, -1, -1, dtype=np.int64)
                B[:, rows, cols] = (idx[:, None] // pw[None, :]) % q
            yield B


def basis_class_reps(N: int, r: int, q: int) -> Iterator[MatFq]:
    """One full-rank N x r matrix per r-dimensional subspace of GF(q)^N.

    Representatives are the reduced column echelon forms: pivot rows
    p_1 < ... < p_r, a 1 at (p_l, l), zeros in the other pivot rows and above
    each pivot, and free entries below.
    """
    F = field_for(q)
    for batch in class_rep_batches(N, r, q):
        for U in batch:
            yield MatFq(U, F)


def class_count(N: int, r: int, q: int) -> int:
    return gaussian_binomial(N, r, q)


# -- reduced search ------------------------------------------------------------------------------

@dataclass
class _SearchResult:
    rank: int
    count: int
    X: np.ndarray | None
    examined: int


def _class_systems(U: np.ndarray, H: np.ndarray, F: GF) -> np.ndarray:
    """Coefficient tensor A[b, a, l*n + j] = (U_b^T H_a)[l, j]."""
    B, N, r = U.shape
    k, _, n = H.shape
    Ut = np.swapaxes(U, 1, 2).reshape(B * r, N)
    Hp = H.transpose(1, 0, 2).reshape(N, k * n)
    prod = F.matmul(Ut, Hp).reshape(B, r, k, n)
    return prod.transpose(0, 2, 1, 3).reshape(B, k, r * n)


def _class_echelon(U: np.ndarray, H: np.ndarray, neg_y: np.ndarray, F: GF):
    """Row-reduce the coset-augmented system [A_U | -y] for a batch of classes.

    Returns (solvable, rank, pivots, last) where ``last`` holds the final
    column of each reduced system.
    """
    B, N, r = U.shape
    k, _, n = H.shape
    C = r * n + 1
    if F.q == 2 and C <= PACK_LIMIT:
        # build the bit-packed rows directly: one float matmul for U^T H,
        # a second one to weight each coefficient by its bit
        Ut = np.swapaxes(U, 1, 2).reshape(B * r, N).astype(np.float64)
        Hp = H.transpose(1, 0, 2).reshape(N, k * n).astype(np.float64)
        prod = np.fmod(Ut @ Hp, 2.0).reshape(B, r, k, n).transpose(0, 2, 1, 3).reshape(B * k, r * n)
        weights = np.ldexp(1.0, np.arange(C - 1, 0, -1))
        packed = (prod @ weights).reshape(B, k).astype(np.uint64) | neg_y[None, :].astype(np.uint64)
        P, rank, piv = _eliminate_gf2_packed(packed, C)
        last = (P & np.uint64(1)).astype(np.int64)
    else:
        A = _class_systems(U, H, F)
        aug = np.concatenate([A, np.broadcast_to(neg_y[None, :, None], (B, k, 1))], axis=2)
        R, rank, piv = batch_rref(aug, F)
        last = R[:, :, C - 1]
    # the x2 coordinate can be nonzero iff its column carries no pivot
    solvable = ~np.any(piv == C - 1, axis=1)
    return solvable, rank, piv, last


def _search(y: np.ndarray, H: np.ndarray, F: GF, r_cap: int, stop_at: int = 2) -> _SearchResult | None:
    """Minimum rank <= r_cap over {X : <H_a, X> = y_a}.

    Returns the rank, the number of minimisers (stopping once ``stop_at`` are
    seen) and the minimiser when it is unique.  None if nothing has rank <= r_cap.
    Requires N <= n (callers transpose).
    """
    k, N, n = H.shape
    if not y.any():
        return _SearchResult(0, 1, np.zeros((N, n), dtype=np.int64), 1)
    examined = 1
    neg_y = F.neg(y)
    for r in range(1, min(r_cap, N) + 1):
        count = 0
        found = None
        for U in class_rep_batches(N, r, F.q):
            ok, rank, piv, last = _class_echelon(U, H, neg_y, F)
            examined += len(U)
            if not ok.any():
                continue
            nullity = r * n - rank[ok]
            count += int(np.sum(F.q ** nullity.astype(object)))
            if found is None:
                b = int(np.flatnonzero(ok)[0])
                found = (U[b], piv[b], last[b])
            if count >= stop_at:
                break
        if count == 0:
            continue
        X = None
        if count == 1:
            # unique class with trivial nullspace: set x2 = 1 and read V off
            Ub, pivb, lastb = found
            v = np.zeros(r * n, dtype=np.int64)
            for i, c in enumerate(pivb):
                if c < 0:
                    break
                v[c] = F.neg(int(lastb[i]))
            X = F.matmul(Ub, v.reshape(r, n))
        return _SearchResult(r, count, X, examined)
    return None


def _consistent(y: np.ndarray, H: np.ndarray, F: GF) -> bool:
    k = H.shape[0]
    if k == 0:
        return not y.any()
    ok, _ = AffineSolver(H.reshape(k, -1), F).solve_many(y[None])
    return bool(ok[0])


def minrank_reduced(y, H_list, q, r_cap: int | None = None) -> DecodeOutcome:
    """Min-rank decoding by basis-class enumeration.

    For r = 0, 1, 2, ... every column space U (one echelon representative per
    class) turns <H_a, U V^T> = y_a into a linear system in V, solved through
    its coset-augmented homogeneous form.  The first rank with a solvable class
    is the minimum.  All minimisers there have rank exactly r, so distinct
    classes give distinct X and the minimiser count is the sum of q**nullity
    over solvable classes; the scan stops once two are found.
    """
    F = _as_field(q)
    H = _as_stack(H_list, F)
    y = _as_vec(y, F, H.shape[0])
    k, N, n = H.shape
    transposed = N > n
    if transposed:
        H = H.transpose(0, 2, 1)
    cap = min(N, n) if r_cap is None else min(r_cap, N, n)
    if not _consistent(y, H, F):
        return DecodeOutcome(Status.INFEASIBLE, None, None, 0, 0)
    res = _search(y, H, F, cap)
    if res is None:
        return DecodeOutcome(Status.INFEASIBLE, None, None, 0, 0)
    if res.count > 1:
        return DecodeOutcome(Status.AMBIGUOUS, None, res.rank, 0, res.examined)
    X = res.X.T if transposed else res.X
    return DecodeOutcome(Status.UNIQUE, MatFq(X, F), res.rank, 0, res.examined)


# -- noisy decoder --------------------------------------------------------------------------

def _weight_s_vectors(k: int, s: int, q: int) -> np.ndarray:
    """All length-k vectors of weight s: supports in lexicographic order, then
    nonzero value patterns in lexicographic order."""
    supports = list(itertools.combinations(range(k), s))
    patterns = _all_vectors(s, q - 1) + 1 if s else np.zeros((1, 0), dtype=np.int64)
    out = np.zeros((len(supports) * len(patterns), k), dtype=np.int64)
    for i, S in enumerate(supports):
        out[i * len(patterns):(i + 1) * len(patterns)][:, list(S)] = patterns
    return out


class _AffineCosetSearch:
    """Min-rank search by listing the whole solution coset (small nullity only)."""

    def __init__(self, H: np.ndarray, F: GF):
        self.F = F
        self.k, self.N, self.n = H.shape
        self.solver = AffineSolver(H.reshape(self.k, -1), F)
        null = self.solver.nullspace
        coeffs = _all_vectors(len(null), F.q)
        self.span = F.matmul(coeffs, null) if len(null) else np.zeros((1, self.N * self.n), np.int64)

    def run(self, Y: np.ndarray, r_cap: int):
        """For each row of Y: (min rank or -1, minimiser count, flat minimiser)."""
        F = self.F
        ok, X0 = self.solver.solve_many(Y)
        M = len(Y)
        min_rank = np.full(M, -1, dtype=np.int64)
        count = np.zeros(M, dtype=np.int64)
        first = np.zeros((M, self.N * self.n), dtype=np.int64)
        S = len(self.span)
        step = max(1, (1 << 18) // S)
        idx_ok = np.flatnonzero(ok)
        for start in range(0, len(idx_ok), step):
            ids = idx_ok[start:start + step]
            cands = F.add(X0[ids][:, None, :], self.span[None, :, :])
            ranks = batch_rank(cands.reshape(-1, self.N, self.n), F).reshape(len(ids), S)
            ranks = np.where(ranks <= r_cap, ranks, np.iinfo(np.int64).max)
            mr = ranks.min(axis=1)
            hit = mr <= r_cap
            min_rank[ids[hit]] = mr[hit]
            count[ids] = np.sum(ranks == mr[:, None], axis=1) * hit
            arg = np.argmax(ranks == mr[:, None], axis=1)
            first[ids] = cands[np.arange(len(ids)), arg]
        return min_rank, count, first


def minrank_noisy(y, H_list, q, lam, max_noise_weight: int = 3,
                  strategy: str = "auto") -> DecodeOutcome:
    """Exact minimiser of rank(X) + lam * ||w||_0 subject to <H_a, X> + w_a = y_a.

    Noise weights s = 0, 1, 2, ... are visited in order.  At weight s only
    ranks up to floor(best - lam*s) can tie or improve on the best objective
    so far, and the walk stops once lam*s exceeds it.  When that bound drops
    to rank 0 the only candidate is X = 0, w = y, settled without enumeration.
    If certification needs a weight above ``max_noise_weight`` the outcome is
    INFEASIBLE.  ``strategy`` picks how each corrected syndrome is decoded:
    ``classes`` always uses the basis-class search, ``affine`` lists the full
    solution coset, ``auto`` lists the coset when it has at most 4096 members.
    """
    F = _as_field(q)
    H = _as_stack(H_list, F)
    y = _as_vec(y, F, H.shape[0])
    lam = Fraction(lam).limit_denominator(10**9)
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if strategy not in ("auto", "classes", "affine"):
        raise ValueError(f"unknown strategy {strategy!r}")
    k, N, n = H.shape
    transposed = N > n
    Hs = H.transpose(0, 2, 1) if transposed else H
    Nn = min(N, n)

    solver = AffineSolver(H.reshape(k, -1), F)
    affine = None
    if strategy == "affine" or (strategy == "auto" and F.q ** solver.nullity <= AFFINE_ENUM_LIMIT):
        affine = _AffineCosetSearch(H, F)

    best: Fraction | None = None
    count = 0
    arg: tuple[np.ndarray, np.ndarray] | None = None  # (X, w) when count == 1
    best_rank = best_s = None
    examined = 0
    y_weight = int(np.count_nonzero(y))

    def offer(obj: Fraction, c: int, r: int, s: int, X, w):
        nonlocal best, count, arg, best_rank, best_s
        if best is None or obj < best:
            best, count, best_rank, best_s = obj, c, r, s
            arg = (X, w) if c == 1 else None
        elif obj == best:
            count += c
            arg = None

    for s in range(0, k + 1):
        if best is not None and lam * s > best:
            break
        r_cap = Nn if best is None else min(Nn, math.floor(best - lam * s))
        if r_cap == 0:
            # only X = 0 fits, which forces w = y
            if y_weight == s:
                offer(lam * s, 1, 0, s, np.zeros((N, n), np.int64), y.copy())
            examined += 1
            continue
        if s > max_noise_weight:
            return DecodeOutcome(Status.INFEASIBLE, None, None, 0, examined)
        W = _weight_s_vectors(k, s, F.q)
        Y = F.sub(y[None, :], W)
        if affine is not None:
            mr, cnt, first = affine.run(Y, r_cap)
            examined += len(Y) * len(affine.span)
            hits = np.flatnonzero(mr >= 0)
            if len(hits):
                r = int(mr[hits].min())
                at = hits[mr[hits] == r]
                c = int(cnt[at].sum())
                i = int(at[0])
                offer(r + lam * s, c, r, s, first[i].reshape(N, n), W[i])
            continue
        consistent, _ = solver.solve_many(Y)
        for i in np.flatnonzero(consistent):
            if best is not None:
                r_cap = min(Nn, math.floor(best - lam * s))
                if r_cap < 0:
                    break
            res = _search(Y[i], Hs, F, r_cap)
            if res is None:
                continue
            examined += res.examined
            X = None
            if res.X is not None:
                X = res.X.T if transposed else res.X
            offer(res.rank + lam * s, res.count, res.rank, s, X, W[i])
    if best is None:
        return DecodeOutcome(Status.INFEASIBLE, None, None, 0, examined)
    if count > 1:
        return DecodeOutcome(Status.AMBIGUOUS, None, best_rank, best_s, examined, objective=best)
    X, w = arg
    return DecodeOutcome(Status.UNIQUE, MatFq(X, F), best_rank, best_s, examined,
                         VecFq(w, F), best)
