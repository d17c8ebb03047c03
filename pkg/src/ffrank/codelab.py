"""Rank-metric codes defined by parity-check matrices.

The code of checks H_1..H_k is C = {C : <C, H_a> = 0 for all a}.  Small codes
are enumerated outright from a nullspace basis; everything else here (rank
spectrum, minimum rank distance, strong-recovery check) reads off that list.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .field import GF, CapExceeded, field_for
from .matfq import AffineSolver, MatFq, _all_vectors, all_matrices, batch_rank, stacked_dim

ENUM_CAP = 1 << 20


@dataclass(frozen=True, eq=False)
class CodeSpec:
    """Linear rank-metric code of n x n matrices cut out by k parity checks."""

    n: int
    q: int
    parity_checks: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        F = field_for(self.q)
        H = self.parity_checks
        if not isinstance(H, np.ndarray):
            H = list(H)
            H = (np.stack([h.data if isinstance(h, MatFq) else np.asarray(h) for h in H])
                 if H else np.zeros((0, self.n, self.n), dtype=np.int64))
        H = np.array(H, dtype=np.int64)
        if H.ndim != 3 or H.shape[1:] != (self.n, self.n):
            raise ValueError(f"parity checks must have shape (k, {self.n}, {self.n})")
        F.check(H)
        H.setflags(write=False)
        object.__setattr__(self, "parity_checks", H)

    @property
    def field(self) -> GF:
        return field_for(self.q)

    @property
    def k(self) -> int:
        return self.parity_checks.shape[0]

    def check_list(self) -> list[MatFq]:
        return [MatFq(H, self.field) for H in self.parity_checks]

    def dimension(self) -> int:
        """log_q |C| = n^2 - dim span{vect(H_a)}."""
        return self.n * self.n - (stacked_dim(self.check_list()) if self.k else 0)

    def size(self) -> int:
        return self.q ** self.dimension()


def codeword_array(code: CodeSpec, cap: int = ENUM_CAP) -> np.ndarray:
    """All codewords as an (|C|, n, n) array; the zero word comes first."""
    n, F = code.n, code.field
    if code.k == 0:
        if F.q ** (n * n) > cap:
            raise CapExceeded(f"code has {F.q}^{n * n} codewords, above the cap {cap}")
        return all_matrices(n, n, F.q)
    solver = AffineSolver(code.parity_checks.reshape(code.k, -1), F)
    if F.q ** solver.nullity > cap:
        raise CapExceeded(f"code has {F.q}^{solver.nullity} codewords, above the cap {cap}")
    coeffs = _all_vectors(solver.nullity, F.q)
    if solver.nullity == 0:
        return np.zeros((1, n, n), dtype=np.int64)
    return F.matmul(coeffs, solver.nullspace).reshape(-1, n, n)


def enumerate_codewords(code: CodeSpec, cap: int = ENUM_CAP) -> list[MatFq]:
    F = code.field
    return [MatFq(C, F) for C in codeword_array(code, cap)]


def rank_spectrum(code: CodeSpec, cap: int = ENUM_CAP) -> np.ndarray:
    """counts[r] = number of codewords of rank r, for r = 0..n."""
    ranks = batch_rank(codeword_array(code, cap), code.field)
    return np.bincount(ranks, minlength=code.n + 1)


def ncr_count(code: CodeSpec, r: int) -> int:
    """Number of codewords of rank exactly r."""
    if not 0 <= r <= code.n:
        raise ValueError(f"rank {r} outside [0, {code.n}]")
    return int(rank_spectrum(code)[r])


def min_rank_distance(code: CodeSpec) -> int:
    """Smallest rank of a nonzero codeword."""
    spec = rank_spectrum(code)
    nz = np.flatnonzero(spec[1:])
    if len(nz) == 0:
        raise ValueError("the code is {0}; its minimum distance is undefined")
    return int(nz[0]) + 1


def code_rate(n: int, k: int) -> float:
    """(n^2 - k) / n^2."""
    if not 0 <= k <= n * n:
        raise ValueError(f"k={k} outside [0, n^2]")
    return 1 - k / (n * n)


def strong_recovery_check(H_list, r: int, q: int, cap: int = ENUM_CAP) -> bool:
    """True iff no nonzero codeword has rank <= 2r, so every matrix of rank <= r
    is the unique low-rank explanation of its measurements."""
    if isinstance(H_list, np.ndarray):
        H = H_list
    else:
        H_list = list(H_list)
        if not H_list:
            raise ValueError("pass an explicit (0, n, n) array for an empty check list")
        H = np.stack([h.data if isinstance(h, MatFq) else np.asarray(h) for h in H_list])
    code = CodeSpec(H.shape[1], q, H)
    spec = rank_spectrum(code, cap)
    return int(spec[1:2 * r + 1].sum()) == 0


def de_caen_bound(event_probs: Sequence, pair_probs) -> float | Fraction:
    """de Caen's lower bound sum_m Q(B_m)^2 / sum_m' Q(B_m & B_m') on a union.

    Exact when the inputs are Fractions.
    """
    p = list(event_probs)
    M = len(p)
    P = [list(row) for row in pair_probs]
    if len(P) != M or any(len(row) != M for row in P):
        raise ValueError("pair_probs must be an M x M matrix")
    for i in range(M):
        if not 0 <= p[i] <= 1:
            raise ValueError("probabilities must lie in [0, 1]")
        if P[i][i] != p[i]:
            raise ValueError("the diagonal of pair_probs must equal event_probs")
        for j in range(M):
            if P[i][j] != P[j][i]:
                raise ValueError("pair_probs must be symmetric")
            if not 0 <= P[i][j] <= 1:
                raise ValueError("probabilities must lie in [0, 1]")
    total = 0
    for i in range(M):
        if p[i] == 0:
            continue
        denom = sum(P[i])
        if denom == 0:
            raise ValueError("zero denominator for an event with positive probability")
        total = total + p[i] * p[i] / denom
    return total


# -- pairwise independence ------------------------------------------------------------------

@dataclass(frozen=True)
class IndependenceReport:
    n: int
    q: int
    k: int
    mode: str
    events: int
    pairs: int
    single_values: tuple
    pair_values: tuple
    target_single: Fraction
    target_pair: Fraction
    max_single_dev: float = 0.0
    max_pair_dev: float = 0.0
    max_single_z: float = 0.0
    max_pair_z: float = 0.0
    proportional_pairs: int = 0
    proportional_values: tuple = ()

    @property
    def holds(self) -> bool:
        """Every pair of distinct differences gives independent events."""
        return self.holds_for_independent and self.proportional_pairs == 0

    @property
    def holds_for_independent(self) -> bool:
        """Linearly independent differences give independent events (and, in
        exhaustive mode, proportional ones give identical events)."""
        if self.mode == "exhaustive":
            return (set(self.single_values) == {self.target_single}
                    and set(self.pair_values) <= {self.target_pair}
                    and set(self.proportional_values) <= {self.target_single})
        return self.max_single_z <= 4.0 and self.max_pair_z <= 4.0


def _miss_table(n: int, q: int, k: int, diffs: np.ndarray) -> np.ndarray:
    """miss[t, m] = 1 iff the t-th k-tuple of sensing matrices annihilates diffs[m],
    over every k-tuple of uniform n x n matrices."""
    F = field_for(q)
    if q ** (k * n * n) > ENUM_CAP:
        raise CapExceeded("exhaustive enumeration is too large; use mode='mc'")
    allH = all_matrices(n, n, q).reshape(-1, n * n)
    single = F.matmul(allH, diffs.reshape(len(diffs), -1).T) == 0  # (q^{n^2}, M)
    miss = np.ones((1, len(diffs)), dtype=bool)
    for _ in range(k):
        miss = (miss[:, None, :] & single[None, :, :]).reshape(-1, len(diffs))
    return miss


def pair_event_probs(n: int, q: int, k: int, X, Z, Zp) -> tuple[Fraction, Fraction]:
    """Exact (P(A_Z), P(A_Z and A_Z')) over all k-tuples of uniform sensing matrices,
    where A_Z is the event that Z produces the same measurements as X."""
    F = field_for(q)
    arrs = [np.asarray(m.data if isinstance(m, MatFq) else m, dtype=np.int64) for m in (X, Z, Zp)]
    diffs = np.stack([F.sub(arrs[1], arrs[0]), F.sub(arrs[2], arrs[0])])
    miss = _miss_table(n, q, k, diffs)
    T = len(miss)
    return Fraction(int(miss[:, 0].sum()), T), Fraction(int((miss[:, 0] & miss[:, 1]).sum()), T)


def _proportional(D: np.ndarray, q: int) -> np.ndarray:
    """P[i, j] = True iff D_j = c D_i for some scalar c != 0, 1 (rows of D flattened)."""
    F = field_for(q)
    M = len(D)
    out = np.zeros((M, M), dtype=bool)
    for c in range(2, q):
        scaled = F.mul(D, c)
        out |= np.all(scaled[:, None, :] == D[None, :, :], axis=2)
    return out


def pairwise_independence_check(n: int, q: int, k: int, mode: str = "exhaustive",
                                trials: int = 20000, seed: int = 0,
                                n_pairs: int = 50) -> IndependenceReport:
    """Check P(A_Z) = q^-k and P(A_Z & A_Z') = q^-2k for distinct Z, Z' != X.

    With X fixed the events depend only on the differences Z - X, so the
    exhaustive mode runs over every pair of distinct nonzero differences and
    every k-tuple of sensing matrices, giving exact fractions.  The Monte Carlo
    mode samples ``n_pairs`` difference pairs and ``trials`` sensing tuples and
    reports z-scores.

    Over GF(2) any two distinct nonzero differences are linearly independent.
    For q > 2 a difference and a scalar multiple of it give the same event;
    such pairs are counted in ``proportional_pairs`` and kept out of
    ``pair_values``.
    """
    ts = Fraction(1, q**k)
    tp = Fraction(1, q ** (2 * k))
    if mode == "exhaustive":
        diffs = all_matrices(n, n, q)[1:]
        miss = _miss_table(n, q, k, diffs)
        T, M = miss.shape
        singles = {Fraction(int(c), T) for c in miss.sum(axis=0)}
        m = miss.astype(np.int64)
        joint = m.T @ m
        prop = _proportional(diffs.reshape(M, -1), q)
        iu = np.triu_indices(M, 1)
        is_prop = prop[iu]
        vals = joint[iu]
        pairs = {Fraction(int(c), T) for c in np.unique(vals[~is_prop])}
        pvals = {Fraction(int(c), T) for c in np.unique(vals[is_prop])}
        return IndependenceReport(n, q, k, mode, M, len(iu[0]), tuple(sorted(singles)),
                                  tuple(sorted(pairs)), ts, tp,
                                  max(abs(float(s - ts)) for s in singles),
                                  max((abs(float(p - tp)) for p in pairs), default=0.0),
                                  proportional_pairs=int(is_prop.sum()),
                                  proportional_values=tuple(sorted(pvals)))
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    from .ensemble import trial_rng
    F = field_for(q)
    rng = trial_rng(seed, 0, "pairs")
    diffs = []
    while len(diffs) < 2 * n_pairs:
        D = rng.integers(0, q, (n, n), dtype=np.int64)
        if D.any():
            diffs.append(D)
    diffs = np.stack(diffs).reshape(2 * n_pairs, -1)
    hrng = trial_rng(seed, 0, "H")
    H = hrng.integers(0, q, (trials, k, n * n), dtype=np.int64)
    inner = F.matmul(H.reshape(-1, n * n), diffs.T).reshape(trials, k, -1)
    miss = np.all(inner == 0, axis=1)  # (trials, 2P)
    a, b = miss[:, 0::2], miss[:, 1::2]
    first, second = diffs[0::2], diffs[1::2]
    same = np.all(first == second, axis=1)
    prop = np.array([_proportional(np.stack([u, v]), q)[0, 1] for u, v in zip(first, second)],
                    dtype=bool)
    skip = same | prop
    ps, pp = a.mean(axis=0), (a & b).mean(axis=0)
    ps_t, pp_t = float(ts), float(tp)
    zs = np.abs(ps - ps_t) / np.sqrt(ps_t * (1 - ps_t) / trials)
    zp = np.abs(pp - pp_t) / np.sqrt(pp_t * (1 - pp_t) / trials)
    zp = np.where(skip, 0.0, zp)
    return IndependenceReport(n, q, k, mode, 2 * n_pairs, int((~skip).sum()),
                              tuple(ps.tolist()), tuple(pp[~skip].tolist()), ts, tp,
                              float(np.abs(ps - ps_t).max()),
                              float(np.abs(pp[~skip] - pp_t).max(initial=0.0)),
                              float(zs.max()), float(zp.max()),
                              proportional_pairs=int(prop.sum()))
