"""Dense matrices and vectors over GF(q).

The single-matrix API (:class:`MatFq`, :func:`mat_rank`, :func:`solve_affine`
and friends) is built on batched kernels that reduce a stack of matrices in one
pass.  Over GF(2) with at most 63 columns the rows are bit-packed into uint64
words and reduced with XOR.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .field import GF, field_for


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.int64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MatFq:
    """An immutable rows x cols matrix over ``field``."""

    data: np.ndarray
    field: GF

    def __post_init__(self):
        arr = _frozen(self.data)
        if arr.ndim != 2:
            raise ValueError("matrix data must be two-dimensional")
        self.field.check(arr)
        object.__setattr__(self, "data", arr)

    @classmethod
    def zeros(cls, rows: int, cols: int, field: GF) -> "MatFq":
        return cls(np.zeros((rows, cols), dtype=np.int64), field)

    @classmethod
    def identity(cls, n: int, field: GF) -> "MatFq":
        return cls(np.eye(n, dtype=np.int64), field)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def entries(self) -> np.ndarray:
        return self.data.reshape(-1)

    @property
    def T(self) -> "MatFq":
        return MatFq(self.data.T, self.field)

    def _same(self, other: "MatFq") -> None:
        if not isinstance(other, MatFq):
            raise TypeError("expected a MatFq")
        if other.field != self.field:
            raise ValueError("field mismatch")

    def __add__(self, other: "MatFq") -> "MatFq":
        self._same(other)
        if self.shape != other.shape:
            raise ValueError("dimension mismatch")
        return MatFq(self.field.add(self.data, other.data), self.field)

    def __sub__(self, other: "MatFq") -> "MatFq":
        self._same(other)
        if self.shape != other.shape:
            raise ValueError("dimension mismatch")
        return MatFq(self.field.sub(self.data, other.data), self.field)

    def __neg__(self) -> "MatFq":
        return MatFq(self.field.neg(self.data), self.field)

    def __matmul__(self, other: "MatFq") -> "MatFq":
        self._same(other)
        if self.cols != other.rows:
            raise ValueError("dimension mismatch")
        return MatFq(self.field.matmul(self.data, other.data), self.field)

    def scale(self, c: int) -> "MatFq":
        return MatFq(self.field.mul(self.data, int(c)), self.field)

    def __eq__(self, other):
        return (isinstance(other, MatFq) and other.field == self.field
                and self.shape == other.shape and np.array_equal(self.data, other.data))

    def __hash__(self):
        return hash((self.shape, self.data.tobytes(), self.field))

    def __repr__(self):
        return f"MatFq({self.data.tolist()}, {self.field!r})"


@dataclass(frozen=True, eq=False)
class VecFq:
    """An immutable vector over ``field``."""

    data: np.ndarray
    field: GF

    def __post_init__(self):
        arr = _frozen(self.data)
        if arr.ndim != 1:
            raise ValueError("vector data must be one-dimensional")
        self.field.check(arr)
        object.__setattr__(self, "data", arr)

    @classmethod
    def zeros(cls, length: int, field: GF) -> "VecFq":
        return cls(np.zeros(length, dtype=np.int64), field)

    @property
    def len(self) -> int:
        return self.data.shape[0]

    def __len__(self):
        return self.data.shape[0]

    @property
    def entries(self) -> np.ndarray:
        return self.data

    def __add__(self, other: "VecFq") -> "VecFq":
        if other.field != self.field:
            raise ValueError("field mismatch")
        if len(other) != len(self):
            raise ValueError("dimension mismatch")
        return VecFq(self.field.add(self.data, other.data), self.field)

    def __sub__(self, other: "VecFq") -> "VecFq":
        if other.field != self.field:
            raise ValueError("field mismatch")
        if len(other) != len(self):
            raise ValueError("dimension mismatch")
        return VecFq(self.field.sub(self.data, other.data), self.field)

    def __eq__(self, other):
        return (isinstance(other, VecFq) and other.field == self.field
                and np.array_equal(self.data, other.data))

    def __hash__(self):
        return hash((self.data.tobytes(), self.field))

    def __repr__(self):
        return f"VecFq({self.data.tolist()}, {self.field!r})"


# -- batched elimination ----------------------------------------------------------

PACK_LIMIT = 63


def pack_gf2(A: np.ndarray) -> np.ndarray:
    """Pack the last axis (<= 63 bits) of a 0/1 array into uint64 words.

    Column c lands on bit (C-1-c), so integer order matches lexicographic order.
    """
    A = np.asarray(A)
    C = A.shape[-1]
    if C > PACK_LIMIT:
        raise ValueError("too many columns to pack")
    weights = np.left_shift(np.uint64(1), np.arange(C - 1, -1, -1, dtype=np.uint64))
    return (A.astype(np.uint64) * weights).sum(axis=-1, dtype=np.uint64)


def unpack_gf2(P: np.ndarray, C: int) -> np.ndarray:
    shifts = np.arange(C - 1, -1, -1, dtype=np.uint64)
    return ((np.asarray(P, dtype=np.uint64)[..., None] >> shifts) & np.uint64(1)).astype(np.int64)


def _eliminate_gf2_packed(P: np.ndarray, C: int, stop_col: int | None = None):
    """Reduce packed GF(2) rows in place.  P has shape (B, R), dtype uint64."""
    B, R = P.shape
    rank = np.zeros(B, dtype=np.int64)
    pivots = np.full((B, min(R, C)), -1, dtype=np.int64)
    if R == 0:
        return P, rank, pivots
    rows = np.arange(R)
    bidx = np.arange(B)
    ncols = C if stop_col is None else stop_col
    for c in range(ncols):
        bit = np.uint64(1) << np.uint64(C - 1 - c)
        cand = ((P & bit) != 0) & (rows[None, :] >= rank[:, None])
        piv = cand.argmax(axis=1)
        has = cand[bidx, piv]
        if not has.any():
            continue
        rk = np.minimum(rank, R - 1)
        piv = np.where(has, piv, rk)
        prow = P[bidx, piv]
        P[bidx, piv] = P[bidx, rk]
        P[bidx, rk] = prow
        # add the pivot row to every other row carrying this bit
        sel = ((P & bit) != 0) & has[:, None]
        sel[bidx, rk] = False
        P ^= prow[:, None] * sel.astype(np.uint64)
        pivots[bidx[has], rank[has]] = c
        rank += has
        if rank.min() >= R:
            break
    return P, rank, pivots


def _eliminate_general(A: np.ndarray, field: GF, stop_col: int | None = None):
    """Reduce a (B, R, C) stack to reduced row echelon form in place."""
    B, R, C = A.shape
    rank = np.zeros(B, dtype=np.int64)
    pivots = np.full((B, min(R, C)), -1, dtype=np.int64)
    rows = np.arange(R)
    bidx = np.arange(B)
    ncols = C if stop_col is None else stop_col
    for c in range(ncols):
        cand = (A[:, :, c] != 0) & (rows[None, :] >= rank[:, None])
        has = cand.any(axis=1)
        if not has.any():
            continue
        b = bidx[has]
        piv = cand[b].argmax(axis=1)
        rk = rank[b]
        prow = A[b, piv].copy()
        A[b, piv] = A[b, rk]
        prow = field.mul(prow, field.inv(prow[:, c])[:, None])
        A[b, rk] = prow
        factors = A[b, :, c].copy()
        factors[np.arange(len(b)), rk] = 0
        A[b] = field.sub(A[b], field.mul(factors[:, :, None], prow[:, None, :]))
        pivots[b, rk] = c
        rank[b] += 1
        if (rank >= R).all():
            break
    return A, rank, pivots


def batch_rref(A: np.ndarray, field: GF, stop_col: int | None = None):
    """Row-reduce a stack of matrices.

    Returns ``(R, rank, pivots)`` where R has the same shape as A (entries as
    int64), rank has shape (B,) and pivots (B, min(rows, cols)) lists the pivot
    column of each echelon row, padded with -1.  With ``stop_col`` only the
    first ``stop_col`` columns are used as pivot candidates.
    """
    A = np.array(A, dtype=np.int64, copy=True)
    if A.ndim == 2:
        A = A[None]
    B, R, C = A.shape
    if field.q == 2 and C <= PACK_LIMIT:
        P, rank, pivots = _eliminate_gf2_packed(pack_gf2(A), C, stop_col)
        return unpack_gf2(P, C), rank, pivots
    return _eliminate_general(A, field, stop_col)


def batch_rank(A: np.ndarray, field: GF) -> np.ndarray:
    """Ranks of a (B, R, C) stack of matrices."""
    A = np.asarray(A, dtype=np.int64)
    if A.ndim == 2:
        A = A[None]
    B, R, C = A.shape
    if R == 0 or C == 0 or B == 0:
        return np.zeros(B, dtype=np.int64)
    # rank(A) = rank(A^T); eliminate over the shorter side
    if field.q == 2 and min(R, C) <= PACK_LIMIT:
        if C > PACK_LIMIT:
            A = np.swapaxes(A, 1, 2)
            R, C = C, R
        _, rank, _ = _eliminate_gf2_packed(pack_gf2(A), C)
        return rank
    if C > R:
        A = np.swapaxes(A, 1, 2)
    _, rank, _ = _eliminate_general(np.array(A, copy=True), field)
    return rank


def rank_gf2_bigint(rows: Iterable[int]) -> int:
    """Rank of GF(2) rows given as Python ints (any width)."""
    basis: dict[int, int] = {}
    for v in rows:
        while v:
            top = v.bit_length() - 1
            if top in basis:
                v ^= basis[top]
            else:
                basis[top] = v
                break
    return len(basis)


def rref(A: np.ndarray, field: GF):
    """Reduced row echelon form of one matrix: (R, rank, pivot_columns)."""
    A = np.asarray(A, dtype=np.int64)
    if A.shape[0] == 0 or A.shape[1] == 0:
        return A.copy(), 0, []
    R, rank, piv = batch_rref(A[None], field)
    r = int(rank[0])
    return R[0], r, [int(c) for c in piv[0, :r]]


# -- public operations --------------------------------------------------------------

def mat_rank(M: MatFq) -> int:
    """Rank of M over its field."""
    if M.rows == 0 or M.cols == 0:
        return 0
    if M.field.q == 2 and min(M.shape) > PACK_LIMIT:
        D = M.data if M.cols >= M.rows else M.data.T
        return rank_gf2_bigint(int("".join(map(str, row)), 2) for row in D)
    return int(batch_rank(M.data[None], M.field)[0])


def mat_inner(A: MatFq, B: MatFq) -> int:
    """Sum of A_ij * B_ij over the field (the trace of A B^T)."""
    if A.field != B.field:
        raise ValueError("field mismatch")
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch {A.shape} vs {B.shape}")
    return int(A.field.dot(A.entries, B.entries))


def hamming_weight(v) -> int:
    """Number of nonzero entries of a vector, matrix or plain array."""
    data = v.data if isinstance(v, (MatFq, VecFq)) else np.asarray(v)
    return int(np.count_nonzero(data))


def vect(M: MatFq) -> VecFq:
    """Column-stacking vectorisation of M."""
    return VecFq(M.data.T.reshape(-1), M.field)


def unvect(v: VecFq, rows: int, cols: int) -> MatFq:
    return MatFq(v.data.reshape(cols, rows).T, v.field)


def stacked_dim(H_list: Sequence[MatFq]) -> int:
    """Dimension of the span of the vectorised matrices."""
    if len(H_list) == 0:
        return 0
    shape, field = H_list[0].shape, H_list[0].field
    for H in H_list:
        if H.shape != shape:
            raise ValueError("all matrices must share dimensions")
        if H.field != field:
            raise ValueError("field mismatch")
    stack = np.stack([H.entries for H in H_list])
    return mat_rank(MatFq(stack, field))


@dataclass(frozen=True)
class Solution:
    """Affine solution set ``x0 + span(nullspace_basis)``."""

    x0: VecFq
    nullspace_basis: tuple

    @property
    def nullity(self) -> int:
        return len(self.nullspace_basis)

    def count(self) -> int:
        return self.x0.field.q ** self.nullity

    def enumerate(self) -> np.ndarray:
        """All solutions as rows of an array (q**nullity rows)."""
        field = self.x0.field
        N = self.nullity
        if N == 0:
            return self.x0.data[None].copy()
        basis = np.stack([b.data for b in self.nullspace_basis])
        coeffs = _all_vectors(N, field.q)
        return field.add(self.x0.data[None], field.matmul(coeffs, basis))


def _all_vectors(length: int, q: int) -> np.ndarray:
    """Every vector of GF(q)^length as rows, in base-q counting order."""
    idx = np.arange(q**length, dtype=np.int64)
    pw = q ** np.arange(length - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // pw[None, :]) % q


def all_matrices(rows: int, cols: int, q: int) -> np.ndarray:
    """Every rows x cols matrix over GF(q), shape (q**(rows*cols), rows, cols)."""
    return _all_vectors(rows * cols, q).reshape(-1, rows, cols)


def _nullspace_from_rref(R: np.ndarray, rank: int, pivots: Sequence[int], ncols: int,
                         field: GF) -> list[np.ndarray]:
    free = [c for c in range(ncols) if c not in set(pivots)]
    basis = []
    for f in free:
        v = np.zeros(ncols, dtype=np.int64)
        v[f] = 1
        for i, pc in enumerate(pivots):
            v[pc] = field.neg(int(R[i, f]))
        basis.append(v)
    return basis


def solve_affine(A: MatFq, b: VecFq) -> Solution | None:
    """Solve A x = b.  Returns None when the system is inconsistent."""
    if A.field != b.field:
        raise ValueError("field mismatch")
    if A.rows != len(b):
        raise ValueError(f"dimension mismatch: {A.rows} equations, rhs length {len(b)}")
    field = A.field
    k, m = A.shape
    if k == 0:
        x0 = VecFq.zeros(m, field)
        basis = tuple(VecFq(np.eye(m, dtype=np.int64)[i], field) for i in range(m))
        return Solution(x0, basis)
    aug = np.concatenate([A.data, b.data[:, None]], axis=1)
    R, rank, pivots = rref(aug, field)
    if m in pivots:
        return None
    x0 = np.zeros(m, dtype=np.int64)
    for i, pc in enumerate(pivots):
        x0[pc] = R[i, m]
    basis = _nullspace_from_rref(R, rank, pivots, m, field)
    return Solution(VecFq(x0, field), tuple(VecFq(v, field) for v in basis))


class AffineSolver:
    """Factorises A once, then solves A x = b for many right-hand sides.

    Row reduction of [A | I] yields T with T A = R in echelon form; b is
    consistent iff (T b) vanishes below the rank.
    """

    def __init__(self, A: np.ndarray, field: GF):
        A = np.asarray(A, dtype=np.int64)
        self.field = field
        self.k, self.m = A.shape
        aug = np.concatenate([A, np.eye(self.k, dtype=np.int64)], axis=1)
        R, rank, pivots = rref(aug, field) if self.k else (aug, 0, [])
        pivots = [c for c in pivots if c < self.m]
        self.rank = len(pivots)
        self.pivots = np.array(pivots, dtype=np.int64)
        self.T = R[:, self.m:]
        basis = _nullspace_from_rref(R[:, :self.m], self.rank, pivots, self.m, field)
        self.nullspace = (np.stack(basis) if basis
                          else np.zeros((0, self.m), dtype=np.int64))

    @property
    def nullity(self) -> int:
        return self.m - self.rank

    def solve_many(self, Bs: np.ndarray):
        """For right-hand sides as rows of Bs return (consistent mask, particular solutions)."""
        Bs = np.atleast_2d(np.asarray(Bs, dtype=np.int64))
        if self.k == 0:
            return np.ones(len(Bs), bool), np.zeros((len(Bs), self.m), dtype=np.int64)
        TB = self.field.matmul(Bs, self.T.T)
        ok = ~np.any(TB[:, self.rank:] != 0, axis=1)
        X0 = np.zeros((len(Bs), self.m), dtype=np.int64)
        X0[:, self.pivots] = TB[:, :self.rank]
        return ok, X0


# -- text I/O ------------------------------------------------------------------------

def format_matrix(M: MatFq) -> str:
    """Text form: a header line "rows cols q" then one line per row."""
    lines = [f"{M.rows} {M.cols} {M.field.q}"]
    lines += [" ".join(str(int(x)) for x in row) for row in M.data]
    return "\n".join(lines) + "\n"


def parse_matrices(text: str, field: GF | None = None) -> list[MatFq]:
    """Parse one or more concatenated matrices in the text format."""
    tokens = text.split()
    out = []
    pos = 0
    while pos < len(tokens):
        if pos + 3 > len(tokens):
            raise ValueError("truncated matrix header")
        rows, cols, q = (int(t) for t in tokens[pos:pos + 3])
        pos += 3
        if rows < 0 or cols < 0:
            raise ValueError("negative matrix dimension")
        body = tokens[pos:pos + rows * cols]
        if len(body) != rows * cols:
            raise ValueError(f"expected {rows * cols} entries, found {len(body)}")
        pos += rows * cols
        f = field if field is not None else field_for(q)
        if f.q != q:
            raise ValueError(f"matrix declares q={q} but field has q={f.q}")
        data = np.array([int(t) for t in body], dtype=np.int64).reshape(rows, cols)
        out.append(MatFq(data, f))
    return out


def parse_matrix(text: str, field: GF | None = None) -> MatFq:
    mats = parse_matrices(text, field)
    if len(mats) != 1:
        raise ValueError(f"expected exactly one matrix, found {len(mats)}")
    return mats[0]


def read_matrices(path: str, field: GF | None = None) -> list[MatFq]:
    with open(path) as fh:
        return parse_matrices(fh.read(), field)


def write_matrices(path: str, mats: Sequence[MatFq]) -> None:
    with open(path, "w", newline="\n") as fh:
        for M in mats:
            fh.write(format_matrix(M))
