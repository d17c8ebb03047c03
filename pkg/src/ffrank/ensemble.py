"""Random sensing matrices, low-rank unknowns and noise, with seeded streams.

Every random quantity of a Monte Carlo trial comes from its own generator,
``trial_rng(master_seed, trial_index, role)``, built from a numpy
``SeedSequence`` over ``(master_seed, trial_index, crc32(role))`` feeding PCG64.
Samples therefore depend only on those three values, never on the order in
which trials run or on how many workers run them.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .counting import count_rank_atmost, count_rank_exact
from .field import GF, CapExceeded, field_for
from .matfq import MatFq, VecFq, batch_rank

MAX_FULL_RANK_TRIES = 10**4


def trial_rng(master_seed: int, trial_index: int, role: str) -> np.random.Generator:
    """Independent generator for one (seed, trial, role) triple."""
    if master_seed < 0 or trial_index < 0:
        raise ValueError("seed and trial index must be non-negative")
    ss = np.random.SeedSequence([int(master_seed), int(trial_index), zlib.crc32(role.encode())])
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class EnsembleSpec:
    """Distribution of sensing-matrix entries: uniform, or sparse with density delta."""

    variant: str
    q: int
    delta: float | None = None

    def __post_init__(self):
        field_for(self.q)
        if self.variant == "uniform":
            if self.delta is not None:
                raise ValueError("uniform ensemble takes no delta")
        elif self.variant == "sparse":
            if self.delta is None or not 0 < self.delta <= (self.q - 1) / self.q + 1e-12:
                raise ValueError(f"sparse delta must lie in (0, (q-1)/q], got {self.delta}")
        else:
            raise ValueError(f"unknown ensemble variant {self.variant!r}")

    @classmethod
    def uniform(cls, q: int) -> "EnsembleSpec":
        return cls("uniform", q)

    @classmethod
    def sparse(cls, q: int, delta: float) -> "EnsembleSpec":
        return cls("sparse", q, float(delta))

    @property
    def density(self) -> float:
        """Probability that an entry is nonzero."""
        return (self.q - 1) / self.q if self.delta is None else self.delta

    @property
    def label(self) -> str:
        return self.variant


@dataclass(frozen=True)
class NoiseSpec:
    """Fixed-weight noise (``det``, level sigma) or i.i.d. symbol noise (``iid``, level p)."""

    variant: str
    level: float

    def __post_init__(self):
        if self.variant == "det":
            if self.level <= 0:
                raise ValueError("sigma must be positive")
        elif self.variant == "iid":
            if not 0 < self.level < 0.5:
                raise ValueError("crossover p must lie in (0, 1/2)")
        else:
            raise ValueError(f"unknown noise variant {self.variant!r}")

    @classmethod
    def det_weight(cls, sigma: float) -> "NoiseSpec":
        return cls("det", float(sigma))

    @classmethod
    def iid(cls, p: float) -> "NoiseSpec":
        return cls("iid", float(p))

    def weight(self, n: int) -> int:
        """Noise weight floor(sigma n^2) for the fixed-weight model."""
        return int(math.floor(self.level * n * n + 1e-9))


def _draw_matrix(n: int, spec: EnsembleSpec, rng: np.random.Generator, cols: int | None = None):
    shape = (n, n if cols is None else cols)
    if spec.variant == "uniform":
        return rng.integers(0, spec.q, shape, dtype=np.int64)
    nonzero = rng.random(shape) < spec.delta
    vals = rng.integers(1, spec.q, shape, dtype=np.int64)
    return np.where(nonzero, vals, 0)


def sample_sensing_array(n: int, k: int, spec: EnsembleSpec, rng: np.random.Generator) -> np.ndarray:
    """k sensing matrices as a (k, n, n) array.

    Matrices are drawn one at a time, so the first k' of a k-draw equal a
    k'-draw from the same stream.
    """
    if n < 1 or k < 0:
        raise ValueError("need n >= 1 and k >= 0")
    out = np.zeros((k, n, n), dtype=np.int64)
    for a in range(k):
        out[a] = _draw_matrix(n, spec, rng)
    return out


def sample_sensing(n: int, k: int, spec: EnsembleSpec, rng: np.random.Generator) -> list[MatFq]:
    F = field_for(spec.q)
    return [MatFq(H, F) for H in sample_sensing_array(n, k, spec, rng)]


def _full_rank(n: int, r: int, F: GF, rng: np.random.Generator) -> np.ndarray:
    for _ in range(MAX_FULL_RANK_TRIES):
        U = rng.integers(0, F.q, (n, r), dtype=np.int64)
        if (U.any() if r == 1 else batch_rank(U[None], F)[0] == r):
            return U
    raise CapExceeded("full-rank rejection sampling exceeded its attempt cap")


def randbelow(rng: np.random.Generator, N: int) -> int:
    """Uniform integer in [0, N) for arbitrarily large N."""
    if N <= 0:
        raise ValueError("N must be positive")
    bits = N.bit_length()
    words = (bits + 31) // 32
    while True:
        chunk = rng.integers(0, 1 << 32, words, dtype=np.uint64)
        v = 0
        for w in chunk:
            v = (v << 32) | int(w)
        v &= (1 << bits) - 1
        if v < N:
            return v


def sample_low_rank_array(n: int, r: int, q: int, mode: str, rng: np.random.Generator) -> np.ndarray:
    if not 0 <= r <= n:
        raise ValueError(f"need 0 <= r <= n, got r={r}, n={n}")
    F = field_for(q)
    if mode == "at_most":
        u = randbelow(rng, count_rank_atmost(n, r, q))
        for l in range(r + 1):
            c = count_rank_exact(n, l, q)
            if u < c:
                r = l
                break
            u -= c
    elif mode != "exact":
        raise ValueError(f"unknown mode {mode!r}")
    if r == 0:
        return np.zeros((n, n), dtype=np.int64)
    U = _full_rank(n, r, F, rng)
    V = _full_rank(n, r, F, rng)
    return F.matmul(U, V.T)


def sample_low_rank(n: int, r: int, q: int, mode: str, rng: np.random.Generator) -> MatFq:
    """Uniform matrix of rank exactly r (``exact``) or of rank at most r (``at_most``).

    Exact mode returns U V^T for independent uniform full-rank n x r factors;
    every rank-r matrix has the same number of factorisations, so the law is
    uniform.  At-most mode first picks the rank l with probability
    Phi(n, l) / Psi(n, r).
    """
    return MatFq(sample_low_rank_array(n, r, q, mode, rng), field_for(q))


def sample_noise_array(k: int, n: int, spec: NoiseSpec, q: int, rng: np.random.Generator) -> np.ndarray:
    w = np.zeros(k, dtype=np.int64)
    if spec.variant == "det":
        s = spec.weight(n)
        if s > k:
            raise ValueError(f"noise weight {s} exceeds the number of measurements {k}")
        if s == 0:
            return w
        support = np.sort(rng.choice(k, size=s, replace=False))
        w[support] = rng.integers(1, q, s, dtype=np.int64)
        return w
    hit = rng.random(k) < spec.level
    vals = rng.integers(1, q, k, dtype=np.int64)
    return np.where(hit, vals, 0)


def sample_noise(k: int, n: int, spec: NoiseSpec, q: int, rng: np.random.Generator) -> VecFq:
    """Noise vector of length k under the fixed-weight or i.i.d. model."""
    return VecFq(sample_noise_array(k, n, spec, q, rng), field_for(q))


def measure_array(X: np.ndarray, H: np.ndarray, field: GF, w: np.ndarray | None = None) -> np.ndarray:
    """y_a = <H_a, X> (+ w_a) for a (k, n, n) stack H."""
    k = H.shape[0]
    if H.shape[1:] != X.shape:
        raise ValueError(f"dimension mismatch: H is {H.shape[1:]}, X is {X.shape}")
    y = field.matmul(H.reshape(k, -1), X.reshape(-1, 1))[:, 0] if k else np.zeros(0, np.int64)
    if w is not None:
        if len(w) != k:
            raise ValueError("noise length must equal the number of measurements")
        y = field.add(y, np.asarray(w, dtype=np.int64))
    return y


def measure(X: MatFq, H_list: Sequence[MatFq], w: VecFq | None = None) -> VecFq:
    """Linear measurements of X, optionally corrupted by additive noise w."""
    F = X.field
    for H in H_list:
        if H.field != F:
            raise ValueError("field mismatch")
        if H.shape != X.shape:
            raise ValueError(f"dimension mismatch: H is {H.shape}, X is {X.shape}")
    H = (np.stack([H.data for H in H_list]) if len(H_list)
         else np.zeros((0,) + X.shape, dtype=np.int64))
    if w is not None and w.field != F:
        raise ValueError("field mismatch")
    return VecFq(measure_array(X.data, H, F, None if w is None else w.data), F)
