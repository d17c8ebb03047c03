"""Seeded Monte Carlo campaigns.

Each trial draws its randomness from ``trial_rng(seed, trial, role)``, and the
trials are mapped in index order (optionally across worker processes), so the
CSV output is a function of the configuration alone.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.stats import beta

from .codelab import CodeSpec, rank_spectrum
from .counting import (alpha_converse_noisy, count_rank_atmost, critical_alpha, de_caen_lower,
                       encr_bounds, threshold_noisy_det, union_upper)
from .decoder import Status, class_rep_batches, minrank_noisy, minrank_oracle, minrank_reduced
from .ensemble import (EnsembleSpec, NoiseSpec, measure_array, sample_low_rank_array,
                       sample_noise_array, sample_sensing_array, trial_rng)
from .field import CapExceeded, field_for
from .matfq import all_matrices, batch_rank

SWEEP_HEADER = ["n", "q", "r", "k", "ensemble", "delta", "noise", "p_or_sigma", "lambda",
                "trials", "successes", "ambiguous", "wrong", "ci_lo", "ci_hi", "seed"]
DISTANCE_HEADER = ["n", "q", "k", "r", "mean_ncr", "var_ncr", "bound_lo", "bound_hi",
                   "trials", "seed"]
STRONG_HEADER = ["n", "q", "r", "k", "trials", "passes", "pass_rate", "ci_lo", "ci_hi", "seed"]
RELIABILITY_HEADER = ["n", "q", "r", "k", "trials", "errors", "p_hat", "ci_lo", "ci_hi",
                      "decaen_lower", "union_upper", "seed"]


def fmt(x) -> str:
    """Stable text form for CSV cells."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".10g")


def clopper_pearson(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Exact two-sided binomial confidence interval."""
    if trials <= 0:
        return 0.0, 1.0
    a = 1 - level
    lo = 0.0 if successes == 0 else float(beta.ppf(a / 2, successes, trials - successes + 1))
    hi = 1.0 if successes == trials else float(beta.ppf(1 - a / 2, successes + 1, trials - successes))
    return lo, hi


def write_csv(header: Sequence[str], rows: Iterable[Sequence], fh=None) -> str:
    """Write rows as LF-terminated CSV to fh (if given) and return the text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def parallel_map(fn: Callable, items: Sequence, jobs: int = 1) -> list:
    """Ordered map, in-process for jobs <= 1, else over a process pool."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items, chunksize=chunk))


# -- weak-recovery sweeps ------------------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    n: int
    q: int
    r: int
    k_grid: tuple
    trials: int
    master_seed: int
    ensemble: EnsembleSpec | None = None
    noise: NoiseSpec | None = None
    lam: float | None = None
    max_noise_weight: int = 3
    x_mode: str = "exact"
    decoder: str = "reduced"
    strategy: str = "auto"

    def __post_init__(self):
        field_for(self.q)
        object.__setattr__(self, "k_grid", tuple(sorted({int(k) for k in self.k_grid})))
        if self.ensemble is None:
            object.__setattr__(self, "ensemble", EnsembleSpec.uniform(self.q))
        if self.ensemble.q != self.q:
            raise ValueError("ensemble field size differs from q")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0 <= self.r <= self.n:
            raise ValueError(f"need 0 <= r <= n, got r={self.r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.k_grid or self.k_grid[0] < 0 or self.k_grid[-1] > self.n * self.n:
            raise ValueError("k_grid must be non-empty and inside [0, n^2]")
        if self.master_seed < 0:
            raise ValueError("seed must be non-negative")
        if self.decoder not in ("reduced", "oracle"):
            raise ValueError(f"unknown decoder {self.decoder!r}")
        if self.noise is not None and self.lam is None:
            object.__setattr__(self, "lam", 1.0 / self.n)
        if self.lam is not None and self.lam <= 0:
            raise ValueError("lambda must be positive")
        if self.noise is not None and self.noise.variant == "det":
            s = self.noise.weight(self.n)
            if s > self.k_grid[0]:
                raise ValueError(f"noise weight {s} exceeds the smallest k")


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    k: int
    outcome: str  # success | ambiguous | wrong_unique | infeasible
    achieved_rank: int | None
    wall_time: float = 0.0


@dataclass
class SweepResult:
    config: SweepConfig
    records: list
    overlays: dict = field(default_factory=dict)

    def counts(self, k: int) -> dict:
        c = {"success": 0, "ambiguous": 0, "wrong_unique": 0, "infeasible": 0}
        for rec in self.records:
            if rec.k == k:
                c[rec.outcome] += 1
        return c

    def success_rate(self, k: int) -> float:
        return self.counts(k)["success"] / self.config.trials

    def outcomes(self, k: int) -> list[str]:
        return [rec.outcome for rec in sorted(self.records, key=lambda r: r.trial_index) if rec.k == k]

    def rows(self) -> list[list]:
        cfg = self.config
        ens = cfg.ensemble
        out = []
        for k in cfg.k_grid:
            c = self.counts(k)
            lo, hi = clopper_pearson(c["success"], cfg.trials)
            out.append([cfg.n, cfg.q, cfg.r, k, ens.variant, ens.delta,
                        "none" if cfg.noise is None else cfg.noise.variant,
                        None if cfg.noise is None else cfg.noise.level, cfg.lam,
                        cfg.trials, c["success"], c["ambiguous"],
                        c["wrong_unique"] + c["infeasible"], lo, hi, cfg.master_seed])
        return out

    def to_csv(self, fh=None) -> str:
        return write_csv(SWEEP_HEADER, self.rows(), fh)


def _classify(out, X: np.ndarray, w: np.ndarray | None) -> str:
    if out.status is Status.AMBIGUOUS:
        return "ambiguous"
    if out.status is Status.INFEASIBLE:
        return "infeasible"
    ok = np.array_equal(out.X_star.data, X)
    if w is not None:
        ok = ok and out.w_star is not None and np.array_equal(out.w_star.data, w)
    return "success" if ok else "wrong_unique"


def _sweep_trial(cfg: SweepConfig, h_role: str, i: int) -> list[TrialRecord]:
    F = field_for(cfg.q)
    seed = cfg.master_seed
    X = sample_low_rank_array(cfg.n, cfg.r, cfg.q, cfg.x_mode, trial_rng(seed, i, "X"))
    H = sample_sensing_array(cfg.n, cfg.k_grid[-1], cfg.ensemble, trial_rng(seed, i, h_role))
    recs = []
    for k in cfg.k_grid:
        t0 = time.perf_counter()
        Hk = H[:k]
        w = None
        if cfg.noise is not None:
            w = sample_noise_array(k, cfg.n, cfg.noise, cfg.q, trial_rng(seed, i, f"w:{k}"))
        y = measure_array(X, Hk, F, w)
        if cfg.noise is not None:
            out = minrank_noisy(y, Hk, F, cfg.lam, cfg.max_noise_weight, cfg.strategy)
        elif cfg.decoder == "oracle":
            out = minrank_oracle(y, Hk, F)
        else:
            out = minrank_reduced(y, Hk, F)
        recs.append(TrialRecord(i, k, _classify(out, X, w), out.achieved_rank,
                                time.perf_counter() - t0))
    return recs


def _run(cfg: SweepConfig, h_role: str, jobs: int) -> SweepResult:
    per_trial = parallel_map(partial(_sweep_trial, cfg, h_role), range(cfg.trials), jobs)
    records = [rec for recs in per_trial for rec in recs]
    records.sort(key=lambda r: (r.k, r.trial_index))
    return SweepResult(cfg, records)


def sensing_role(ens: EnsembleSpec) -> str:
    """Stream name for sensing draws; dense runs share the plain "H" stream."""
    return "H" if ens.variant == "uniform" else f"H:sparse:{ens.delta:.12g}"


def run_weak_sweep(cfg: SweepConfig, jobs: int = 1) -> SweepResult:
    """Empirical recovery rate of the min-rank decoder on each k in the grid.

    Sensing matrices of one trial are a single nested sequence, so the k-th
    prefix is shared across the grid and success is coupled in k.
    """
    if cfg.noise is not None:
        raise ValueError("use run_noisy_sweep for noisy configurations")
    return _run(cfg, sensing_role(cfg.ensemble), jobs)


@dataclass
class PairedResult:
    results: list

    def to_csv(self, fh=None) -> str:
        return write_csv(SWEEP_HEADER, [row for res in self.results for row in res.rows()], fh)

    def by_delta(self, delta: float | None) -> SweepResult:
        for res in self.results:
            if res.config.ensemble.delta == delta:
                return res
        raise KeyError(delta)


def run_sparse_compare(cfg: SweepConfig, deltas: Sequence[float], include_dense: bool = True,
                       jobs: int = 1) -> PairedResult:
    """Run the same trials (same X stream) under the dense ensemble and under
    sparse ensembles with each density in ``deltas``."""
    results = []
    if include_dense:
        results.append(run_weak_sweep(replace(cfg, ensemble=EnsembleSpec.uniform(cfg.q)), jobs))
    for d in deltas:
        results.append(run_weak_sweep(replace(cfg, ensemble=EnsembleSpec.sparse(cfg.q, d)), jobs))
    return PairedResult(results)


def noisy_overlays(cfg: SweepConfig) -> dict:
    """Threshold markers (as measurement counts k) for a noisy sweep."""
    gamma = cfg.r / cfg.n
    n2 = cfg.n * cfg.n
    out = {}
    if cfg.noise is None:
        return out
    try:
        if cfg.noise.variant == "det":
            out["k_noisy_det"] = threshold_noisy_det(gamma, cfg.noise.level, cfg.q) * n2
        else:
            out["k_converse"] = alpha_converse_noisy(gamma, cfg.noise.level, cfg.q) * n2
            out["k_achievable"] = critical_alpha(cfg.noise.level, gamma, cfg.q) * n2
    except ValueError:
        pass
    return out


def run_noisy_sweep(cfg: SweepConfig, jobs: int = 1) -> SweepResult:
    """Joint recovery rate of (X, w) under the regularised decoder (lam = 1/n by default)."""
    if cfg.noise is None:
        raise ValueError("noisy sweep needs a noise model")
    res = _run(cfg, sensing_role(cfg.ensemble), jobs)
    res.overlays = noisy_overlays(cfg)
    return res


# -- distance spectrum ---------------------------------------------------------------------------

@dataclass
class DistanceProfile:
    n: int
    q: int
    k: int
    trials: int
    seed: int
    ensemble: EnsembleSpec
    spectra: np.ndarray  # (trials, n+1)

    @property
    def mean(self) -> np.ndarray:
        return self.spectra.mean(axis=0)

    @property
    def var(self) -> np.ndarray:
        ddof = 1 if self.trials > 1 else 0
        return self.spectra.var(axis=0, ddof=ddof)

    @property
    def min_distances(self) -> list:
        out = []
        for s in self.spectra:
            nz = np.flatnonzero(s[1:])
            out.append(int(nz[0]) + 1 if len(nz) else None)
        return out

    @property
    def rate(self) -> float:
        return 1 - self.k / (self.n * self.n)

    def rows(self) -> list[list]:
        rows = []
        for r in range(self.n + 1):
            if r == 0:
                lo = hi = 1.0
            else:
                b = encr_bounds(self.n, r, self.q, self.k)
                lo, hi = float(b[0]), float(b[1])
            rows.append([self.n, self.q, self.k, r, self.mean[r], self.var[r], lo, hi,
                         self.trials, self.seed])
        return rows

    def to_csv(self, fh=None) -> str:
        return write_csv(DISTANCE_HEADER, self.rows(), fh)


def _spectrum_trial(n: int, q: int, k: int, ens: EnsembleSpec, seed: int, i: int) -> np.ndarray:
    H = sample_sensing_array(n, k, ens, trial_rng(seed, i, sensing_role(ens)))
    return rank_spectrum(CodeSpec(n, q, H))


def run_distance_profile(n: int, q: int, k: int, ensemble: EnsembleSpec | None, trials: int,
                         seed: int, jobs: int = 1) -> DistanceProfile:
    """Rank spectra N_C(r) of random codes with k parity checks."""
    ens = ensemble or EnsembleSpec.uniform(q)
    if not 0 <= k <= n * n:
        raise ValueError("k must lie in [0, n^2]")
    spectra = parallel_map(partial(_spectrum_trial, n, q, k, ens, seed), range(trials), jobs)
    return DistanceProfile(n, q, k, trials, seed, ens, np.stack(spectra))


def run_strong_recovery(n: int, r: int, q: int, k: int, trials: int, seed: int,
                        ensemble: EnsembleSpec | None = None, jobs: int = 1) -> tuple[int, int]:
    """(passes, trials): how often a random code has no nonzero word of rank <= 2r."""
    if not 1 <= r <= n:
        raise ValueError("need 1 <= r <= n")
    prof = run_distance_profile(n, q, k, ensemble, trials, seed, jobs)
    passes = int(np.sum(prof.spectra[:, 1:2 * r + 1].sum(axis=1) == 0))
    return passes, trials


def strong_recovery_csv(n: int, r: int, q: int, k: int, trials: int, seed: int, passes: int,
                        fh=None) -> str:
    lo, hi = clopper_pearson(passes, trials)
    return write_csv(STRONG_HEADER, [[n, q, r, k, trials, passes, passes / trials, lo, hi, seed]], fh)


# -- reliability ---------------------------------------------------------------------------------

def enumerate_rank_at_most(n: int, r: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    """All n x n matrices of rank <= r with their ranks, zero matrix first.

    A rank-l matrix is U V^T with U one basis per column space and V any
    full-rank n x l matrix, which lists each matrix exactly once.
    """
    F = field_for(q)
    mats = [np.zeros((1, n, n), dtype=np.int64)]
    ranks = [np.zeros(1, dtype=np.int64)]
    for l in range(1, r + 1):
        V = all_matrices(n, l, q)
        V = V[batch_rank(V, F) == l]
        for U in class_rep_batches(n, l, q):
            X = F.matmul(U[:, None], np.swapaxes(V, 1, 2)[None])
            mats.append(X.reshape(-1, n, n))
            ranks.append(np.full(len(U) * len(V), l, dtype=np.int64))
    return np.concatenate(mats), np.concatenate(ranks)


@dataclass
class ReliabilityResult:
    n: int
    q: int
    r: int
    k: int
    trials: int
    errors: int
    seed: int

    @property
    def p_hat(self) -> float:
        return self.errors / self.trials

    @property
    def ci(self) -> tuple[float, float]:
        return clopper_pearson(self.errors, self.trials)

    @property
    def decaen_lower(self) -> float:
        return float(de_caen_lower(self.n, self.r, self.q, self.k))

    @property
    def union_upper(self) -> float:
        return float(union_upper(self.n, self.r, self.q, self.k))

    def rows(self) -> list[list]:
        lo, hi = self.ci
        return [[self.n, self.q, self.r, self.k, self.trials, self.errors, self.p_hat, lo, hi,
                 self.decaen_lower, self.union_upper, self.seed]]

    def to_csv(self, fh=None) -> str:
        return write_csv(RELIABILITY_HEADER, self.rows(), fh)


RELIABILITY_BLOCK = 1000


def _reliability_block(n: int, r: int, q: int, k: int, seed: int, x_mode: str,
                       ens: EnsembleSpec, bounds: tuple[int, int]) -> int:
    F = field_for(q)
    cands, cranks = enumerate_rank_at_most(n, r, q)
    flat = cands.reshape(len(cands), -1)
    start, stop = bounds
    T = stop - start
    Xs = np.empty((T, n * n), dtype=np.int64)
    Hs = np.empty((T, k, n * n), dtype=np.int64)
    for t, i in enumerate(range(start, stop)):
        Xs[t] = sample_low_rank_array(n, r, q, x_mode, trial_rng(seed, i, "X")).reshape(-1)
        Hs[t] = sample_sensing_array(n, k, ens, trial_rng(seed, i, sensing_role(ens))).reshape(k, n * n)
    xr = batch_rank(Xs.reshape(T, n, n), F)
    y = np.einsum("tkm,tm->tk", Hs, Xs) % q if F.is_prime_field else np.stack(
        [F.matmul(Hs[t], Xs[t][:, None])[:, 0] for t in range(T)])
    meas = F.matmul(Hs.reshape(T * k, n * n), flat.T).reshape(T, k, len(flat))
    feasible = np.all(meas == y[:, :, None], axis=1) & (cranks[None, :] <= xr[:, None])
    # X itself is always feasible; any second feasible candidate is an error
    return int(np.sum(feasible.sum(axis=1) >= 2))


def run_reliability_probe(n: int, r: int, q: int, k: int, trials: int, seed: int,
                          jobs: int = 1, x_mode: str = "exact",
                          ensemble: EnsembleSpec | None = None) -> ReliabilityResult:
    """Empirical min-rank error probability, detected by listing every Z != X
    of rank <= rank(X) that satisfies all k constraints."""
    if not 1 <= r <= n:
        raise ValueError("need 1 <= r <= n")
    if count_rank_atmost(n, r, q) > 1 << 20:
        raise CapExceeded("too many low-rank candidates to enumerate")
    ens = ensemble or EnsembleSpec.uniform(q)
    blocks = [(s, min(s + RELIABILITY_BLOCK, trials)) for s in range(0, trials, RELIABILITY_BLOCK)]
    errs = parallel_map(partial(_reliability_block, n, r, q, k, seed, x_mode, ens), blocks, jobs)
    return ReliabilityResult(n, q, r, k, trials, int(sum(errs)), seed)
