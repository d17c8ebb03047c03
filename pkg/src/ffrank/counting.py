"""Closed-form quantities: rank counts, collision probabilities, entropies,
measurement thresholds, error exponents and moment bounds.

Exact counts use Python integers; bounds that can fall below one are returned
as :class:`fractions.Fraction` so comparisons against exact counts are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .field import CapExceeded, field_for


# -- rank counting ---------------------------------------------------------------

def _check_nr(n: int, r: int) -> None:
    if n < 0 or r < 0:
        raise ValueError("n and r must be non-negative")
    if r > n:
        raise ValueError(f"rank r={r} exceeds n={n}")


@lru_cache(maxsize=None)
def count_rank_exact(n: int, r: int, q: int) -> int:
    """Number of n x n matrices over GF(q) with rank exactly r."""
    _check_nr(n, r)
    num, den = 1, 1
    for i in range(r):
        num *= (q**n - q**i) ** 2
        den *= q**r - q**i
    return num // den


@lru_cache(maxsize=None)
def count_rank_atmost(n: int, r: int, q: int) -> int:
    """Number of n x n matrices over GF(q) with rank at most r."""
    _check_nr(n, r)
    return sum(count_rank_exact(n, l, q) for l in range(r + 1))


def _qpow(q: int, e: int) -> Fraction:
    return Fraction(q) ** e


def lemma1_bounds(n: int, r: int, q: int) -> tuple[Fraction, Fraction, Fraction, Fraction]:
    """(Phi_lo, Phi_hi, Psi_lo, Psi_hi) sandwiching the rank-r and rank<=r counts."""
    _check_nr(n, r)
    if r == 0:
        raise ValueError("the counting bounds are stated for r >= 1 only")
    phi_lo = _qpow(q, (2 * n - 2) * r - r * r)
    hi = 4 * _qpow(q, 2 * n * r - r * r)
    psi_lo = _qpow(q, 2 * n * r - r * r)
    return phi_lo, hi, psi_lo, hi


def gaussian_binomial(N: int, r: int, q: int) -> int:
    """Number of r-dimensional subspaces of GF(q)^N."""
    if r < 0 or r > N:
        return 0
    num, den = 1, 1
    for i in range(r):
        num *= q ** (N - i) - 1
        den *= q ** (i + 1) - 1
    return num // den


# -- collision probability for sparse sensing ------------------------------------------

def _check_delta(delta: float, q: int) -> None:
    if not 0.0 <= delta <= (q - 1) / q + 1e-15:
        raise ValueError(f"delta={delta} outside [0, (q-1)/q]")


def theta(d: int, delta: float, q: int, k: float) -> float:
    """Probability that k independent sparse measurements all miss a difference
    matrix of Hamming weight d."""
    if d < 0:
        raise ValueError("d must be non-negative")
    _check_delta(delta, q)
    if k < 0:
        raise ValueError("k must be non-negative")
    qi = 1.0 / q
    inner = 1.0 - delta / (1.0 - qi)
    return (qi + (1.0 - qi) * inner**d) ** k


def theta_oracle(d: int, delta: float, q: int, k: float) -> float:
    """Same quantity by repeated convolution over the additive group of GF(q).

    Each term h*x with x fixed nonzero and h sparse is zero with probability
    1 - delta and otherwise uniform on the nonzero symbols.  The distribution of
    the sum of d such terms is built one convolution at a time.
    """
    if d < 0:
        raise ValueError("d must be non-negative")
    if d > 10**4:
        raise CapExceeded("d too large for the convolution oracle")
    _check_delta(delta, q)
    F = field_for(q)
    elems = np.arange(q)
    add = F.add(elems[:, None], elems[None, :])
    step = np.full(q, delta / (q - 1))
    step[0] = 1.0 - delta
    pmf = np.zeros(q)
    pmf[0] = 1.0
    for _ in range(d):
        new = np.zeros(q)
        for b in range(q):
            if step[b]:
                np.add.at(new, add[:, b], pmf * step[b])
        pmf = new
    return float(pmf[0]) ** k


# -- entropies ------------------------------------------------------------------------

def entropy2(p: float) -> float:
    """Binary entropy in bits."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def entropyq(p: float, q: int) -> float:
    """Binary entropy measured in base-q units."""
    return entropy2(p) / math.log2(q)


# -- thresholds -----------------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdReport:
    kind: str
    value: float
    params: dict = field(default_factory=dict)


def _check_unit(name: str, v: float) -> None:
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"{name}={v} outside [0, 1]")


def threshold_noiseless(n: int, gamma: float, eps: float, kind: str) -> ThresholdReport:
    """Measurement count for the noiseless converse, achievability or strong recovery."""
    _check_unit("gamma", gamma)
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if kind == "converse":
        v = (2 - eps) * gamma * (1 - gamma / 2) * n * n
    elif kind == "achievable":
        v = (2 + eps) * gamma * (1 - gamma / 2) * n * n
    elif kind == "strong":
        v = (4 + eps) * gamma * (1 - gamma) * n * n
    else:
        raise ValueError(f"unknown threshold kind {kind!r}")
    return ThresholdReport(kind, max(v, 0.0), {"n": n, "gamma": gamma, "eps": eps})


def threshold_noisy_det(gamma: float, sigma: float, q: int, eps: float = 0.0) -> float:
    """k / n^2 sufficient for the regularised decoder under fixed-weight noise."""
    t = gamma + sigma
    if not 0 <= t < 3:
        raise ValueError("gamma + sigma must lie in [0, 3)")
    denom = 1 - entropy2(1 / (3 - t)) / math.log2(q)
    if denom <= 0:
        raise ValueError(f"infeasible: q={q} too small for gamma+sigma={t}")
    return (3 + eps) * t * (1 - t / 3) / denom


def alpha_converse_noisy(gamma: float, p: float, q: int) -> float:
    """Scaling k / n^2 below which recovery fails under i.i.d. symbol noise."""
    _check_unit("gamma", gamma)
    if not 0 <= p < 0.5:
        raise ValueError("p must lie in [0, 1/2)")
    hq = entropyq(p, q)
    if hq >= 1:
        raise ValueError("H_q(p) >= 1")
    return 2 * gamma * (1 - gamma / 2) / (1 - hq)


def g_fun(alpha: float, p: float, gamma: float, q: int) -> float:
    """Achievability exponent for i.i.d. noise as a function of the scaling alpha."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    arg = p + gamma / alpha
    if arg > 1 + 1e-12:
        raise ValueError("entropy argument p + gamma/alpha exceeds 1")
    h = entropy2(min(arg, 1.0))
    return alpha * (1 - h / math.log2(q) - 2 * p * (1 - gamma)) + alpha**2 * p**2


def critical_alpha(p: float, gamma: float, q: int, eps: float = 0.0,
                   step: float = 1e-4, tol: float = 1e-6) -> float:
    """Smallest alpha in (gamma/(1-p), 1] with g(alpha) >= (2+eps) gamma (1-gamma/2).

    A grid scan finds the first satisfying point, then bisection against the
    preceding grid point sharpens it.
    """
    target = (2 + eps) * gamma * (1 - gamma / 2)
    lo = gamma / (1 - p)

    def ok(a: float) -> bool:
        return g_fun(a, p, gamma, q) >= target

    n_steps = int(math.floor((1.0 - lo) / step))
    prev = lo
    for i in range(1, n_steps + 2):
        a = min(lo + i * step, 1.0)
        if ok(a):
            left, right = prev, a
            while right - left > tol:
                mid = 0.5 * (left + right)
                if ok(mid):
                    right = mid
                else:
                    left = mid
            return right
        prev = a
        if a >= 1.0:
            break
    raise ValueError("infeasible: no alpha <= 1 satisfies the achievability inequality")


# -- exponents and distances ----------------------------------------------------------

def reliability_E(R: float, gamma_t: float) -> float:
    """Error exponent (normalised by n^2) of the min-rank decoder at rate R."""
    _check_unit("R", R)
    _check_unit("gamma", gamma_t)
    return max((1 - R) - 2 * gamma_t * (1 - gamma_t / 2), 0.0)


@dataclass(frozen=True)
class ExponentTable:
    E1_gab: float
    E2_gab: float
    E1_et: float
    E2_et: float
    E1_gabet: float
    E2_gabet: float
    E1_rsmr: float
    E2_rsmr: float


def exponents_reference(R: float, gamma: float) -> ExponentTable:
    """Exponents of Gabidulin decoding, error trapping, their combination, and
    random sensing with min-rank decoding."""
    _check_unit("R", R)
    _check_unit("gamma", gamma)
    inf = math.inf
    gab = inf if R <= 1 - 2 * gamma else 0.0
    et = max(1 - gamma - math.sqrt(R), 0.0)
    gabet = max(1 - gamma - R / (1 - gamma), 0.0) if gamma < 1 else 0.0
    rsmr1 = inf if R <= (1 - gamma) ** 2 else 0.0
    return ExponentTable(gab, gab, et, 0.0, gabet, 0.0, rsmr1, reliability_E(R, gamma))


def gv_distance(R: float) -> float:
    """Typical relative minimum rank distance of a random code of rate R."""
    _check_unit("R", R)
    return 1 - math.sqrt(R)


def encr_bounds(n: int, r: int, q: int, k: int) -> tuple[Fraction, Fraction]:
    """Lower and upper bounds on the expected number of rank-r codewords."""
    _check_nr(n, r)
    if r == 0:
        raise ValueError("r = 0 has exactly one codeword; no bound needed")
    if k < 0:
        raise ValueError("k must be non-negative")
    return (_qpow(q, -k + 2 * r * n - r * r - 2 * r),
            4 * _qpow(q, -k + 2 * r * n - r * r))


def encr_bounds_log(n: int, r: int, q: int, k: int) -> tuple[float, float]:
    """log_q of :func:`encr_bounds`, safe for large exponents."""
    _check_nr(n, r)
    if r == 0:
        raise ValueError("r = 0 has exactly one codeword; no bound needed")
    lo = -k + 2 * r * n - r * r - 2 * r
    return float(lo), -k + 2 * r * n - r * r + math.log(4, q)


def union_upper(n: int, r: int, q: int, k: int) -> Fraction:
    """Union bound 4 q^(2nr - r^2 - k) on the min-rank error probability."""
    return 4 * _qpow(q, 2 * n * r - r * r - k)


def de_caen_lower(n: int, r: int, q: int, k: int) -> Fraction:
    """de Caen lower expression (q^(2nr-r^2) - 1) q^-k / (1 + 4 q^(2nr-r^2-k))."""
    e = 2 * n * r - r * r
    return (_qpow(q, e) - 1) * _qpow(q, -k) / (1 + 4 * _qpow(q, e - k))


def psi_log_density(n: int, r: int, q: int) -> float:
    """(1/n^2) log_q of the number of matrices of rank at most r."""
    return math.log(count_rank_atmost(n, r, q)) / (n * n * math.log(q))
