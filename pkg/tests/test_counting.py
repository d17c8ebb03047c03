import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ffrank.codelab import de_caen_bound
from ffrank.counting import (alpha_converse_noisy, count_rank_atmost, count_rank_exact,
                             critical_alpha, de_caen_lower, encr_bounds, encr_bounds_log,
                             entropy2, entropyq, exponents_reference, g_fun, gaussian_binomial,
                             gv_distance, lemma1_bounds, psi_log_density, reliability_E, theta,
                             theta_oracle, threshold_noiseless, threshold_noisy_det, union_upper)
from ffrank.field import field_for
from ffrank.matfq import all_matrices, batch_rank, batch_rref


@pytest.mark.parametrize("n,q", [(1, 2), (2, 2), (3, 2), (1, 3), (2, 3), (3, 3), (2, 4), (2, 5)])
def test_rank_counts_brute_force(n, q):
    hist = np.bincount(batch_rank(all_matrices(n, n, q), field_for(q)), minlength=n + 1)
    assert hist.tolist() == [count_rank_exact(n, r, q) for r in range(n + 1)]
    assert count_rank_atmost(n, n, q) == q ** (n * n)


@pytest.mark.parametrize("N,q", [(3, 2), (4, 2), (3, 3), (2, 4)])
def test_gaussian_binomial_counts_subspaces(N, q):
    F = field_for(q)
    for r in range(N + 1):
        if r == 0:
            assert gaussian_binomial(N, 0, q) == 1
            continue
        R, rank, _ = batch_rref(all_matrices(r, N, q), F)
        spaces = {M.tobytes() for M in R[rank == r]}
        assert len(spaces) == gaussian_binomial(N, r, q)
    assert gaussian_binomial(N, N + 1, q) == 0


@given(st.integers(1, 7), st.sampled_from([2, 3, 4, 5, 7]), st.data())
@settings(max_examples=80, deadline=None)
def test_phi_factorises_through_subspaces(n, q, data):
    r = data.draw(st.integers(0, n))
    # choose the column space, then a surjection onto it
    surj = 1
    for i in range(r):
        surj *= q**n - q**i
    assert count_rank_exact(n, r, q) == gaussian_binomial(n, r, q) * surj


def test_count_bounds_sandwich_and_reject_rank_zero():
    for n in range(1, 7):
        for q in (2, 3, 4):
            for r in range(1, n + 1):
                phi_lo, phi_hi, psi_lo, psi_hi = lemma1_bounds(n, r, q)
                assert phi_lo <= count_rank_exact(n, r, q) <= phi_hi
                assert psi_lo <= count_rank_atmost(n, r, q) <= psi_hi
    with pytest.raises(ValueError):
        lemma1_bounds(3, 0, 2)
    with pytest.raises(ValueError):
        count_rank_exact(2, 3, 2)


@pytest.mark.parametrize("q", [2, 3, 4, 5, 7, 8, 9])
def test_theta_against_oracle(q):
    for delta in (0.05, 0.5 * (q - 1) / q, (q - 1) / q):
        for d in range(15):
            for k in (1, 3, 7.5):
                assert abs(theta(d, delta, q, k) - theta_oracle(d, delta, q, k)) <= 1e-12


def test_theta_edge_values():
    assert theta(0, 0.3, 3, 5) == 1.0
    assert math.isclose(theta(4, 0.5, 2, 3), 2.0**-3)  # dense: miss probability 1/q
    assert theta(3, 0.2, 5, 0) == 1.0
    with pytest.raises(ValueError):
        theta(1, 0.9, 2, 1)


def test_entropy():
    assert entropy2(0.5) == 1.0 and entropy2(0) == 0.0
    assert math.isclose(entropy2(0.11), entropy2(0.89))
    assert math.isclose(entropyq(0.11, 4), entropy2(0.11) / 2)


def test_noisy_threshold_values():
    assert abs(alpha_converse_noisy(0.05, 0.02, 2) - 0.114) < 0.001
    assert abs(alpha_converse_noisy(0.05, 0.02, 256) - 0.099) < 0.001
    a = critical_alpha(0.02, 0.05, 2)
    assert abs(a - 0.32) < 0.02
    target = 2 * 0.05 * (1 - 0.025)
    assert g_fun(a, 0.02, 0.05, 2) >= target > g_fun(a - 1e-3, 0.02, 0.05, 2)
    assert critical_alpha(0.02, 0.05, 256) < a
    with pytest.raises(ValueError):
        critical_alpha(0.3, 0.4, 2)


def test_noiseless_thresholds():
    assert threshold_noiseless(10, 0.2, 0, "converse").value == pytest.approx(2 * 0.2 * 0.9 * 100)
    assert threshold_noiseless(10, 0.2, 0.1, "achievable").value == pytest.approx(2.1 * 0.2 * 0.9 * 100)
    assert threshold_noiseless(10, 0.2, 0, "strong").value == pytest.approx(4 * 0.2 * 0.8 * 100)
    with pytest.raises(ValueError):
        threshold_noiseless(10, 0.2, 0, "bogus")
    v = threshold_noisy_det(0.05, 0.01, 2)
    assert v > 3 * 0.06 * (1 - 0.02)
    with pytest.raises(ValueError):
        threshold_noisy_det(2.5, 0.6, 2)


def test_exponents():
    assert gv_distance(0.25) == 0.5
    assert reliability_E(0.5, 0.1) == pytest.approx(0.5 - 0.19)
    assert reliability_E(0.9, 0.3) == 0.0
    tab = exponents_reference(0.5, 0.05)
    assert tab.E1_gab == math.inf and tab.E2_rsmr == pytest.approx(0.5 - 0.0975)


def test_expected_codeword_counts_inside_bounds():
    # a fixed nonzero matrix lies in a uniform random code with probability q^-k
    for q in (2, 3):
        for n in range(2, 6):
            for r in range(1, n + 1):
                for k in (0, n, n * n):
                    exact = count_rank_exact(n, r, q) * Fraction(1, q**k)
                    lo, hi = encr_bounds(n, r, q, k)
                    assert lo <= exact <= hi
                    llo, lhi = encr_bounds_log(n, r, q, k)
                    assert math.isclose(q**llo, float(lo)) and math.isclose(q**lhi, float(hi))


def test_reliability_bounds():
    assert union_upper(4, 1, 2, 16) == Fraction(1, 128)
    assert float(de_caen_lower(4, 1, 2, 16)) == pytest.approx(0.0019228, rel=1e-4)
    # de Caen's bound with the exact pairwise-independent probabilities dominates
    for n, r, q, k in [(4, 1, 2, 16), (3, 1, 3, 6), (4, 2, 2, 14)]:
        M = count_rank_atmost(n, r, q) - 1
        x = Fraction(1, q**k)
        exact = M * x / (1 + (M - 1) * x)
        assert de_caen_lower(n, r, q, k) <= exact <= min(1, union_upper(n, r, q, k))
    small = [Fraction(1, 4)] * 3
    pairs = [[Fraction(1, 4) if i == j else Fraction(1, 16) for j in range(3)] for i in range(3)]
    assert de_caen_bound(small, pairs) == 3 * Fraction(1, 16) / (Fraction(1, 4) + Fraction(2, 16))


def test_psi_log_density():
    assert psi_log_density(3, 3, 2) == pytest.approx(1.0)
