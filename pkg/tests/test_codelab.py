from fractions import Fraction

import numpy as np
import pytest

from ffrank.codelab import (CodeSpec, code_rate, codeword_array, de_caen_bound,
                            enumerate_codewords, min_rank_distance, ncr_count, pair_event_probs,
                            pairwise_independence_check, rank_spectrum, strong_recovery_check)
from ffrank.ensemble import EnsembleSpec, sample_sensing_array, trial_rng
from ffrank.field import CapExceeded, field_for
from ffrank.matfq import MatFq, all_matrices, batch_rank


def brute_code(H, q):
    """Every n x n matrix orthogonal to all checks, by scanning the whole space."""
    F = field_for(q)
    n = H.shape[1]
    allm = all_matrices(n, n, q)
    inner = F.matmul(allm.reshape(len(allm), -1), H.reshape(len(H), -1).T)
    return allm[np.all(inner == 0, axis=1)]


@pytest.mark.parametrize("q,n,k", [(2, 2, 1), (2, 2, 3), (3, 2, 2), (2, 3, 5), (4, 2, 2)])
def test_codewords_match_brute_force(q, n, k):
    for t in range(5):
        H = sample_sensing_array(n, k, EnsembleSpec.uniform(q), trial_rng(t, k, "code"))
        code = CodeSpec(n, q, H)
        words = codeword_array(code)
        assert not words[0].any()
        assert {w.tobytes() for w in words} == {w.tobytes() for w in brute_code(H, q)}
        assert len(words) == code.size() == q ** code.dimension()
        spec = rank_spectrum(code)
        assert spec.sum() == code.size() and spec[0] == 1
        ranks = np.bincount(batch_rank(brute_code(H, q), field_for(q)), minlength=n + 1)
        assert spec.tolist() == ranks.tolist()
        assert all(ncr_count(code, r) == spec[r] for r in range(n + 1))


def test_min_distance_and_rate():
    # checks pin every entry except the diagonal of a 2 x 2 matrix
    H = np.array([[[0, 1], [0, 0]], [[0, 0], [1, 0]]])
    code = CodeSpec(2, 2, H)
    assert rank_spectrum(code).tolist() == [1, 2, 1]
    assert min_rank_distance(code) == 1
    # keep only multiples of the identity: distance 2
    code2 = CodeSpec(2, 2, np.concatenate([H, [[[1, 0], [0, 1]]]]))
    assert rank_spectrum(code2).tolist() == [1, 0, 1]
    assert min_rank_distance(code2) == 2
    full = CodeSpec(2, 2, np.eye(4, dtype=np.int64).reshape(4, 2, 2))
    with pytest.raises(ValueError):
        min_rank_distance(full)
    assert code_rate(4, 12) == 0.25
    assert len(enumerate_codewords(code)) == 4 and isinstance(enumerate_codewords(code)[0], MatFq)
    with pytest.raises(CapExceeded):
        codeword_array(CodeSpec(5, 2, np.zeros((1, 5, 5), np.int64)))


def test_strong_recovery_check():
    n, q = 3, 2
    H_all = np.eye(9, dtype=np.int64).reshape(9, 3, 3)
    assert strong_recovery_check(H_all, 1, q)
    assert not strong_recovery_check(H_all[:3], 1, q)
    assert strong_recovery_check(list(MatFq(h, field_for(2)) for h in H_all), 1, q)
    with pytest.raises(ValueError):
        strong_recovery_check([], 1, q)


def test_de_caen_bound_validation_and_exactness():
    p = [Fraction(1, 2), Fraction(1, 3)]
    P = [[Fraction(1, 2), Fraction(1, 6)], [Fraction(1, 6), Fraction(1, 3)]]
    val = de_caen_bound(p, P)
    assert val == Fraction(1, 4) / Fraction(2, 3) + Fraction(1, 9) / Fraction(1, 2)
    assert val <= p[0] + p[1] - P[0][1]  # the exact union of two events
    with pytest.raises(ValueError):
        de_caen_bound(p, [[Fraction(1, 2), 0], [Fraction(1, 6), Fraction(1, 3)]])
    with pytest.raises(ValueError):
        de_caen_bound(p, [[Fraction(1, 3), 0], [0, Fraction(1, 3)]])
    assert de_caen_bound([0], [[0]]) == 0


def test_pairwise_independence_exhaustive_and_mc():
    for k in (1, 2):
        rep = pairwise_independence_check(2, 2, k)
        assert rep.holds and rep.events == 15 and rep.pairs == 105
    # over GF(3) a difference and its double give the same event
    rep3 = pairwise_independence_check(2, 3, 1)
    assert not rep3.holds and rep3.holds_for_independent
    assert rep3.proportional_pairs == 40
    assert rep3.proportional_values == (Fraction(1, 3),) and rep3.pair_values == (Fraction(1, 9),)
    X = np.zeros((2, 2), dtype=np.int64)
    Z = np.array([[1, 2], [0, 1]])
    assert pair_event_probs(2, 3, 1, X, Z, 2 * Z % 3) == (Fraction(1, 3), Fraction(1, 3))
    mc = pairwise_independence_check(3, 2, 3, mode="mc", trials=20000, seed=4, n_pairs=30)
    assert mc.holds
    Z = np.array([[1, 0], [0, 0]])
    single, joint = pair_event_probs(2, 2, 1, X, Z, Z)
    assert single == joint == Fraction(1, 2)
    with pytest.raises(CapExceeded):
        pairwise_independence_check(3, 2, 3)
