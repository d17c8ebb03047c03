import csv
import io
import math
from dataclasses import replace

import numpy as np
import pytest

from ffrank.counting import count_rank_atmost
from ffrank.ensemble import EnsembleSpec, NoiseSpec
from ffrank.experiments import (DISTANCE_HEADER, RELIABILITY_HEADER, SWEEP_HEADER, SweepConfig,
                                clopper_pearson, enumerate_rank_at_most, noisy_overlays,
                                run_distance_profile, run_noisy_sweep, run_reliability_probe,
                                run_sparse_compare, run_strong_recovery, run_weak_sweep)
from ffrank.field import field_for
from ffrank.matfq import batch_rank


def parse(text):
    return list(csv.reader(io.StringIO(text)))


def test_clopper_pearson():
    lo, hi = clopper_pearson(0, 10)
    assert lo == 0 and math.isclose(hi, 1 - 0.025 ** (1 / 10))
    lo, hi = clopper_pearson(10, 10)
    assert hi == 1 and math.isclose(lo, 0.025 ** (1 / 10))
    lo, hi = clopper_pearson(30, 100)
    assert lo < 0.3 < hi


def test_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(3, 2, 4, (3,), 5, 0)
    with pytest.raises(ValueError):
        SweepConfig(3, 2, 1, (10,), 5, 0)
    with pytest.raises(ValueError):
        SweepConfig(3, 2, 1, (3,), 0, 0)
    with pytest.raises(ValueError):
        SweepConfig(3, 2, 1, (3,), 5, 0, ensemble=EnsembleSpec.uniform(3))
    cfg = SweepConfig(3, 2, 1, [6, 3, 6], 5, 0)
    assert cfg.k_grid == (3, 6)
    assert SweepConfig(3, 2, 1, (3,), 1, 0, noise=NoiseSpec.iid(0.1)).lam == pytest.approx(1 / 3)


def test_weak_sweep_schema_monotone_and_deterministic():
    cfg = SweepConfig(3, 2, 1, (0, 2, 4, 6, 9), 60, 7)
    res = run_weak_sweep(cfg)
    rows = parse(res.to_csv())
    assert rows[0] == SWEEP_HEADER and len(rows) == 6
    succ = [res.counts(k)["success"] for k in cfg.k_grid]
    # nested sensing streams: a trial that succeeds at k also succeeds at every larger k
    by_trial = {}
    for rec in res.records:
        by_trial.setdefault(rec.trial_index, []).append(rec.outcome == "success")
    assert all(s == sorted(s) for s in by_trial.values())
    assert succ == sorted(succ) and succ[-1] >= 50 and succ[0] == 0
    assert res.to_csv() == run_weak_sweep(cfg, jobs=2).to_csv()
    assert all(c["success"] + c["ambiguous"] + c["wrong_unique"] + c["infeasible"] == 60
               for c in map(res.counts, cfg.k_grid))


def test_full_measurements_recover():
    res = run_weak_sweep(SweepConfig(3, 3, 2, (9,), 100, 3))
    # success needs the 9 checks to span, probability prod(1 - 3^-i) ~ 0.56
    assert res.success_rate(9) >= 0.4


def test_square_measurements_recover_binary_rank_one():
    res = run_weak_sweep(SweepConfig(6, 2, 1, (36,), 100, 5))
    assert res.success_rate(36) >= 0.99


def test_empirical_exponent_grows_with_k():
    # -(1/n^2) log_q P(E) should increase with the number of measurements
    exps = []
    for k in (3, 5, 7, 9):
        p = run_reliability_probe(3, 1, 2, k, 4000, 1).p_hat
        exps.append(-math.log2(p) / 9)
    assert all(a < b for a, b in zip(exps, exps[1:]))


def test_oracle_decoder_option_agrees():
    cfg = SweepConfig(2, 3, 1, (2, 3, 4), 30, 5)
    a = run_weak_sweep(cfg)
    b = run_weak_sweep(replace(cfg, decoder="oracle"))
    assert [r.outcome for r in a.records] == [r.outcome for r in b.records]


def test_sparse_compare_pairs_trials():
    cfg = SweepConfig(3, 2, 1, (5, 8), 40, 2)
    res = run_sparse_compare(cfg, [0.5, 1 / 9])
    assert len(res.results) == 3
    dense = res.by_delta(None)
    same_law = res.by_delta(0.5)
    # same X stream across arms
    assert parse(res.to_csv())[0] == SWEEP_HEADER and len(parse(res.to_csv())) == 7
    assert abs(dense.success_rate(8) - same_law.success_rate(8)) <= 0.35
    assert res.by_delta(1 / 9).success_rate(8) <= dense.success_rate(8)


def test_noisy_sweep_reduces_to_noiseless_when_weight_rounds_to_zero():
    # with lam > n any nonzero noise costs more than every rank, so the
    # regularised decoder coincides with the min-rank decoder
    base = SweepConfig(3, 2, 1, (4, 7), 30, 4)
    noisy = replace(base, noise=NoiseSpec.det_weight(0.01), lam=4, max_noise_weight=7)
    a, b = run_weak_sweep(base), run_noisy_sweep(noisy)
    assert [r.outcome for r in a.records] == [r.outcome for r in b.records]
    assert "k_noisy_det" in b.overlays


def test_noisy_overlays_values():
    cfg = SweepConfig(20, 2, 1, (10,), 1, 0, noise=NoiseSpec.iid(0.02))
    ov = noisy_overlays(cfg)
    assert ov["k_converse"] == pytest.approx(0.1136 * 400, rel=1e-3)
    assert ov["k_achievable"] == pytest.approx(0.327 * 400, rel=1e-2)


def test_enumerate_rank_at_most():
    for n, r, q in [(3, 1, 2), (3, 2, 2), (2, 1, 3), (2, 2, 4)]:
        mats, ranks = enumerate_rank_at_most(n, r, q)
        assert len(mats) == count_rank_atmost(n, r, q)
        assert len({m.tobytes() for m in mats}) == len(mats)
        assert np.array_equal(batch_rank(mats, field_for(q)), ranks)


def test_reliability_probe():
    res = run_reliability_probe(3, 1, 2, 0, 50, 1)
    assert res.errors == 50  # with no measurements every low-rank matrix is feasible
    text = run_reliability_probe(3, 1, 2, 7, 3000, 2).to_csv()
    rows = parse(text)
    assert rows[0] == RELIABILITY_HEADER
    p_hat, ub = float(rows[1][6]), float(rows[1][10])
    assert p_hat <= ub
    assert text == run_reliability_probe(3, 1, 2, 7, 3000, 2, jobs=2).to_csv()


def test_reliability_matches_decoder():
    from ffrank.decoder import minrank_reduced
    from ffrank.ensemble import measure_array, sample_low_rank_array, sample_sensing_array, trial_rng
    F = field_for(2)
    fails = 0
    for i in range(300):
        X = sample_low_rank_array(3, 1, 2, "exact", trial_rng(9, i, "X"))
        H = sample_sensing_array(3, 6, EnsembleSpec.uniform(2), trial_rng(9, i, "H"))
        out = minrank_reduced(measure_array(X, H, F), H, F)
        fails += not (out.unique and np.array_equal(out.X_star.data, X))
    assert run_reliability_probe(3, 1, 2, 6, 300, 9).errors == fails


def test_distance_profile_and_strong():
    prof = run_distance_profile(3, 2, 4, None, 40, 3)
    rows = parse(prof.to_csv())
    assert rows[0] == DISTANCE_HEADER and len(rows) == 5
    sizes = prof.spectra.sum(axis=1)
    assert sizes.min() >= 2 ** (9 - 4) and all(s & (s - 1) == 0 for s in sizes.tolist())
    assert all(d is None or 1 <= d <= 3 for d in prof.min_distances)
    assert prof.rate == pytest.approx(5 / 9)
    passes, trials = run_strong_recovery(3, 1, 2, 9, 20, 1)
    assert trials == 20 and 0 <= passes <= 20
