"""Rank minimisation over finite fields: fields, matrices, decoders, codes and experiments."""

from .codelab import (CodeSpec, IndependenceReport, code_rate, de_caen_bound, enumerate_codewords,
                      min_rank_distance, ncr_count, pairwise_independence_check, rank_spectrum,
                      strong_recovery_check)
from .counting import (ThresholdReport, alpha_converse_noisy, count_rank_atmost, count_rank_exact,
                       critical_alpha, de_caen_lower, encr_bounds, exponents_reference,
                       gaussian_binomial, gv_distance, lemma1_bounds, reliability_E, theta,
                       theta_oracle, threshold_noiseless, threshold_noisy_det, union_upper)
from .decoder import (DecodeOutcome, Status, basis_class_reps, coset_augment, coset_recover,
                      minrank_noisy, minrank_noisy_oracle, minrank_oracle, minrank_reduced)
from .ensemble import (EnsembleSpec, NoiseSpec, measure, sample_low_rank, sample_noise,
                       sample_sensing, trial_rng)
from .experiments import (SweepConfig, SweepResult, TrialRecord, run_distance_profile,
                          run_noisy_sweep, run_reliability_probe, run_sparse_compare,
                          run_strong_recovery, run_weak_sweep)
from .field import GF, CapExceeded, Elem, ff_add, ff_inv, ff_mul, field_for, make_field
from .matfq import MatFq, VecFq, hamming_weight, mat_inner, mat_rank, rref, solve_affine, stacked_dim, vect

__version__ = "0.1.0"
