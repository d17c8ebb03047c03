"""Command-line front end.

Every subcommand writes CSV to stdout and log lines to stderr.  Exit codes:
0 on success, 1 on invalid input, 2 when a computation would exceed a cap.

Parameters may also come from ``--config FILE``: either a JSON object
(nested ``ensemble``/``noise`` objects are flattened) or flat ``key = value``
lines.  Command-line flags override the file.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from typing import Sequence

import numpy as np

from .codelab import CodeSpec, pairwise_independence_check, rank_spectrum
from .counting import (alpha_converse_noisy, count_rank_exact, critical_alpha, encr_bounds,
                       exponents_reference, gv_distance, theta, theta_oracle,
                       threshold_noiseless, threshold_noisy_det)
from .decoder import Status, minrank_noisy, minrank_noisy_oracle, minrank_oracle, minrank_reduced
from .ensemble import EnsembleSpec, NoiseSpec, measure_array, sample_low_rank_array, trial_rng
from .experiments import (SweepConfig, run_distance_profile, run_noisy_sweep,
                          run_reliability_probe, run_sparse_compare, run_strong_recovery,
                          run_weak_sweep, strong_recovery_csv, write_csv)
from .field import CapExceeded, field_for
from .matfq import all_matrices, batch_rank, format_matrix, read_matrices

log = logging.getLogger("ffrank")

EXIT_OK, EXIT_INVALID, EXIT_CAP = 0, 1, 2
THETA_TOL = 1e-12


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- value parsers ---------------------------------------------------------------------------

def int_list(text: str) -> list[int]:
    """"20,40" or an inclusive range "20:40" / "20:40:4", or a mix of both."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            bits = [int(b) for b in part.split(":")]
            if len(bits) not in (2, 3) or (len(bits) == 3 and bits[2] <= 0):
                raise argparse.ArgumentTypeError(f"bad range {part!r}")
            step = bits[2] if len(bits) == 3 else 1
            out.extend(range(bits[0], bits[1] + 1, step))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def density_list(text: str) -> list[str]:
    """Densities as numbers or the aliases ``lnn`` (ln n / n) and ``invn2`` (1 / n^2)."""
    return [t.strip() for t in str(text).split(",") if t.strip()]


def resolve_density(token: str, n: int) -> float:
    if token == "lnn":
        return math.log(n) / n
    if token == "invn2":
        return 1 / (n * n)
    try:
        return float(token)
    except ValueError:
        raise ValueError(f"unknown density {token!r}") from None


def nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def pos_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


# -- config files ----------------------------------------------------------------------------

def load_config(path: str) -> dict:
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        raw = json.loads(text)
        if not isinstance(raw, dict):
            raise ValueError("config JSON must be an object")
        out = {}
        for key, val in raw.items():
            if isinstance(val, dict) and key in ("ensemble", "noise"):
                for sub, v in val.items():
                    out[key if sub == "variant" else sub] = v
            else:
                out[key] = val
        return out
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key] = val
    return out


def _config_tokens(parser: argparse.ArgumentParser, cfg: dict) -> list[str]:
    actions = {a.dest: a for a in parser._actions if a.option_strings}
    tokens = []
    for key, val in cfg.items():
        if key == "subcommand":
            continue
        dest = key.replace("-", "_")
        if dest == "lambda":
            dest = "lam"
        act = actions.get(dest)
        if act is None or dest in ("help", "config"):
            raise UsageError(f"unknown config key {key!r}")
        flag = act.option_strings[0]
        if isinstance(act, argparse._StoreTrueAction):
            if str(val).lower() in ("1", "true", "yes", "on"):
                tokens.append(flag)
            continue
        if isinstance(val, list):
            val = ",".join(str(v) for v in val)
        tokens += [flag, str(val)]
    return tokens


# -- parser ----------------------------------------------------------------------------------

def _add_seeded(p):
    p.add_argument("--seed", type=nonneg_int, help="master seed (required)")
    p.add_argument("--jobs", type=pos_int, default=1, help="worker processes")


def _add_sweep(p, noisy=False):
    p.add_argument("--n", type=pos_int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--r", type=nonneg_int, required=True)
    p.add_argument("--k", type=int_list, required=True, help="k grid, e.g. 20,40 or 10:40:5")
    p.add_argument("--trials", type=pos_int, required=True)
    p.add_argument("--ensemble", choices=["uniform", "sparse"], default="uniform")
    p.add_argument("--delta", type=float)
    p.add_argument("--x-mode", choices=["exact", "at_most"], default="exact")
    p.add_argument("--decoder", choices=["reduced", "oracle"], default="reduced")
    if noisy:
        p.add_argument("--noise", choices=["det", "iid"], required=True)
        p.add_argument("--level", "--sigma", "--p", dest="level", type=float, required=True,
                       help="sigma for det noise, crossover p for iid noise")
        p.add_argument("--lambda", dest="lam", type=float, help="regulariser (default 1/n)")
        p.add_argument("--max-noise-weight", type=nonneg_int, default=3)
        p.add_argument("--strategy", choices=["auto", "classes", "affine"], default="auto")
    _add_seeded(p)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ffrank", description="Rank minimisation over finite fields.")
    ap.add_argument("--config", help="config file (JSON or key = value lines)")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("thresholds", help="closed-form thresholds and exponents")
    p.add_argument("--n", type=pos_int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--sigma", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--rate", type=float, help="code rate for the exponent rows")

    p = sub.add_parser("decode", help="decode one instance from matrix files")
    p.add_argument("--H", required=True, help="sensing matrices, concatenated text blocks")
    p.add_argument("--y", required=True, help="measurements as a 1 x k or k x 1 matrix")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, help="enables the noisy decoder")
    p.add_argument("--max-noise-weight", type=nonneg_int, default=3)
    p.add_argument("--oracle", action="store_true", help="force exhaustive search")
    p.add_argument("--out", help="write X* here in the matrix text format")

    _add_sweep(sub.add_parser("sweep", help="weak-recovery success rate against k"))

    p = sub.add_parser("sparse-compare", help="dense and sparse ensembles on shared trials")
    _add_sweep(p)
    p.add_argument("--deltas", type=density_list, required=True,
                   help="densities: numbers, lnn (= ln n / n) or invn2 (= 1/n^2)")
    p.add_argument("--no-dense", action="store_true")

    _add_sweep(sub.add_parser("noisy-sweep", help="regularised decoder under noise"), noisy=True)

    p = sub.add_parser("distance", help="rank spectra of codes")
    p.add_argument("--H", help="parity checks of one code; otherwise random codes are drawn")
    p.add_argument("--n", type=pos_int)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--k", type=nonneg_int)
    p.add_argument("--trials", type=pos_int)
    p.add_argument("--ensemble", choices=["uniform", "sparse"], default="uniform")
    p.add_argument("--delta", type=float)
    p.add_argument("--strong-r", type=pos_int,
                   help="instead report how often no nonzero codeword has rank <= 2r")
    _add_seeded(p)

    p = sub.add_parser("reliability", help="empirical error probability against its bounds")
    for name in ("n", "r"):
        p.add_argument(f"--{name}", type=pos_int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--k", type=nonneg_int, required=True)
    p.add_argument("--trials", type=pos_int, required=True)
    p.add_argument("--x-mode", choices=["exact", "at_most"], default="exact")
    _add_seeded(p)

    p = sub.add_parser("theta-check", help="closed-form theta against the convolution oracle")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--dmax", type=nonneg_int, required=True)
    p.add_argument("--k", type=float, required=True)

    sub.add_parser("selftest", help="exhaustive micro-suites")
    return ap


# -- subcommands -----------------------------------------------------------------------------

def _require_seed(args):
    if args.seed is None:
        raise UsageError("--seed is required for stochastic subcommands")


def _ensemble(args) -> EnsembleSpec:
    if args.ensemble == "uniform":
        if args.delta is not None:
            raise ValueError("--delta applies only to the sparse ensemble")
        return EnsembleSpec.uniform(args.q)
    if args.delta is None:
        raise ValueError("the sparse ensemble needs --delta")
    return EnsembleSpec.sparse(args.q, args.delta)


def _sweep_config(args, noise: NoiseSpec | None = None, **extra) -> SweepConfig:
    _require_seed(args)
    return SweepConfig(args.n, args.q, args.r, tuple(args.k), args.trials, args.seed,
                       ensemble=_ensemble(args), noise=noise, x_mode=args.x_mode,
                       decoder=args.decoder, **extra)


def cmd_thresholds(args, out) -> int:
    field_for(args.q)
    if not 0 <= args.gamma <= 1:
        raise ValueError("gamma must lie in [0, 1]")
    n, g, e = args.n, args.gamma, args.eps
    base = f"n={n};q={args.q};gamma={g};eps={e}"
    rows = []
    for kind in ("converse", "achievable", "strong"):
        rows.append([f"noiseless_{kind}_k", threshold_noiseless(n, g, e, kind).value, base])

    def add(kind, fn, params):
        try:
            rows.append([kind, fn(), params])
        except ValueError as exc:
            log.info("%s: %s", kind, exc)

    if args.sigma is not None:
        ps = f"{base};sigma={args.sigma}"
        add("noisy_det_alpha", lambda: threshold_noisy_det(g, args.sigma, args.q, e), ps)
        add("noisy_det_k", lambda: threshold_noisy_det(g, args.sigma, args.q, e) * n * n, ps)
    if args.p is not None:
        ps = f"{base};p={args.p}"
        add("noisy_converse_alpha", lambda: alpha_converse_noisy(g, args.p, args.q), ps)
        add("noisy_achievable_alpha", lambda: critical_alpha(args.p, g, args.q, e), ps)
    if args.rate is not None:
        ps = f"{base};R={args.rate}"
        tab = exponents_reference(args.rate, g)
        for name, val in vars(tab).items():
            if isinstance(val, float):
                rows.append([f"exponent_{name}", val, ps])
        add("gv_distance", lambda: gv_distance(args.rate), ps)
    write_csv(["kind", "value", "params"], rows, out)
    return EXIT_OK


def _read_instance(args):
    F = field_for(args.q)
    H = read_matrices(args.H, F)
    if not H:
        raise ValueError("no sensing matrices in --H")
    shape = H[0].shape
    if any(h.shape != shape for h in H):
        raise ValueError("sensing matrices differ in shape")
    ys = read_matrices(args.y, F)
    if len(ys) != 1 or 1 not in ys[0].shape:
        raise ValueError("--y must hold one 1 x k or k x 1 matrix")
    y = ys[0].data.reshape(-1)
    if len(y) != len(H):
        raise ValueError(f"{len(y)} measurements for {len(H)} sensing matrices")
    return F, np.stack([h.data for h in H]), y


def cmd_decode(args, out) -> int:
    F, H, y = _read_instance(args)
    if args.lam is not None:
        if args.oracle:
            res = minrank_noisy_oracle(y, H, F, args.lam)
        else:
            res = minrank_noisy(y, H, F, args.lam, args.max_noise_weight)
    else:
        res = minrank_oracle(y, H, F) if args.oracle else minrank_reduced(y, H, F)
    X = "" if res.X_star is None else ";".join(" ".join(map(str, row)) for row in res.X_star.data)
    w = "" if res.w_star is None else " ".join(map(str, res.w_star.data))
    write_csv(["status", "rank", "noise_weight", "solutions_examined", "X_star", "w_star"],
              [[res.status.value, res.achieved_rank, res.achieved_noise_weight,
                res.solutions_examined, X, w]], out)
    if args.out and res.X_star is not None:
        with open(args.out, "w", newline="\n") as fh:
            fh.write(format_matrix(res.X_star))
    log.info("status %s, rank %s", res.status.value, res.achieved_rank)
    return EXIT_OK


def cmd_sweep(args, out) -> int:
    res = run_weak_sweep(_sweep_config(args), args.jobs)
    res.to_csv(out)
    return EXIT_OK


def cmd_sparse_compare(args, out) -> int:
    cfg = _sweep_config(args)
    deltas = [resolve_density(t, args.n) for t in args.deltas]
    for d in deltas:
        EnsembleSpec.sparse(args.q, d)
    run_sparse_compare(cfg, deltas, include_dense=not args.no_dense, jobs=args.jobs).to_csv(out)
    return EXIT_OK


def cmd_noisy_sweep(args, out) -> int:
    noise = NoiseSpec(args.noise, args.level)
    cfg = _sweep_config(args, noise, lam=args.lam, max_noise_weight=args.max_noise_weight,
                        strategy=args.strategy)
    res = run_noisy_sweep(cfg, args.jobs)
    for key, val in res.overlays.items():
        log.info("overlay %s = %.4f", key, val)
    res.to_csv(out)
    return EXIT_OK


def cmd_distance(args, out) -> int:
    if args.H:
        F = field_for(args.q)
        H = np.stack([h.data for h in read_matrices(args.H, F)])
        n, k = H.shape[1], H.shape[0]
        if H.shape[1] != H.shape[2]:
            raise ValueError("parity checks must be square")
        spec = rank_spectrum(CodeSpec(n, args.q, H))
        nz = np.flatnonzero(spec[1:])
        d_r = int(nz[0]) + 1 if len(nz) else None
        rows = []
        for r in range(n + 1):
            lo, hi = (1, 1) if r == 0 else (float(b) for b in encr_bounds(n, r, args.q, k))
            rows.append([r, int(spec[r]), lo, hi, d_r, 1 - k / (n * n)])
        write_csv(["r", "count", "expected_lo", "expected_hi", "d_R", "rate"], rows, out)
        return EXIT_OK
    _require_seed(args)
    if args.n is None or args.k is None or args.trials is None:
        raise UsageError("random-code mode needs --n, --k and --trials")
    if args.strong_r is not None:
        passes, _ = run_strong_recovery(args.n, args.strong_r, args.q, args.k, args.trials,
                                        args.seed, _ensemble(args), args.jobs)
        strong_recovery_csv(args.n, args.strong_r, args.q, args.k, args.trials, args.seed,
                            passes, out)
        return EXIT_OK
    prof = run_distance_profile(args.n, args.q, args.k, _ensemble(args), args.trials,
                                args.seed, args.jobs)
    dist = [d for d in prof.min_distances if d is not None]
    if dist:
        log.info("d_R histogram %s, rate %.4f, GV %.4f", dict(zip(*np.unique(dist, return_counts=True))),
                 prof.rate, gv_distance(prof.rate))
    prof.to_csv(out)
    return EXIT_OK


def cmd_reliability(args, out) -> int:
    _require_seed(args)
    run_reliability_probe(args.n, args.r, args.q, args.k, args.trials, args.seed, args.jobs,
                          args.x_mode).to_csv(out)
    return EXIT_OK


def cmd_theta_check(args, out) -> int:
    field_for(args.q)
    rows = []
    worst = 0.0
    for d in range(args.dmax + 1):
        a, b = theta(d, args.delta, args.q, args.k), theta_oracle(d, args.delta, args.q, args.k)
        worst = max(worst, abs(a - b))
        rows.append([d, a, b, abs(a - b)])
    write_csv(["d", "theta", "oracle", "abs_dev"], rows, out)
    log.info("max abs deviation %.3e", worst)
    return EXIT_OK if worst <= THETA_TOL else EXIT_INVALID


def selftest_checks():
    """(name, passed, detail) for each exhaustive micro-suite."""
    checks = []
    for q in (2, 3):
        for n in (1, 2, 3):
            F = field_for(q)
            ranks = np.bincount(batch_rank(all_matrices(n, n, q), F), minlength=n + 1)
            exact = [count_rank_exact(n, r, q) for r in range(n + 1)]
            checks.append((f"rank_counts_n{n}_q{q}", ranks.tolist() == exact, str(exact)))
    for k in (1, 2):
        rep = pairwise_independence_check(2, 2, k)
        checks.append((f"pairwise_independence_k{k}", rep.holds,
                       "singles " + " ".join(map(str, rep.single_values))
                       + "; pairs " + " ".join(map(str, rep.pair_values))))
    bad = 0
    for i in range(60):
        q = 2 if i % 2 == 0 else 3
        k, r = 4 + i % 6, (i // 2) % 3
        F = field_for(q)
        X = sample_low_rank_array(3, r, q, "exact", trial_rng(0, i, "X"))
        H = trial_rng(0, i, "H").integers(0, q, (k, 3, 3), dtype=np.int64)
        y = measure_array(X, H, F)
        a, b = minrank_reduced(y, H, F), minrank_oracle(y, H, F)
        same = a.status == b.status and a.achieved_rank == b.achieved_rank and (
            a.status is not Status.UNIQUE or a.X_star == b.X_star)
        bad += not same
    checks.append(("decoder_oracle_equivalence", bad == 0, f"{bad} mismatches of 60"))
    return checks


def cmd_selftest(args, out) -> int:
    checks = selftest_checks()
    write_csv(["check", "passed", "detail"], [[c, int(ok), d] for c, ok, d in checks], out)
    return EXIT_OK if all(ok for _, ok, _ in checks) else EXIT_INVALID


COMMANDS = {
    "thresholds": cmd_thresholds, "decode": cmd_decode, "sweep": cmd_sweep,
    "sparse-compare": cmd_sparse_compare, "noisy-sweep": cmd_noisy_sweep,
    "distance": cmd_distance, "reliability": cmd_reliability,
    "theta-check": cmd_theta_check, "selftest": cmd_selftest,
}


def _split_config(argv: list[str]) -> tuple[str | None, list[str]]:
    path, rest = None, []
    it = iter(argv)
    for tok in it:
        if tok == "--config":
            path = next(it, None)
            if path is None:
                raise UsageError("--config needs a path")
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
        else:
            rest.append(tok)
    return path, rest


def parse_and_dispatch(argv: Sequence[str] | None = None, out=None) -> int:
    """Run one subcommand and return its exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    out = sys.stdout if out is None else out
    try:
        path, rest = _split_config(argv)
        cfg = load_config(path) if path else {}
        ap = build_parser()
        if not rest or rest[0].startswith("-"):
            if rest and rest[0] in ("-h", "--help"):
                ap.print_help(sys.stderr)
                return EXIT_OK
            if "subcommand" not in cfg:
                raise UsageError("no subcommand given")
            rest = [str(cfg["subcommand"])] + rest
        cmd = rest[0]
        if cmd not in COMMANDS:
            raise UsageError(f"unknown subcommand {cmd!r}")
        subparser = ap._subparsers._group_actions[0].choices[cmd]
        args = ap.parse_args([cmd] + _config_tokens(subparser, cfg) + rest[1:])
        return COMMANDS[cmd](args, out)
    except SystemExit as exc:  # --help inside a subparser
        return EXIT_OK if not exc.code else EXIT_INVALID
    except UsageError as exc:
        log.error("usage error: %s", exc)
        return EXIT_INVALID
    except CapExceeded as exc:
        log.error("cap exceeded: %s", exc)
        return EXIT_CAP
    except (ValueError, ZeroDivisionError, OSError, json.JSONDecodeError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INVALID


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="ffrank: %(message)s")
    return parse_and_dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
