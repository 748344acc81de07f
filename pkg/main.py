#!/usr/bin/env python3
"""
binmom command line: fit, sample, genmatrix, bench, mh-demo, derive.

Machine output (JSON reports, matrices, samples) goes to standard output,
status lines go to standard error.
"""

import argparse
import json
import os
import sys
import traceback
import warnings

from bench import ExperimentConfig, aggregate_quantiles, emit, failures, norm_agreement, run_experiment
from conditionals import LINK_KINDS, ConditionalsFamily, sample_many
from config import Config
from copula import GaussianCopulaFamily, bvn_cdf, fit_gc, sample_gc_many
from errors import ArgumentError, BinmomError, BinmomWarning
from matrix_gen import GenConfig, random_cross_moment_matrix
from metropolis import TargetDensity, run_chain
from moment_fit import FitConfig, fit
from quadexp import QuadExpFamily, derive_logistic_family, qe_sample_many
from utils import make_rng, read_matrix, write_matrix

FAMILY_KINDS = {
    "conditionals": ConditionalsFamily,
    "gaussian-copula": GaussianCopulaFamily,
    "quadexp": QuadExpFamily
}


def status(message: str):
    if Config.VERBOSE:
        print(message, file=sys.stderr)


def load_family(path: str):
    """Read any family from its JSON form; the kind tag picks the class"""
    with open(path, "r", encoding="utf-8") as handle:
        data = json.load(handle)
    kind = data.get("kind", "conditionals")
    if kind not in FAMILY_KINDS:
        raise ArgumentError(f"{path}: unknown family kind '{kind}'")
    return FAMILY_KINDS[kind].from_dict(data)


def save_family(family, path: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(family.to_dict(), handle, indent=2)


def _print_json(payload):
    print(json.dumps(payload, indent=2))


def cmd_fit(args) -> int:
    if args.family == "gaussian":
        args.family = "gaussian-copula"
    M = read_matrix(args.matrix)
    status(f"🔍 Fitting {Config.get_family_label(args.family)} to a {M.shape[0]}-dimensional target...")
    if args.family == "gaussian-copula":
        family, repaired, shift = fit_gc(M)
        a = family.thresholds
        residual = max((abs(bvn_cdf(a[i], a[j], family.latent_corr[i, j]) - M[i, j])
                        for i in range(M.shape[0]) for j in range(i + 1, M.shape[0])), default=0.0)
        report = {"family": "gaussian-copula", "repaired": repaired, "shift": shift,
                  "max_pair_residual": residual}
        if repaired:
            status(f"⚠️ Latent correlation repaired (shift {shift:.3g})")
    else:
        estimator = {"exact": "exact", "mc": "monte-carlo", "auto": "auto"}[args.mode]
        cfg = FitConfig(estimator=estimator, n_samples=args.n, seed=args.seed)
        family, fit_report = fit(M, args.family, cfg)
        report = dict(fit_report.to_dict(), family=args.family)
        if fit_report.lambda_min < 1.0:
            status(f"⚠️ Homotopy stopped at lambda = {fit_report.lambda_min:.3f}")
    if args.out:
        save_family(family, args.out)
        status(f"✅ Family written to {args.out}")
        _print_json(report)
    else:
        _print_json({"report": report, "family": family.to_dict()})
    return 0


def cmd_sample(args) -> int:
    family = load_family(args.family)
    rng = make_rng(args.seed)
    if isinstance(family, ConditionalsFamily):
        draws, _ = sample_many(family, args.n, rng)
    elif isinstance(family, GaussianCopulaFamily):
        draws = sample_gc_many(family, args.n, rng)
    else:
        draws = qe_sample_many(family, args.n, rng)
    for row in draws:
        print(" ".join(str(int(v)) for v in row))
    status(f"✅ {args.n} draws from a {family.dim}-dimensional family")
    return 0


def cmd_genmatrix(args) -> int:
    cfg = GenConfig(dim=args.dim, rho=args.rho, permutation_steps=args.steps, sweeps=args.sweeps, seed=args.seed)
    matrix = random_cross_moment_matrix(cfg)
    if args.out:
        write_matrix(args.out, matrix.entries)
        status(f"✅ Matrix written to {args.out}")
    else:
        print(matrix.dim)
        for row in matrix.entries:
            print(" ".join(repr(float(v)) for v in row))
    return 0


def cmd_bench(args) -> int:
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    if args.workers:
        cfg = ExperimentConfig.from_dict(dict(cfg.to_dict(), workers=args.workers))
    status(f"🔍 Benchmark: dims {list(cfg.dims)}, {cfg.levels} levels, {cfg.matrices} matrices per cell, "
           f"{cfg.workers} worker(s)")

    def progress(done, total):
        if done == total or done % max(1, total // 20) == 0:
            status(f"   {done}/{total} matrices")

    records = run_experiment(cfg, progress)
    emit(records, "csv", args.out_csv)
    status(f"✅ Records written to {args.out_csv}")
    if args.out_svg:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BinmomWarning)
            bands = aggregate_quantiles(records, cfg.omegas)
        for path in emit(bands, "svg", args.out_svg):
            status(f"✅ Figure written to {path}")
    if args.db:
        from database import ResultStore
        store = ResultStore(args.db)
        run_id = store.start_run(args.label or os.path.basename(args.out_csv), json.dumps(cfg.to_dict()))
        store.save_records(run_id, records)
        store.close()
        status(f"✅ Run {run_id} stored in {args.db}")
    agreement = norm_agreement(records)
    if agreement is not None:
        status(f"🔍 Spectral/Frobenius rank agreement: {agreement:.3f}")
    failed = failures(records)
    if failed:
        status(f"❌ {len(failed)} of {len(records)} entries failed")
        for record in failed[:10]:
            status(f"   d={record.d} rho={record.rho:.3f} {record.family} #{record.matrix_index}: {record.error}")
        return 1
    return 0


def cmd_mh_demo(args) -> int:
    target_family = load_family(args.target)
    if not isinstance(target_family, QuadExpFamily):
        raise ArgumentError("the MH target must be an exponential quadratic family")
    proposal = load_family(args.proposal)
    _, stats = run_chain(TargetDensity.from_quadexp(target_family), proposal, args.steps, make_rng(args.seed))
    _print_json(stats.to_dict())
    status(f"✅ Acceptance rate {stats.acceptance_rate:.3f} over {args.steps} steps")
    return 0


def cmd_derive(args) -> int:
    family = load_family(args.quadexp)
    if not isinstance(family, QuadExpFamily):
        raise ArgumentError("derive needs an exponential quadratic family")
    logistic = derive_logistic_family(family)
    if args.out:
        save_family(logistic, args.out)
        status(f"✅ Logistic family written to {args.out}")
    else:
        _print_json(logistic.to_dict())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=Config.APP_NAME, description=Config.APP_DESCRIPTION)
    commands = parser.add_subparsers(dest="command", required=True)

    fit_parser = commands.add_parser("fit", help="fit a family to a cross-moment matrix")
    fit_parser.add_argument("--matrix", required=True, help="matrix text file")
    fit_parser.add_argument("--family", "--link", dest="family", default="logistic",
                            choices=LINK_KINDS + ("gaussian-copula", "gaussian"))
    fit_parser.add_argument("--mode", choices=("exact", "mc", "auto"), default="auto")
    fit_parser.add_argument("--n", type=int, default=Config.N_FIT, help="Monte Carlo sample size")
    fit_parser.add_argument("--seed", type=int, default=Config.BASE_SEED)
    fit_parser.add_argument("--out", help="family JSON output")
    fit_parser.set_defaults(handler=cmd_fit)

    sample_parser = commands.add_parser("sample", help="draw from a fitted family")
    sample_parser.add_argument("--family", required=True, help="family JSON")
    sample_parser.add_argument("--n", type=int, default=10)
    sample_parser.add_argument("--seed", type=int, default=Config.BASE_SEED)
    sample_parser.set_defaults(handler=cmd_sample)

    gen_parser = commands.add_parser("genmatrix", help="random feasible cross-moment matrix")
    gen_parser.add_argument("--dim", type=int, required=True)
    gen_parser.add_argument("--rho", type=float, default=1.0)
    gen_parser.add_argument("--seed", type=int, default=Config.BASE_SEED)
    gen_parser.add_argument("--steps", type=int, default=None, help="permutation steps (default 10 d)")
    gen_parser.add_argument("--sweeps", type=int, default=Config.SWEEPS)
    gen_parser.add_argument("--out", help="matrix text output")
    gen_parser.set_defaults(handler=cmd_genmatrix)

    bench_parser = commands.add_parser("bench", help="figure-of-merit benchmark")
    bench_parser.add_argument("--config", help="ExperimentConfig JSON")
    bench_parser.add_argument("--out-csv", default=os.path.join(Config.OUTPUT_DIR, "records.csv"))
    bench_parser.add_argument("--out-svg", help="directory for the band figures")
    bench_parser.add_argument("--workers", type=int, default=None)
    bench_parser.add_argument("--db", help="SQLite file to store the records in")
    bench_parser.add_argument("--label", help="run label in the database")
    bench_parser.set_defaults(handler=cmd_bench)

    mh_parser = commands.add_parser("mh-demo", help="independent Metropolis-Hastings chain")
    mh_parser.add_argument("--target", required=True, help="exponential quadratic family JSON")
    mh_parser.add_argument("--proposal", required=True, help="proposal family JSON")
    mh_parser.add_argument("--steps", type=int, default=10_000)
    mh_parser.add_argument("--seed", type=int, default=Config.BASE_SEED)
    mh_parser.set_defaults(handler=cmd_mh_demo)

    derive_parser = commands.add_parser("derive", help="logistic family approximating a quadexp family")
    derive_parser.add_argument("--quadexp", required=True)
    derive_parser.add_argument("--out")
    derive_parser.set_defaults(handler=cmd_derive)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except BinmomError as e:
        if Config.DEBUG:
            traceback.print_exc()
        print(f"❌ {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"❌ I/O error: {e}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
