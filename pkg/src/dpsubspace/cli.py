"""Command-line front end.

Subcommands: gen-data, estimate-subspace, private-mean, baseline,
hard-instance, validate-gaps, experiment.  Datasets and bases travel in the
DSB1 binary format (CSV import via --csv).  Exit codes: 0 success, 1
runtime failure (including aggregation aborts), 2 usage errors or malformed
files.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from . import datasets
from .baseline import analyze_gauss_zcdp, plain_gaussian_mean
from .budget import PrivacyBudget, substream
from .estimator import EstimatorConfig, est_subspace
from .experiment import (
    PRESETS,
    ExperimentRun,
    private_mean_pipeline,
    run_experiment,
    write_summary_csv,
)
from .hardness import (
    generate_hard_instance,
    instance_from_parts,
    plan_padding,
    sample_fpc,
    sample_secret,
    validate_strong_gap,
    validate_weak_gap,
)
from .linalg import SubspaceBasis, gap_profile
from .robust_average import NoDenseCoreError

USAGE_ERROR = 2


def _load_dataset(args) -> datasets.UnitRowDataset:
    if getattr(args, "csv", False):
        return datasets.load_csv_dataset(args.input)
    return datasets.load_dataset(args.input)


def _cmd_gen_data(args) -> int:
    spec = datasets.SyntheticSpec(n=args.n, d=args.d, k=args.k, tau=args.tau, seed=args.seed)
    X = datasets.gen_synthetic(spec, substream(args.seed, 0))
    datasets.save_dataset(args.out, X)
    print(f"wrote {args.out}: {X.n} x {X.d}")
    return 0


def _cmd_estimate_subspace(args) -> int:
    X = _load_dataset(args)
    cfg = EstimatorConfig(
        k=args.k,
        t=args.t,
        budget=PrivacyBudget.zcdp(args.rho, args.delta),
        q=args.q,
        xi=args.xi,
        gamma=args.gamma,
        aggregator=args.aggregator,
    )
    basis = est_subspace(X, cfg, substream(args.seed, 1))
    datasets.save_matrix(args.out, basis.basis)
    print(f"wrote {args.out}: rank-{basis.k} basis over dimension {basis.d}")
    return 0


def _cmd_private_mean(args) -> int:
    X = _load_dataset(args)
    result = private_mean_pipeline(
        X, args.k, args.rho, args.delta, substream(args.seed, 2), t=args.t, q=args.q
    )
    datasets.save_matrix(args.out, result.estimate[None, :])
    error = float(np.linalg.norm(result.estimate - X.data.mean(axis=0)))
    print(f"wrote {args.out}; l2 error vs exact mean = {error!r}; "
          f"fallback = {result.used_fallback}")
    return 0


def _cmd_baseline(args) -> int:
    X = _load_dataset(args)
    rng = substream(args.seed, 3)
    if args.method == "analyze-gauss":
        report = analyze_gauss_zcdp(X, args.k, args.rho, args.delta, rng)
        datasets.save_matrix(args.out, report.basis.basis)
        print(f"wrote {args.out}; noisy gap = {report.noisy_gap!r}; "
              f"noise std = {report.noise_std!r}; fallback = {report.fallback}")
    else:
        mean = plain_gaussian_mean(X, args.rho, rng)
        datasets.save_matrix(args.out, mean[None, :])
        error = float(np.linalg.norm(mean - X.data.mean(axis=0)))
        print(f"wrote {args.out}; l2 error vs exact mean = {error!r}")
    return 0


def _cmd_hard_instance(args) -> int:
    ell, d0 = plan_padding(args.d, args.pad_alpha)
    rng = substream(args.seed, 4)
    codebook = sample_fpc(args.n0, d0, rng)
    secret = sample_secret(args.k, args.d, rng)
    inst = generate_hard_instance(codebook, args.k, ell, secret, rng)
    datasets.save_dataset(args.out, inst.Y)
    datasets.save_secret(args.secret_out, inst)
    print(f"wrote {args.out}: {inst.Y.n} x {inst.Y.d} (d0={d0}, ell={ell}); "
          f"secret in {args.secret_out}")
    return 0


def _cmd_validate_gaps(args) -> int:
    X = _load_dataset(args)
    profile = gap_profile(X, args.k)
    print(f"gamma1 = {profile.gamma1!r}")
    print(f"gamma2 = {profile.gamma2!r}")
    print(f"additive_gap = {profile.additive_gap!r}")
    print(f"sigma_k^2 * k / n = {profile.sigma_k_sq_over_nk!r}")
    return 0


def _cmd_validate_hard(args) -> int:
    Y = datasets.load_dataset(args.input)
    meta = datasets.load_secret(args.secret)
    inst = instance_from_parts(
        Y, meta["secret"], n0=meta["n0"], d0=meta["d0"], ell=meta["ell"], k=meta["k"]
    )
    weak = validate_weak_gap(inst)
    strong = validate_strong_gap(inst)
    print(f"sigma_k^2 = {weak.sigma_k_sq!r} (bound {weak.head_bound!r}, ok={weak.head_ok})")
    print(f"tail ratio = {weak.tail_ratio!r} (bound {weak.tail_bound!r}, ok={weak.tail_ok})")
    print(f"gamma1 = {strong.gamma1!r} (reference scale {strong.reference_scale!r})")
    return 0


def _cmd_experiment(args) -> int:
    if args.preset is not None:
        run = PRESETS[args.preset]
        if args.reps is not None:
            run = dataclasses.replace(run, reps=args.reps)
        if args.seed is not None:
            run = dataclasses.replace(run, seed=args.seed)
    else:
        if args.sweep is None or args.grid is None:
            print("either --preset or both --sweep and --grid are required", file=sys.stderr)
            return USAGE_ERROR
        run = ExperimentRun(
            sweep=args.sweep,
            grid=tuple(float(g) if args.sweep != "d" else int(float(g))
                       for g in args.grid.split(",")),
            reps=args.reps if args.reps is not None else 30,
            k=args.k,
            d=args.d,
            seed=args.seed if args.seed is not None else 0,
        )
    results = run_experiment(run, out_csv=args.out)
    if args.summary_out:
        write_summary_csv(results, args.summary_out)
    for (method, value), err in sorted(
        results.summary.items(), key=lambda kv: (kv[0][0], kv[0][1])
    ):
        print(f"{method} {run.sweep}={value}: trimmed mean error = {err!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpsubspace",
        description="Private subspace estimation benchmarks and tools",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic near-rank-k dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("estimate-subspace", help="run the private subspace estimator")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--csv", action="store_true", help="input is CSV instead of DSB1")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--t", type=int, default=125)
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1e-5)
    p.add_argument("--xi", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--aggregator", choices=("naive", "ss"), default="ss")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_estimate_subspace)

    p = sub.add_parser("private-mean", help="private low-dimensional mean pipeline")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--csv", action="store_true")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--t", type=int, default=125)
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--rho", type=float, default=2.0)
    p.add_argument("--delta", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_private_mean)

    p = sub.add_parser("baseline", help="additive-gap subspace or plain Gaussian mean")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--csv", action="store_true")
    p.add_argument("--method", choices=("analyze-gauss", "plain-mean"), required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("hard-instance", help="generate a planted hard instance")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--pad-alpha", type=float, required=True)
    p.add_argument("--n0", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--secret-out", required=True)
    p.set_defaults(func=_cmd_hard_instance)

    p = sub.add_parser("validate-gaps", help="print the gap profile of a dataset")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--csv", action="store_true")
    p.add_argument("--k", type=int, required=True)
    p.set_defaults(func=_cmd_validate_gaps)

    p = sub.add_parser("validate-hard", help="check the spectral shape of a hard instance")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--secret", required=True)
    p.set_defaults(func=_cmd_validate_hard)

    p = sub.add_parser("experiment", help="run a benchmark sweep and write CSV")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p.add_argument("--sweep", choices=("d", "tau_over_d", "k"), default=None)
    p.add_argument("--grid", default=None, help="comma-separated grid values")
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--d", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--summary-out", default=None)
    p.set_defaults(func=_cmd_experiment)

    return parser


def cli_dispatch(argv=None) -> int:
    """Parse argv and run the selected subcommand; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses exit code 2 for usage errors
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except NoDenseCoreError as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
