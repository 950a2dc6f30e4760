"""Command-line interface: accounting queries, data synthesis, single runs,
sample evaluation, and full experiments."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from dphmc import metrics
from dphmc.harness import ExperimentConfig, run_clipping_experiment, run_comparison
from dphmc.models import (
    BananaSpec,
    GaussianModelSpec,
    banana_posterior,
    gaussian_posterior,
    load_dataset,
    make_model,
    sample_reference,
    save_dataset,
    synth_dataset,
)
from dphmc.privacy import (
    SubsampledGaussianSpec,
    adp_delta,
    dp_hmc_budget,
    subsampled_accountant,
    _pld_moments,
)
from dphmc.samplers import (
    HmcConfig,
    PenaltyConfig,
    SgldConfig,
    SgnhtConfig,
    dp_hmc_run,
    dp_penalty_run,
    dp_sgld_run,
    dp_sgnht_run,
    hmc_run,
    rwmh_run,
    write_chain_csv,
)


def _cmd_accountant(args) -> int:
    if args.mode == "gaussian":
        mu = args.compositions / (2.0 * args.noise_ratio**2)
        delta = adp_delta(mu, args.epsilon)
    elif args.mode == "dp-hmc":
        budget = dp_hmc_budget(args.k, args.L, args.tau_l, args.tau_g, args.epsilon)
        mu = args.k / (2 * args.tau_l**2) + args.k * (args.L + 1) / (2 * args.tau_g**2)
        delta = budget.delta
    elif args.mode == "subsampled":
        spec = SubsampledGaussianSpec(
            q=args.q, noise_ratio=args.noise_ratio, compositions=args.compositions
        )
        delta = subsampled_accountant(spec, args.epsilon)
        # report the composed PLD mean as the mu-like summary
        m1, _ = _pld_moments(args.q, args.noise_ratio)
        mu = args.compositions * m1
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(args.mode)
    print(json.dumps({"epsilon": args.epsilon, "delta": delta, "mu": mu}))
    if args.delta is not None and delta > args.delta:
        print(
            f"delta {delta:.3e} exceeds requested bound {args.delta:.3e}",
            file=sys.stderr,
        )
        return 1
    return 0


def _cmd_synth(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.model == "gaussian":
        spec = GaussianModelSpec(d=args.dim, n=args.n)
    else:
        spec = BananaSpec(n=args.n)
    dataset = synth_dataset(spec, rng)
    save_dataset(dataset, args.out, seed=args.seed)
    print(f"wrote {dataset.n} points to {args.out}")
    return 0


def _cmd_reference_sample(args) -> int:
    dataset = load_dataset(args.data)
    if isinstance(dataset.spec, GaussianModelSpec):
        posterior = gaussian_posterior(dataset.spec, dataset.X)
    else:
        posterior = banana_posterior(dataset.spec, dataset.X)
    rng = np.random.default_rng(args.seed)
    sample = sample_reference(posterior, args.m, rng)
    _write_matrix_csv(sample, args.out)
    print(f"wrote {args.m} reference draws to {args.out}")
    return 0


_CLI_RUNNERS = {
    "dp-hmc": (HmcConfig, dp_hmc_run),
    "dp-penalty": (PenaltyConfig, dp_penalty_run),
    "dp-sgld": (SgldConfig, dp_sgld_run),
    "dp-sgnht": (SgnhtConfig, dp_sgnht_run),
    "hmc": (HmcConfig, hmc_run),
    "rwmh": (PenaltyConfig, rwmh_run),
}


def _cmd_run(args) -> int:
    dataset = load_dataset(args.data)
    model = make_model(dataset.spec)
    params = json.loads(Path(args.config).read_text())
    for key in ("b_l", "b_g"):
        if key in params and params[key] in ("inf", None):
            params[key] = math.inf
    config_cls, runner = _CLI_RUNNERS[args.algo]
    config = config_cls(**params)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if isinstance(dataset.spec, GaussianModelSpec):
        theta_true = dataset.spec.theta_true_vector
    else:
        theta_true = np.asarray(dataset.spec.theta_true, dtype=float)
    for repeat in range(args.repeats):
        for chain in range(args.chains):
            seed = np.random.SeedSequence((args.seed, chain, repeat))
            theta0 = theta_true + np.random.default_rng(seed).standard_normal(model.d)
            output = runner(model, dataset.X, config, theta0, seed)
            path = out_dir / f"{args.algo}_rep{repeat}_chain{chain}.csv"
            write_chain_csv(output, path)
    print(f"wrote {args.repeats * args.chains} chain files to {out_dir}")
    return 0


def _cmd_eval(args) -> int:
    sample = np.loadtxt(args.sample, delimiter=",", skiprows=1, ndmin=2)
    reference = np.loadtxt(args.reference, delimiter=",", skiprows=1, ndmin=2)
    if args.sample_columns:
        cols = [int(c) for c in args.sample_columns.split(",")]
        sample = sample[:, cols]
    rng = np.random.default_rng(args.seed)
    width = metrics.median_heuristic_width(sample, reference, rng)
    result = metrics.mmd(sample, reference, width)
    err = metrics.mean_error(sample, reference.mean(axis=0))
    print(
        json.dumps(
            {"mmd2": result.value, "mmd": result.mmd, "width": width, "mean_error": err}
        )
    )
    return 0


def _cmd_experiment(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    if args.profile == "paper":
        print(
            "note: the paper profile is long-running and sized for a workstation",
            file=sys.stderr,
        )
    out_dir = Path(args.out_dir)
    if config.algorithms:
        run_comparison(config, out_dir=out_dir, jobs=args.jobs)
        print(f"comparison results in {out_dir / 'results.csv'}")
    if config.clip_algorithms and config.clip_grid:
        run_clipping_experiment(config, out_dir=out_dir, jobs=args.jobs)
        print(f"clipping results in {out_dir / 'clipping.csv'}")
    return 0


def _write_matrix_csv(matrix: np.ndarray, path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j + 1}" for j in range(matrix.shape[1])])
        for row in matrix:
            writer.writerow([repr(float(v)) for v in row])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dphmc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    acc = sub.add_parser("accountant", help="evaluate (epsilon, delta) budgets")
    acc.add_argument("--mode", choices=["gaussian", "subsampled", "dp-hmc"], required=True)
    acc.add_argument("--epsilon", type=float, required=True)
    acc.add_argument("--delta", type=float, default=None, help="optional bound to check")
    acc.add_argument("--k", type=int, default=1)
    acc.add_argument("--L", type=int, default=1)
    acc.add_argument("--tau-l", dest="tau_l", type=float, default=1.0)
    acc.add_argument("--tau-g", dest="tau_g", type=float, default=1.0)
    acc.add_argument("--q", type=float, default=1.0)
    acc.add_argument("--noise-ratio", dest="noise_ratio", type=float, default=1.0)
    acc.add_argument("--compositions", type=int, default=1)
    acc.set_defaults(func=_cmd_accountant)

    synth = sub.add_parser("synth", help="generate a synthetic dataset")
    synth.add_argument("--model", choices=["gaussian", "banana"], required=True)
    synth.add_argument("--n", type=int, required=True)
    synth.add_argument("--dim", type=int, default=2, help="gaussian model dimension")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", required=True)
    synth.set_defaults(func=_cmd_synth)

    ref = sub.add_parser("reference-sample", help="draw from the analytic posterior")
    ref.add_argument("--data", required=True, help="dataset CSV with JSON sidecar")
    ref.add_argument("--m", type=int, required=True)
    ref.add_argument("--seed", type=int, default=0)
    ref.add_argument("--out", required=True)
    ref.set_defaults(func=_cmd_reference_sample)

    run = sub.add_parser("run", help="run one sampler, one CSV per chain")
    run.add_argument("--algo", choices=sorted(_CLI_RUNNERS), required=True)
    run.add_argument("--config", required=True, help="JSON sampler config")
    run.add_argument("--data", required=True)
    run.add_argument("--chains", type=int, default=4)
    run.add_argument("--repeats", type=int, default=10)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out-dir", dest="out_dir", required=True)
    run.set_defaults(func=_cmd_run)

    ev = sub.add_parser("eval", help="score a sample against a reference CSV")
    ev.add_argument("--sample", required=True)
    ev.add_argument("--reference", required=True)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument(
        "--sample-columns",
        dest="sample_columns",
        default=None,
        help="comma-separated column indices to keep from the sample CSV",
    )
    ev.set_defaults(func=_cmd_eval)

    exp = sub.add_parser("experiment", help="run a full comparison from a config")
    exp.add_argument("--config", required=True)
    exp.add_argument("--out-dir", dest="out_dir", required=True)
    exp.add_argument("--profile", choices=["desk", "paper"], default="desk")
    exp.add_argument("--jobs", type=int, default=1)
    exp.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
