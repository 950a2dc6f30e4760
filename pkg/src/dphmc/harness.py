"""Experiment orchestration: multi-chain, multi-repeat sampler comparisons
and the log-likelihood-ratio clipping study, with deterministic CSV output.

Protocol per (algorithm, epsilon, repeat): calibrate the noise so the whole
4-chain release meets (epsilon, 0.1/n), run the chains from shared starting
points, discard the first half of each chain as warmup, pool the rest, and
score the pool against a reference posterior draw.  Starting points and all
random streams derive from the master seed, so rerunning a config gives
byte-identical CSVs regardless of the job count.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dphmc import metrics
from dphmc.models import (
    BananaSpec,
    GaussianModelSpec,
    make_model,
    banana_posterior,
    gaussian_posterior,
    sample_reference,
    spec_from_jsonable,
    spec_to_jsonable,
    synth_dataset,
)
from dphmc.privacy import (
    AdpBudget,
    SubsampledGaussianSpec,
    adp_delta,
    calibrate_penalty_tau,
    calibrate_subsampled_noise,
    calibrate_tau,
    subsampled_accountant,
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

__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "ClipRecord",
    "starting_points",
    "run_comparison",
    "run_clipping_experiment",
    "write_results_csv",
    "write_clipping_csv",
    "RESULTS_COLUMNS",
    "CLIPPING_COLUMNS",
]

RESULTS_COLUMNS = [
    "model",
    "algo",
    "epsilon",
    "repeat",
    "mmd2",
    "mean_error",
    "r_hat",
    "accept_rate",
    "llr_clip_frac",
    "grad_clip_frac",
    "failed",
]

CLIPPING_COLUMNS = ["model", "algo", "clip_bound", "clip_frac", "mmd2", "repeat"]

DP_ALGORITHMS = ("dp-hmc", "dp-penalty", "dp-sgld", "dp-sgnht")
NONDP_ALGORITHMS = ("hmc", "rwmh")

# sub-stream tags hashed with the master seed (tuple entropy)
_DATA_STREAM = 101
_REFERENCE_STREAM = 102
_STARTS_STREAM = 103
_WIDTH_STREAM = 104


@dataclass
class ExperimentConfig:
    """One experiment: a model, algorithms with tuning, and the protocol knobs.

    ``algorithms`` maps an algorithm name to its tuning parameters (step
    sizes, clip bounds, iteration counts); noise levels are always derived
    from the privacy target, never configured directly.  ``clip_grid`` and
    ``clip_algorithms`` drive the clipping study.
    """

    model: GaussianModelSpec | BananaSpec
    algorithms: dict = field(default_factory=dict)
    epsilons: tuple = (4.0, 8.0, 15.0)
    delta_numerator: float = 0.1
    chains: int = 4
    repeats: int = 10
    seed: int = 0
    reference_size: int = 1000
    clip_algorithms: dict = field(default_factory=dict)
    clip_grid: tuple = ()

    def __post_init__(self):
        if self.chains < 2:
            raise ValueError("at least two chains are required")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        for name in self.algorithms:
            if name not in DP_ALGORITHMS:
                raise ValueError(f"unknown DP algorithm {name!r}")
        for name in self.clip_algorithms:
            if name not in NONDP_ALGORITHMS:
                raise ValueError(f"unknown non-DP algorithm {name!r}")

    @property
    def model_name(self) -> str:
        return "gaussian" if isinstance(self.model, GaussianModelSpec) else "banana"

    @property
    def delta(self) -> float:
        return self.delta_numerator / self.model.n

    def to_jsonable(self) -> dict:
        return {
            "model": spec_to_jsonable(self.model),
            "algorithms": self.algorithms,
            "epsilons": list(self.epsilons),
            "delta_numerator": self.delta_numerator,
            "chains": self.chains,
            "repeats": self.repeats,
            "seed": self.seed,
            "reference_size": self.reference_size,
            "clip_algorithms": self.clip_algorithms,
            "clip_grid": [_bound_to_json(b) for b in self.clip_grid],
        }

    @classmethod
    def from_jsonable(cls, data: dict) -> "ExperimentConfig":
        return cls(
            model=spec_from_jsonable(data["model"]),
            algorithms=data.get("algorithms", {}),
            epsilons=tuple(data.get("epsilons", (4.0, 8.0, 15.0))),
            delta_numerator=data.get("delta_numerator", 0.1),
            chains=data.get("chains", 4),
            repeats=data.get("repeats", 10),
            seed=data.get("seed", 0),
            reference_size=data.get("reference_size", 1000),
            clip_algorithms=data.get("clip_algorithms", {}),
            clip_grid=tuple(_bound_from_json(b) for b in data.get("clip_grid", [])),
        )

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_jsonable(json.loads(Path(path).read_text()))


def _bound_to_json(b: float):
    return "inf" if math.isinf(b) else b


def _bound_from_json(b) -> float:
    return math.inf if b in ("inf", None) else float(b)


@dataclass
class RunRecord:
    model: str
    algo: str
    epsilon: float
    repeat: int
    mmd2: float
    mean_error: float
    r_hat: float
    accept_rate: float
    llr_clip_frac: float
    grad_clip_frac: float
    failed: bool
    budget_delta: float = math.nan
    kernel_width: float = math.nan
    divergences: int = 0
    chains: list = field(default_factory=list, repr=False)
    combined: np.ndarray | None = field(default=None, repr=False)


@dataclass
class ClipRecord:
    model: str
    algo: str
    clip_bound: float
    clip_frac: float
    mmd2: float
    repeat: int
    r_hat: float = math.nan
    chains: list = field(default_factory=list, repr=False)
    combined: np.ndarray | None = field(default=None, repr=False)


def starting_points(
    reference_sample: np.ndarray, theta_true: np.ndarray, chains: int, repeats: int, seed
) -> np.ndarray:
    """Draw (repeats, chains, d) starting points around the true parameters.

    The spread is the mean of the componentwise standard deviations of the
    reference posterior sample; the same set is reused across algorithms and
    epsilon values for a given repeat index.
    """
    reference_sample = np.asarray(reference_sample, dtype=float)
    theta_true = np.asarray(theta_true, dtype=float)
    s = float(reference_sample.std(axis=0, ddof=1).mean())
    rng = np.random.default_rng(seed)
    return theta_true + s * rng.standard_normal((repeats, chains, theta_true.shape[0]))


def _reference_posterior(spec, X):
    if isinstance(spec, GaussianModelSpec):
        return gaussian_posterior(spec, X)
    return banana_posterior(spec, X)


def _prepare_environment(config: ExperimentConfig):
    """Dataset, reference posterior/sample, and starting points, all seeded."""
    data_rng = np.random.default_rng(np.random.SeedSequence((config.seed, _DATA_STREAM)))
    dataset = synth_dataset(config.model, data_rng)
    posterior = _reference_posterior(dataset.spec, dataset.X)
    ref_rng = np.random.default_rng(np.random.SeedSequence((config.seed, _REFERENCE_STREAM)))
    reference = sample_reference(posterior, config.reference_size, ref_rng)
    theta_true = (
        dataset.spec.theta_true_vector
        if isinstance(dataset.spec, GaussianModelSpec)
        else np.asarray(dataset.spec.theta_true, dtype=float)
    )
    starts = starting_points(
        reference,
        theta_true,
        config.chains,
        config.repeats,
        np.random.SeedSequence((config.seed, _STARTS_STREAM)),
    )
    return dataset, posterior, reference, starts


def _calibrate(algo: str, params: dict, epsilon: float, delta: float) -> dict:
    """Noise calibrated so each chain's k-fold composition meets the target.

    Accounting is per chain, matching the privacy theorems (which bound one
    run of k iterations); the pooled multi-chain sample is reported at the
    same budget, as in the source experiments.
    """
    target = AdpBudget(epsilon, delta)
    k = int(params["k"])
    if algo == "dp-hmc":
        tau_l, tau_g = calibrate_tau(
            target, k=k, L=int(params["L"]), grad_share=params.get("grad_share", 0.5)
        )
        return {"tau_l": tau_l, "tau_g": tau_g}
    if algo == "dp-penalty":
        return {"tau_l": calibrate_penalty_tau(target, k=k)}
    if algo in ("dp-sgld", "dp-sgnht"):
        noise = calibrate_subsampled_noise(target, q=params.get("q", 1.0), compositions=k)
        return {"noise_ratio": noise}
    raise ValueError(f"unknown DP algorithm {algo!r}")


def _build_config(algo: str, params: dict, calibrated: dict):
    if algo == "dp-hmc":
        mass = params.get("mass_diag")
        return HmcConfig(
            eta=params["eta"],
            L=int(params["L"]),
            k=int(params["k"]),
            b_l=_bound_from_json(params.get("b_l", "inf")),
            b_g=_bound_from_json(params.get("b_g", "inf")),
            tau_l=calibrated["tau_l"],
            tau_g=calibrated["tau_g"],
            M=None if mass is None else np.asarray(mass, dtype=float),
        )
    if algo == "dp-penalty":
        return PenaltyConfig(
            proposal_std=params["proposal_std"],
            k=int(params["k"]),
            b_l=_bound_from_json(params.get("b_l", "inf")),
            tau_l=calibrated["tau_l"],
        )
    if algo == "dp-sgld":
        return SgldConfig(
            eta=params["eta"],
            k=int(params["k"]),
            q=params.get("q", 1.0),
            b_g=_bound_from_json(params.get("b_g", "inf")),
            noise_ratio=calibrated["noise_ratio"],
        )
    if algo == "dp-sgnht":
        return SgnhtConfig(
            eta=params["eta"],
            k=int(params["k"]),
            q=params.get("q", 1.0),
            b_g=_bound_from_json(params.get("b_g", "inf")),
            noise_ratio=calibrated["noise_ratio"],
            diffusion=params.get("diffusion", 1.0),
        )
    raise ValueError(f"unknown DP algorithm {algo!r}")


_RUNNERS = {
    "dp-hmc": dp_hmc_run,
    "dp-penalty": dp_penalty_run,
    "dp-sgld": dp_sgld_run,
    "dp-sgnht": dp_sgnht_run,
    "hmc": hmc_run,
    "rwmh": rwmh_run,
}


def run_chains(model, X, algo, sampler_config, starts_row, master_seed, repeat):
    """Run one chain per starting point; chain seeds are (seed, chain, repeat)."""
    outputs = []
    for chain_idx, theta0 in enumerate(starts_row):
        seed = np.random.SeedSequence((master_seed, chain_idx, repeat))
        outputs.append(_RUNNERS[algo](model, X, sampler_config, theta0, seed))
    return outputs


def combine_post_warmup(outputs) -> np.ndarray:
    """Concatenate the second halves of all chains (ceil(k/2) draws each)."""
    return np.vstack([out.samples[out.k // 2 :] for out in outputs])


def _score_run(outputs, reference, width_rng):
    combined = combine_post_warmup(outputs)
    width = metrics.median_heuristic_width(combined, reference, width_rng)
    mmd2 = metrics.mmd(combined, reference, width).value
    err = metrics.mean_error(combined, reference.mean(axis=0))
    halves = [out.samples[out.k // 2 :] for out in outputs]
    r_hat = metrics.split_r_hat(halves)
    return combined, width, mmd2, err, r_hat


def _run_budget_delta(algo, outputs, sampler_config, epsilon) -> float:
    """Realised per-chain delta, maximised over the run's chains."""
    if algo in ("hmc", "rwmh"):
        return 0.0
    if algo in ("dp-hmc", "dp-penalty"):
        return max(adp_delta(out.ledger.mu, epsilon) for out in outputs)
    worst = max(out.ledger.grad_queries for out in outputs)
    spec = SubsampledGaussianSpec(
        q=sampler_config.q, noise_ratio=sampler_config.noise_ratio, compositions=worst
    )
    return subsampled_accountant(spec, epsilon)


def _comparison_task(payload):
    (model_spec_json, X, algo, params, calibrated, epsilon, repeat, starts_row,
     master_seed, reference) = payload
    spec = spec_from_jsonable(model_spec_json)
    model = make_model(spec)
    model_name = "gaussian" if isinstance(spec, GaussianModelSpec) else "banana"
    sampler_config = _build_config(algo, params, calibrated)
    try:
        outputs = run_chains(model, X, algo, sampler_config, starts_row, master_seed, repeat)
        width_rng = np.random.default_rng(
            np.random.SeedSequence((master_seed, _WIDTH_STREAM, repeat))
        )
        combined, width, mmd2, err, r_hat = _score_run(outputs, reference, width_rng)
        budget_delta = _run_budget_delta(algo, outputs, sampler_config, epsilon)
        return RunRecord(
            model=model_name,
            algo=algo,
            epsilon=epsilon,
            repeat=repeat,
            mmd2=mmd2,
            mean_error=err,
            r_hat=r_hat,
            accept_rate=float(np.mean([out.accept_rate for out in outputs])),
            llr_clip_frac=float(np.mean([out.mean_llr_clip_frac for out in outputs])),
            grad_clip_frac=float(np.mean([out.mean_grad_clip_frac for out in outputs])),
            failed=False,
            budget_delta=budget_delta,
            kernel_width=width,
            divergences=int(sum(out.divergences for out in outputs)),
            chains=outputs,
            combined=combined,
        )
    except Exception:  # noqa: BLE001 - a failed run is data, not a crash
        return RunRecord(
            model=model_name,
            algo=algo,
            epsilon=epsilon,
            repeat=repeat,
            mmd2=math.nan,
            mean_error=math.nan,
            r_hat=math.nan,
            accept_rate=math.nan,
            llr_clip_frac=math.nan,
            grad_clip_frac=math.nan,
            failed=True,
        )


def run_comparison(config: ExperimentConfig, out_dir=None, jobs: int = 1):
    """Run every (algorithm, epsilon, repeat) cell of the comparison.

    Returns the records sorted by (algorithm, epsilon, repeat); writes
    results.csv and per-chain sample CSVs when ``out_dir`` is given.
    """
    if not config.algorithms:
        raise ValueError("comparison needs at least one algorithm")
    dataset, _, reference, starts = _prepare_environment(config)
    delta = config.delta
    spec_json = spec_to_jsonable(dataset.spec)

    payloads = []
    for algo in sorted(config.algorithms):
        params = config.algorithms[algo]
        for epsilon in sorted(config.epsilons):
            calibrated = _calibrate(algo, params, epsilon, delta)
            for repeat in range(config.repeats):
                payloads.append(
                    (spec_json, dataset.X, algo, params, calibrated, epsilon, repeat,
                     starts[repeat], config.seed, reference)
                )

    records = _execute(payloads, _comparison_task, jobs)
    records.sort(key=lambda r: (r.algo, r.epsilon, r.repeat))
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_results_csv(records, out_dir / "results.csv")
        _write_sample_csvs(records, out_dir)
        (out_dir / "config.json").write_text(json.dumps(config.to_jsonable(), indent=2) + "\n")
    return records


def _clip_task(payload):
    (model_spec_json, X, algo, params, bound, repeat, starts_row, master_seed,
     reference) = payload
    spec = spec_from_jsonable(model_spec_json)
    model = make_model(spec)
    model_name = "gaussian" if isinstance(spec, GaussianModelSpec) else "banana"
    params = dict(params)
    params["b_l"] = _bound_to_json(bound)
    if algo == "hmc":
        mass = params.get("mass_diag")
        sampler_config = HmcConfig(
            eta=params["eta"],
            L=int(params["L"]),
            k=int(params["k"]),
            b_l=bound,
            b_g=_bound_from_json(params.get("b_g", "inf")),
            M=None if mass is None else np.asarray(mass, dtype=float),
        )
    else:
        sampler_config = PenaltyConfig(
            proposal_std=params["proposal_std"], k=int(params["k"]), b_l=bound
        )
    try:
        outputs = run_chains(model, X, algo, sampler_config, starts_row, master_seed, repeat)
        width_rng = np.random.default_rng(
            np.random.SeedSequence((master_seed, _WIDTH_STREAM, repeat))
        )
        combined, _, mmd2, _, r_hat = _score_run(outputs, reference, width_rng)
        return ClipRecord(
            model=model_name,
            algo=algo,
            clip_bound=bound,
            clip_frac=float(np.mean([out.mean_llr_clip_frac for out in outputs])),
            mmd2=mmd2,
            repeat=repeat,
            r_hat=r_hat,
            chains=outputs,
            combined=combined,
        )
    except Exception:  # noqa: BLE001
        return ClipRecord(
            model=model_name,
            algo=algo,
            clip_bound=bound,
            clip_frac=math.nan,
            mmd2=math.nan,
            repeat=repeat,
        )


def run_clipping_experiment(config: ExperimentConfig, out_dir=None, jobs: int = 1):
    """Sweep the log-likelihood-ratio clip bound with noise-free samplers.

    Also checks convergence (split R-hat < 1.05) at the largest bound and
    stores the verdict on each record.
    """
    if not config.clip_algorithms:
        raise ValueError("clipping experiment needs clip_algorithms")
    if not config.clip_grid:
        raise ValueError("clipping experiment needs a clip_grid")
    dataset, _, reference, starts = _prepare_environment(config)
    spec_json = spec_to_jsonable(dataset.spec)

    payloads = []
    for algo in sorted(config.clip_algorithms):
        params = config.clip_algorithms[algo]
        for bound in sorted(config.clip_grid, reverse=True):
            for repeat in range(config.repeats):
                payloads.append(
                    (spec_json, dataset.X, algo, params, bound, repeat, starts[repeat],
                     config.seed, reference)
                )

    records = _execute(payloads, _clip_task, jobs)
    records.sort(key=lambda r: (r.algo, -r.clip_bound, r.repeat))
    largest = max(config.clip_grid)
    for rec in records:
        if rec.clip_bound == largest and rec.r_hat >= 1.05:
            import warnings

            warnings.warn(
                f"{rec.algo} repeat {rec.repeat} did not converge at the largest "
                f"clip bound (R-hat {rec.r_hat:.3f})",
                RuntimeWarning,
                stacklevel=2,
            )
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_clipping_csv(records, out_dir / "clipping.csv")
        _write_sample_csvs(records, out_dir, clip=True)
        (out_dir / "config.json").write_text(json.dumps(config.to_jsonable(), indent=2) + "\n")
    return records


def _execute(payloads, task, jobs):
    if jobs <= 1:
        return [task(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(task, payloads))


def write_results_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULTS_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.model,
                    r.algo,
                    repr(float(r.epsilon)),
                    r.repeat,
                    repr(float(r.mmd2)),
                    repr(float(r.mean_error)),
                    repr(float(r.r_hat)),
                    repr(float(r.accept_rate)),
                    repr(float(r.llr_clip_frac)),
                    repr(float(r.grad_clip_frac)),
                    int(r.failed),
                ]
            )


def write_clipping_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CLIPPING_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.model,
                    r.algo,
                    repr(float(r.clip_bound)),
                    repr(float(r.clip_frac)),
                    repr(float(r.mmd2)),
                    r.repeat,
                ]
            )


def _format_eps(value: float) -> str:
    return f"{value:g}"


def _write_sample_csvs(records, out_dir: Path, clip: bool = False) -> None:
    samples_dir = out_dir / "samples"
    samples_dir.mkdir(exist_ok=True)
    for rec in records:
        for idx, chain in enumerate(rec.chains):
            if clip:
                name = (
                    f"{rec.model}_{rec.algo}_clip{_format_eps(rec.clip_bound)}"
                    f"_rep{rec.repeat}_chain{idx}.csv"
                )
            else:
                name = (
                    f"{rec.model}_{rec.algo}_eps{_format_eps(rec.epsilon)}"
                    f"_rep{rec.repeat}_chain{idx}.csv"
                )
            write_chain_csv(chain, samples_dir / name)
