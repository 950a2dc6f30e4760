#!/usr/bin/env python3
"""Posterior KDE comparisons: best / median / worst runs by MMD^2.

For each algorithm at one privacy level, pick the runs with the smallest,
median, and largest MMD^2, pool the post-warmup halves of their chain CSVs,
and draw marginal KDEs plus a 2-D KDE against the reference sample.  The
chosen repeats and their scores go into a JSON dump.

Usage: posteriors.py --results results.csv --samples-dir out/samples \
                     --reference ref.csv --out figs/ [--epsilon 15]
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

from plotcommon import (
    RESULTS_COLUMNS,
    dump_aggregates,
    kde_1d,
    kde_2d,
    load_matrix,
    load_table,
    save_figure,
)

PICKS = ["best", "median", "worst"]


def select_runs(rows):
    """Repeat indices of the best / median / worst rows by mmd2."""
    ordered = rows.sort_values("mmd2").reset_index(drop=True)
    n = len(ordered)
    picks = {"best": 0, "median": (n - 1) // 2, "worst": n - 1}
    return {name: ordered.iloc[idx] for name, idx in picks.items()}


def pooled_run_sample(samples_dir, model, algo, epsilon, repeat):
    """Post-warmup pool of every chain CSV belonging to one run."""
    pattern = f"{model}_{algo}_eps{epsilon:g}_rep{repeat}_chain*.csv"
    paths = sorted(Path(samples_dir).glob(pattern))
    if not paths:
        print(f"error: no chain files match {pattern} under {samples_dir}",
              file=sys.stderr)
        raise SystemExit(2)
    kept = []
    for path in paths:
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        thetas = table[:, 1:3]
        kept.append(thetas[thetas.shape[0] // 2 :])
    return np.vstack(kept)


def plot_posteriors(results_csv, samples_dir, reference_csv, out_dir, epsilon=None) -> dict:
    df = load_table(results_csv, RESULTS_COLUMNS)
    df = df[df["failed"] == 0]
    reference = load_matrix(reference_csv)
    out_dir = Path(out_dir)
    if epsilon is None and len(df):
        epsilon = float(df["epsilon"].max())
    aggregates = {}
    models = sorted(df["model"].unique())
    for model in models:
        algos = sorted(df[df["model"] == model]["algo"].unique())
        fig, axes = plt.subplots(3, max(len(algos), 1), figsize=(4.0 * max(len(algos), 1), 10),
                                 squeeze=False)
        for col, algo in enumerate(algos):
            rows = df[(df["model"] == model) & (df["algo"] == algo)
                      & (df["epsilon"] == epsilon)]
            if not len(rows):
                continue
            chosen = select_runs(rows)
            for name, row in chosen.items():
                aggregates[f"{model}/{algo}/{name}"] = {
                    "repeat": int(row["repeat"]),
                    "mmd2": float(row["mmd2"]),
                }
            for j in range(2):
                ax = axes[j][col]
                grid = np.linspace(reference[:, j].min() - 1, reference[:, j].max() + 1, 300)
                ax.plot(grid, kde_1d(reference[:, j], grid), color="black", lw=1.8,
                        label="reference")
                for name, style in zip(PICKS, ["-", "--", ":"]):
                    row = chosen[name]
                    pooled = pooled_run_sample(samples_dir, model, algo, epsilon,
                                               int(row["repeat"]))
                    ax.plot(grid, kde_1d(pooled[:, j], grid), style, lw=1.2, label=name)
                ax.set_title(f"{algo}: theta_{j + 1}")
                if col == 0 and j == 0:
                    ax.legend(fontsize=8)
            ax = axes[2][col]
            gx, gy = np.meshgrid(
                np.linspace(reference[:, 0].min() - 1, reference[:, 0].max() + 1, 60),
                np.linspace(reference[:, 1].min() - 1, reference[:, 1].max() + 1, 60),
            )
            ax.contour(gx, gy, kde_2d(reference, gx, gy), levels=5, colors="black",
                       linewidths=0.8)
            pooled = pooled_run_sample(samples_dir, model, algo, epsilon,
                                       int(chosen["median"]["repeat"]))
            ax.contour(gx, gy, kde_2d(pooled, gx, gy), levels=5, colors="tab:blue",
                       linewidths=0.8)
            ax.set_title(f"{algo}: 2-D KDE (median run)")
        fig.tight_layout()
        save_figure(fig, out_dir / f"posteriors_{model}.png")
    dump_aggregates(aggregates, out_dir / "posteriors_aggregates.json")
    return aggregates


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--results", required=True)
    parser.add_argument("--samples-dir", dest="samples_dir", required=True)
    parser.add_argument("--reference", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--epsilon", type=float, default=None)
    args = parser.parse_args(argv)
    plot_posteriors(args.results, args.samples_dir, args.reference, args.out, args.epsilon)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
