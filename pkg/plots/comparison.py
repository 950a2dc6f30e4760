#!/usr/bin/env python3
"""Comparison figures: MMD^2 and mean error against the privacy budget.

One panel per (model, metric); one series per algorithm with per-repeat
scatter and a median line.  Alongside the PNGs, a JSON file records the
plotted medians so the figures can be checked mechanically.

Usage: comparison.py --results results.csv --out figs/
"""

from __future__ import annotations

import argparse
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

from plotcommon import (
    ALGO_COLORS,
    RESULTS_COLUMNS,
    dump_aggregates,
    exact_median,
    load_table,
    save_figure,
)

METRICS = ["mmd2", "mean_error"]


def plot_comparison(results_csv, out_dir) -> dict:
    df = load_table(results_csv, RESULTS_COLUMNS)
    out_dir = Path(out_dir)
    aggregates = {}
    models = sorted(df["model"].unique()) or ["none"]
    for model in models:
        sub = df[df["model"] == model]
        fig, axes = plt.subplots(1, len(METRICS), figsize=(11, 4.2))
        for ax, metric in zip(np.atleast_1d(axes), METRICS):
            for algo in sorted(sub["algo"].unique()):
                rows = sub[(sub["algo"] == algo) & (sub["failed"] == 0)]
                ax.scatter(rows["epsilon"], rows[metric], s=14, alpha=0.45,
                           color=ALGO_COLORS.get(algo), label=None)
                eps_grid = sorted(rows["epsilon"].unique())
                medians = [
                    exact_median(rows[rows["epsilon"] == eps][metric]) for eps in eps_grid
                ]
                ax.plot(eps_grid, medians, marker="o",
                        color=ALGO_COLORS.get(algo), label=algo)
                for eps, value in zip(eps_grid, medians):
                    key = f"{model}/{algo}/eps={eps:g}/{metric}"
                    aggregates[key] = value
            ax.set_xlabel("epsilon")
            ax.set_ylabel(metric)
            ax.set_yscale("log")
            ax.set_title(f"{model}: {metric}")
            if ax.has_data():
                ax.legend(fontsize=8)
        fig.tight_layout()
        save_figure(fig, out_dir / f"comparison_{model}.png")
    dump_aggregates(aggregates, out_dir / "comparison_aggregates.json")
    return aggregates


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--results", required=True)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    plot_comparison(args.results, args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
