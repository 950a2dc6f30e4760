#!/usr/bin/env python3
"""Clipping-study figures: MMD^2 against the clip bound and against the
realised clip fraction, one point per run.

Usage: clipping.py --results clipping.csv --out figs/
"""

from __future__ import annotations

import argparse
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

from plotcommon import (
    ALGO_COLORS,
    CLIPPING_COLUMNS,
    dump_aggregates,
    exact_median,
    load_table,
    save_figure,
)


def plot_clipping(clipping_csv, out_dir) -> dict:
    df = load_table(clipping_csv, CLIPPING_COLUMNS)
    out_dir = Path(out_dir)
    aggregates = {}
    models = sorted(df["model"].unique()) or ["none"]
    for model in models:
        sub = df[df["model"] == model]
        fig, (ax_bound, ax_frac) = plt.subplots(1, 2, figsize=(11, 4.2))
        for algo in sorted(sub["algo"].unique()):
            rows = sub[sub["algo"] == algo]
            finite = rows[np.isfinite(rows["clip_bound"])]
            ax_bound.scatter(finite["clip_bound"], finite["mmd2"], s=18, alpha=0.6,
                             color=ALGO_COLORS.get(algo), label=algo)
            ax_frac.scatter(rows["clip_frac"], rows["mmd2"], s=18, alpha=0.6,
                            color=ALGO_COLORS.get(algo), label=algo)
            for bound in sorted(rows["clip_bound"].unique()):
                value = exact_median(rows[rows["clip_bound"] == bound]["mmd2"])
                aggregates[f"{model}/{algo}/bound={bound:g}"] = value
        ax_bound.set_xlabel("clip bound")
        ax_bound.set_ylabel("mmd2")
        ax_bound.set_xscale("log")
        ax_bound.set_yscale("log")
        ax_bound.set_title(f"{model}: MMD^2 vs clip bound")
        ax_frac.set_xlabel("fraction of ratios clipped")
        ax_frac.set_ylabel("mmd2")
        ax_frac.set_yscale("log")
        ax_frac.set_title(f"{model}: MMD^2 vs clip fraction")
        for ax in (ax_bound, ax_frac):
            if ax.has_data():
                ax.legend(fontsize=8)
        fig.tight_layout()
        save_figure(fig, out_dir / f"clipping_{model}.png")
    dump_aggregates(aggregates, out_dir / "clipping_aggregates.json")
    return aggregates


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--results", required=True)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    plot_clipping(args.results, args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
