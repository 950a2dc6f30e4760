"""Shared plumbing for the figure scripts: CSV contract checks, a KDE with
a bandwidth floor, and deterministic PNG output.

These scripts consume only the harness CSV contract; they do not import the
sampler package.
"""

from __future__ import annotations

import json
import sys
import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

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

SAVE_DPI = 120

ALGO_COLORS = {
    "dp-hmc": "tab:blue",
    "dp-penalty": "tab:orange",
    "dp-sgld": "tab:green",
    "dp-sgnht": "tab:red",
    "hmc": "tab:blue",
    "rwmh": "tab:orange",
}


def load_table(path, required_columns):
    """Read a harness CSV, failing loudly on missing columns.

    Unknown extra columns are ignored with a warning; missing required ones
    terminate the script (exit code 2) naming each offender.
    """
    # round-trip parsing: the aggregate dumps promise bit-exact medians
    df = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in required_columns if c not in df.columns]
    if missing:
        print(f"error: {path} is missing required columns: {', '.join(missing)}",
              file=sys.stderr)
        raise SystemExit(2)
    extra = [c for c in df.columns if c not in required_columns]
    if extra:
        warnings.warn(f"ignoring unknown columns in {path}: {', '.join(extra)}",
                      stacklevel=2)
    return df[required_columns]


def load_matrix(path):
    """Read a plain matrix CSV with a single header row."""
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def scott_bandwidth(values, floor=1e-6):
    """Scott's rule with a floor so degenerate samples never crash a KDE."""
    values = np.asarray(values, dtype=float)
    n = max(values.size, 1)
    spread = values.std(ddof=1) if values.size > 1 else 0.0
    return max(spread * n ** (-1.0 / 5.0), floor)


def kde_1d(values, grid, floor=1e-6):
    """Gaussian kernel density of `values` evaluated on `grid`."""
    values = np.asarray(values, dtype=float)
    h = scott_bandwidth(values, floor)
    z = (grid[:, None] - values[None, :]) / h
    return np.exp(-0.5 * z * z).sum(axis=1) / (values.size * h * np.sqrt(2 * np.pi))


def kde_2d(points, gx, gy, floor=1e-6):
    """Product-kernel 2-D density on a meshgrid, Scott bandwidth per axis."""
    points = np.asarray(points, dtype=float)
    n = max(points.shape[0], 1)
    hx = max(points[:, 0].std(ddof=1) if n > 1 else 0.0, floor) * n ** (-1.0 / 6.0)
    hy = max(points[:, 1].std(ddof=1) if n > 1 else 0.0, floor) * n ** (-1.0 / 6.0)
    hx, hy = max(hx, floor), max(hy, floor)
    zx = (gx.ravel()[:, None] - points[None, :, 0]) / hx
    zy = (gy.ravel()[:, None] - points[None, :, 1]) / hy
    dens = np.exp(-0.5 * (zx * zx + zy * zy)).sum(axis=1)
    dens /= n * hx * hy * 2 * np.pi
    return dens.reshape(gx.shape)


def save_figure(fig, path):
    """Write a PNG with fixed DPI and no creator metadata, so identical
    inputs produce identical bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=SAVE_DPI, metadata={"Software": None})
    plt.close(fig)


def dump_aggregates(payload, path):
    """JSON dump of the plotted aggregates, for testability."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def exact_median(values) -> float:
    """Median with a pinned-down arithmetic: the middle element, or the
    exact midpoint 0.5 * (lo + hi) of the two middle elements.

    Interpolating medians (percentile-style lo + 0.5 * (hi - lo)) can differ
    in the last ulp; the aggregate dumps promise bit-exact reproducibility.
    """
    ordered = sorted(float(v) for v in values)
    n = len(ordered)
    if n == 0:
        raise ValueError("median of empty sequence")
    if n % 2:
        return ordered[n // 2]
    return 0.5 * (ordered[n // 2 - 1] + ordered[n // 2])
