import csv
import json
import math

import numpy as np
import pytest

from clipping import plot_clipping
from comparison import plot_comparison
from posteriors import plot_posteriors

RESULTS_HEADER = (
    "model,algo,epsilon,repeat,mmd2,mean_error,r_hat,accept_rate,"
    "llr_clip_frac,grad_clip_frac,failed"
)


def synthetic_results_csv(path, rows=10, seed=0):
    """A 10-row results table spanning two algorithms and two epsilons."""
    rng = np.random.default_rng(seed)
    lines = [RESULTS_HEADER]
    table = []
    for i in range(rows):
        algo = ["dp-hmc", "dp-sgld"][i % 2]
        eps = [4.0, 15.0][(i // 2) % 2]
        repeat = i // 4
        mmd2 = float(rng.uniform(1e-4, 1e-1))
        err = float(rng.uniform(0.01, 2.0))
        lines.append(
            f"banana,{algo},{eps},{repeat},{mmd2},{err},1.01,0.5,0.05,0.0,0"
        )
        table.append((algo, eps, repeat, mmd2, err))
    path.write_text("\n".join(lines) + "\n")
    return table


def synthetic_clipping_csv(path, seed=1):
    rng = np.random.default_rng(seed)
    lines = ["model,algo,clip_bound,clip_frac,mmd2,repeat"]
    table = []
    for algo in ["hmc", "rwmh"]:
        for bound in [math.inf, 0.1, 0.02]:
            for repeat in range(2):
                frac = float(rng.uniform(0, 0.8)) if math.isfinite(bound) else 0.0
                mmd2 = float(rng.uniform(1e-4, 1e-1))
                lines.append(f"banana,{algo},{bound},{frac},{mmd2},{repeat}")
                table.append((algo, bound, frac, mmd2, repeat))
    path.write_text("\n".join(lines) + "\n")
    return table


def write_chain_csv(path, thetas):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "theta_1", "theta_2", "accepted",
                         "llr_clip_frac", "grad_clip_frac", "eta_i"])
        for i, row in enumerate(thetas):
            writer.writerow([i + 1, row[0], row[1], 1, 0.0, 0.0, 0.1])


def make_sample_tree(tmp_path, results_rows, seed=3):
    rng = np.random.default_rng(seed)
    samples = tmp_path / "samples"
    samples.mkdir(exist_ok=True)
    for algo, eps, repeat, _, _ in results_rows:
        for chain in range(2):
            thetas = rng.normal(size=(20, 2))
            write_chain_csv(samples / f"banana_{algo}_eps{eps:g}_rep{repeat}_chain{chain}.csv",
                            thetas)
    return samples


def write_reference_csv(path, seed=4):
    rng = np.random.default_rng(seed)
    ref = rng.normal(size=(200, 2))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x1", "x2"])
        writer.writerows(ref.tolist())
    return ref


class TestComparison:
    def test_renders_and_dumps_medians(self, tmp_path):
        rows = synthetic_results_csv(tmp_path / "results.csv")
        aggregates = plot_comparison(tmp_path / "results.csv", tmp_path / "figs")
        assert (tmp_path / "figs" / "comparison_banana.png").exists()
        dumped = json.loads((tmp_path / "figs" / "comparison_aggregates.json").read_text())
        assert dumped == pytest.approx(aggregates)
        # independent median recomputation
        for algo in ("dp-hmc", "dp-sgld"):
            for eps in (4.0, 15.0):
                vals = [r[3] for r in rows if r[0] == algo and r[1] == eps]
                key = f"banana/{algo}/eps={eps:g}/mmd2"
                assert dumped[key] == pytest.approx(float(np.median(vals)))

    def test_empty_table_renders_empty_axes(self, tmp_path):
        (tmp_path / "results.csv").write_text(RESULTS_HEADER + "\n")
        plot_comparison(tmp_path / "results.csv", tmp_path / "figs")
        assert (tmp_path / "figs" / "comparison_none.png").exists()

    def test_single_row(self, tmp_path):
        (tmp_path / "results.csv").write_text(
            RESULTS_HEADER + "\nbanana,dp-hmc,15.0,0,0.01,0.5,1.0,0.4,0.0,0.0,0\n"
        )
        aggregates = plot_comparison(tmp_path / "results.csv", tmp_path / "figs")
        assert aggregates["banana/dp-hmc/eps=15/mmd2"] == pytest.approx(0.01)

    def test_missing_column_exits_nonzero_naming_it(self, tmp_path, capsys):
        (tmp_path / "results.csv").write_text("model,algo\nbanana,dp-hmc\n")
        with pytest.raises(SystemExit) as excinfo:
            plot_comparison(tmp_path / "results.csv", tmp_path / "figs")
        assert excinfo.value.code == 2
        assert "mmd2" in capsys.readouterr().err

    def test_unknown_column_warned_and_ignored(self, tmp_path):
        (tmp_path / "results.csv").write_text(
            RESULTS_HEADER + ",bogus\nbanana,dp-hmc,15.0,0,0.01,0.5,1.0,0.4,0.0,0.0,0,7\n"
        )
        with pytest.warns(UserWarning, match="bogus"):
            plot_comparison(tmp_path / "results.csv", tmp_path / "figs")

    def test_deterministic_bytes(self, tmp_path):
        synthetic_results_csv(tmp_path / "results.csv")
        plot_comparison(tmp_path / "results.csv", tmp_path / "a")
        plot_comparison(tmp_path / "results.csv", tmp_path / "b")
        assert (tmp_path / "a" / "comparison_banana.png").read_bytes() == (
            tmp_path / "b" / "comparison_banana.png"
        ).read_bytes()


class TestPosteriors:
    def test_selection_matches_independent_sort(self, tmp_path):
        rows = synthetic_results_csv(tmp_path / "results.csv")
        samples = make_sample_tree(tmp_path, rows)
        write_reference_csv(tmp_path / "ref.csv")
        aggregates = plot_posteriors(
            tmp_path / "results.csv", samples, tmp_path / "ref.csv", tmp_path / "figs",
            epsilon=15.0,
        )
        assert (tmp_path / "figs" / "posteriors_banana.png").exists()
        for algo in ("dp-hmc", "dp-sgld"):
            scored = sorted(
                [(r[3], r[2]) for r in rows if r[0] == algo and r[1] == 15.0]
            )
            assert aggregates[f"banana/{algo}/best"]["repeat"] == scored[0][1]
            assert aggregates[f"banana/{algo}/worst"]["repeat"] == scored[-1][1]
            assert aggregates[f"banana/{algo}/median"]["repeat"] == scored[(len(scored) - 1) // 2][1]

    def test_degenerate_single_point_sample_does_not_crash(self, tmp_path):
        (tmp_path / "results.csv").write_text(
            RESULTS_HEADER + "\nbanana,dp-hmc,15.0,0,0.01,0.5,1.0,0.4,0.0,0.0,0\n"
        )
        samples = tmp_path / "samples"
        samples.mkdir()
        write_chain_csv(samples / "banana_dp-hmc_eps15_rep0_chain0.csv",
                        np.ones((2, 2)))
        write_reference_csv(tmp_path / "ref.csv")
        plot_posteriors(tmp_path / "results.csv", samples, tmp_path / "ref.csv",
                        tmp_path / "figs", epsilon=15.0)
        assert (tmp_path / "figs" / "posteriors_banana.png").exists()

    def test_reference_only_plot_renders(self, tmp_path):
        (tmp_path / "results.csv").write_text(RESULTS_HEADER + "\n")
        write_reference_csv(tmp_path / "ref.csv")
        plot_posteriors(tmp_path / "results.csv", tmp_path, tmp_path / "ref.csv",
                        tmp_path / "figs")
        assert (tmp_path / "figs" / "posteriors_aggregates.json").exists()


class TestClipping:
    def test_renders_and_dumps(self, tmp_path):
        rows = synthetic_clipping_csv(tmp_path / "clipping.csv")
        aggregates = plot_clipping(tmp_path / "clipping.csv", tmp_path / "figs")
        assert (tmp_path / "figs" / "clipping_banana.png").exists()
        for algo in ("hmc", "rwmh"):
            vals = [r[3] for r in rows if r[0] == algo and r[1] == 0.1]
            assert aggregates[f"banana/{algo}/bound=0.1"] == pytest.approx(
                float(np.median(vals))
            )

    def test_missing_column_exit(self, tmp_path, capsys):
        (tmp_path / "clipping.csv").write_text("model,algo\nbanana,hmc\n")
        with pytest.raises(SystemExit):
            plot_clipping(tmp_path / "clipping.csv", tmp_path / "figs")
        assert "clip_bound" in capsys.readouterr().err

    def test_deterministic_bytes(self, tmp_path):
        synthetic_clipping_csv(tmp_path / "clipping.csv")
        plot_clipping(tmp_path / "clipping.csv", tmp_path / "a")
        plot_clipping(tmp_path / "clipping.csv", tmp_path / "b")
        assert (tmp_path / "a" / "clipping_banana.png").read_bytes() == (
            tmp_path / "b" / "clipping_banana.png"
        ).read_bytes()


class TestSecondaryAcceptance:
    """All three figure families from one synthetic 10-row table, with the
    JSON aggregates matching independently recomputed medians exactly."""

    def test_three_figure_families_from_ten_rows(self, tmp_path):
        rows = synthetic_results_csv(tmp_path / "results.csv", rows=10)
        clip_rows = synthetic_clipping_csv(tmp_path / "clipping.csv")
        samples = make_sample_tree(tmp_path, rows)
        write_reference_csv(tmp_path / "ref.csv")

        comparison = plot_comparison(tmp_path / "results.csv", tmp_path / "figs")
        posteriors = plot_posteriors(
            tmp_path / "results.csv", samples, tmp_path / "ref.csv", tmp_path / "figs",
            epsilon=15.0,
        )
        clipping = plot_clipping(tmp_path / "clipping.csv", tmp_path / "figs")

        for name in ("comparison_banana", "posteriors_banana", "clipping_banana"):
            assert (tmp_path / "figs" / f"{name}.png").exists(), name

        # medians recomputed independently of pandas groupby
        for algo in ("dp-hmc", "dp-sgld"):
            for eps in (4.0, 15.0):
                for idx, metric in ((3, "mmd2"), (4, "mean_error")):
                    vals = sorted(r[idx] for r in rows if r[0] == algo and r[1] == eps)
                    mid = vals[len(vals) // 2] if len(vals) % 2 else 0.5 * (
                        vals[len(vals) // 2 - 1] + vals[len(vals) // 2]
                    )
                    assert comparison[f"banana/{algo}/eps={eps:g}/{metric}"] == mid
        for algo in ("hmc", "rwmh"):
            for bound in (math.inf, 0.1, 0.02):
                vals = sorted(r[3] for r in clip_rows if r[0] == algo and r[1] == bound)
                mid = 0.5 * (vals[0] + vals[1])
                assert clipping[f"banana/{algo}/bound={bound:g}"] == mid
        assert set(posteriors) == {
            f"banana/{algo}/{pick}"
            for algo in ("dp-hmc", "dp-sgld")
            for pick in ("best", "median", "worst")
        }
