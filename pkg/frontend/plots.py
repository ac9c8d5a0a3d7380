"""Render figures from the optimizer's CSV outputs.

Standalone plotting tool; its only contract with the optimizer package is
the documented CSV schemas, so it never imports from it.

Usage:
    plots.py trajectories --csv trajectories.csv --out traj.png
    plots.py psd          --csv diagnostics.csv  --out psd.png
    plots.py sweep        --csv sweep.csv        --out sweep.png
"""

import argparse
import csv
import sys
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

TRAJECTORY_COLUMNS = ["benchmark", "surrogate", "variant", "trial",
                      "iteration", "best_so_far", "raw_value", "phase_ms"]
DIAGNOSTIC_COLUMNS = ["diagnostic", "kernel", "variant", "group", "index",
                      "metric", "value"]
SWEEP_COLUMNS = ["benchmark", "surrogate", "variant", "trial", "norm_auc",
                 "norm_final"]
PSD_DELTAS = (1e-10, 1e-8, 1e-6)


class SchemaError(ValueError):
    """CSV does not match the documented schema; names the offending column."""


def _read_csv(path, expected_columns):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected header "
                              f"{','.join(expected_columns)}")
        if header != expected_columns:
            for got, want in zip(header, expected_columns):
                if got != want:
                    raise SchemaError(
                        f"{path}: expected column {want!r}, found {got!r}")
            raise SchemaError(f"{path}: expected {len(expected_columns)} "
                              f"columns, found {len(header)}")
        rows = [dict(zip(expected_columns, row)) for row in reader]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


@dataclass
class TrajectoryFrame:
    """Trajectory rows grouped by (benchmark, variant, trial).

    Validates on load that iterations are contiguous from 0 and that
    best_so_far is non-decreasing within each trial.
    """

    trials: dict  # (benchmark, variant, trial) -> np.ndarray of best_so_far

    @staticmethod
    def load(path) -> "TrajectoryFrame":
        rows = _read_csv(path, TRAJECTORY_COLUMNS)
        grouped = {}
        for row in rows:
            key = (row["benchmark"], row["variant"], int(row["trial"]))
            grouped.setdefault(key, []).append(
                (int(row["iteration"]), float(row["best_so_far"])))
        trials = {}
        for key, pairs in grouped.items():
            pairs.sort()
            iters = [t for t, _ in pairs]
            if iters != list(range(len(iters))):
                raise SchemaError(
                    f"column 'iteration': trial {key} is not contiguous "
                    f"from 0 (got {iters})")
            best = np.array([b for _, b in pairs])
            if np.any(np.diff(best) < 0):
                raise SchemaError(
                    f"column 'best_so_far': trial {key} is decreasing")
            trials[key] = best
        return TrajectoryFrame(trials=trials)

    @property
    def benchmarks(self):
        return sorted({b for b, _, _ in self.trials})

    def variants(self, benchmark):
        return sorted({v for b, v, _ in self.trials if b == benchmark})

    def mean_std(self, benchmark, variant):
        series = [v for (b, va, _), v in sorted(self.trials.items())
                  if b == benchmark and va == variant]
        stacked = np.vstack(series)
        return stacked.mean(axis=0), stacked.std(axis=0)


def plot_trajectories(csv_path, out_path):
    """One panel per benchmark; mean best-so-far per variant with a +/-1 std
    shaded band across trials."""
    frame = TrajectoryFrame.load(csv_path)
    benchmarks = frame.benchmarks
    fig, axes = plt.subplots(1, len(benchmarks), squeeze=False,
                             figsize=(5 * len(benchmarks), 4))
    for ax, benchmark in zip(axes[0], benchmarks):
        for variant in frame.variants(benchmark):
            mean, std = frame.mean_std(benchmark, variant)
            t = np.arange(len(mean))
            ax.plot(t, mean, label=variant)
            ax.fill_between(t, mean - std, mean + std, alpha=0.25)
        ax.set_title(benchmark)
        ax.set_xlabel("BO iteration")
        ax.set_ylabel("best so far")
        ax.legend()
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return fig


def plot_psd_hist(csv_path, out_path):
    """Histogram of minimum kernel eigenvalues per variant, with markers at
    the -delta violation thresholds."""
    rows = _read_csv(csv_path, DIAGNOSTIC_COLUMNS)
    lam = {}
    for row in rows:
        if row["metric"] == "lambda_min":
            lam.setdefault(row["variant"], []).append(float(row["value"]))
    if not lam:
        raise SchemaError(f"{csv_path}: no lambda_min rows in "
                          "column 'metric'")
    fig, ax = plt.subplots(figsize=(6, 4))
    for variant, values in sorted(lam.items()):
        ax.hist(values, bins=20, alpha=0.5, label=variant)
    for delta in PSD_DELTAS:
        ax.axvline(-delta, color="red", linestyle=":", linewidth=0.8)
    ax.set_xlabel("minimum eigenvalue")
    ax.set_ylabel("count")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return fig


def plot_sweep_box(csv_path, out_path):
    """Box plots of normalized AUC and normalized final value per variant."""
    rows = _read_csv(csv_path, SWEEP_COLUMNS)
    variants = []
    auc, final = {}, {}
    for row in rows:
        v = row["variant"]
        if v not in auc:
            variants.append(v)
            auc[v], final[v] = [], []
        auc[v].append(float(row["norm_auc"]))
        final[v].append(float(row["norm_final"]))
    fig, axes = plt.subplots(1, 2, figsize=(max(6, 1.2 * len(variants)), 4),
                             sharey=True)
    for ax, data, title in ((axes[0], auc, "normalized AUC"),
                            (axes[1], final, "normalized final")):
        ax.boxplot([data[v] for v in variants], tick_labels=variants)
        ax.set_title(title)
        ax.tick_params(axis="x", rotation=45)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return fig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plots.py", description="Render figures from optimizer CSVs")
    parser.add_argument("kind", choices=["trajectories", "psd", "sweep"])
    parser.add_argument("--csv", required=True, help="input CSV path")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    render = {"trajectories": plot_trajectories,
              "psd": plot_psd_hist,
              "sweep": plot_sweep_box}[args.kind]
    try:
        render(args.csv, args.out)
    except (SchemaError, OSError) as err:
        print(str(err), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
