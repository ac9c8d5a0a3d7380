import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from plots import (  # noqa: E402
    SchemaError,
    TrajectoryFrame,
    main,
    plot_psd_hist,
    plot_sweep_box,
    plot_trajectories,
)

TRAJ_HEADER = ("benchmark,surrogate,variant,trial,iteration,"
               "best_so_far,raw_value,phase_ms")


def write_trajectories(path, benchmarks=("b1", "b2"),
                       variants=("gp_perm", "flat"), trials=2, T=3):
    rng = np.random.default_rng(0)
    lines = [TRAJ_HEADER]
    for b in benchmarks:
        for v in variants:
            for trial in range(trials):
                best = np.maximum.accumulate(rng.random(T + 1))
                for t in range(T + 1):
                    lines.append(f"{b},{v},{v},{trial},{t},"
                                 f"{best[t]:.17g},{best[t]:.17g},0")
    path.write_text("\n".join(lines) + "\n")


def test_frame_load_and_grouping(tmp_path):
    csv = tmp_path / "traj.csv"
    write_trajectories(csv)
    frame = TrajectoryFrame.load(csv)
    assert frame.benchmarks == ["b1", "b2"]
    assert frame.variants("b1") == ["flat", "gp_perm"]
    mean, std = frame.mean_std("b1", "gp_perm")
    assert mean.shape == (4,) and std.shape == (4,)
    assert np.all(np.diff(mean) >= 0)


def test_frame_rejects_bad_schema(tmp_path):
    csv = tmp_path / "bad.csv"
    csv.write_text("benchmark,surrogate,variant,trial,iteration,"
                   "best,raw_value,phase_ms\nb,s,v,0,0,1,1,0\n")
    with pytest.raises(SchemaError, match="best_so_far"):
        TrajectoryFrame.load(csv)


def test_frame_rejects_gap_and_decrease(tmp_path):
    csv = tmp_path / "gap.csv"
    csv.write_text("\n".join([
        TRAJ_HEADER,
        "b,s,v,0,0,1.0,1.0,0",
        "b,s,v,0,2,1.5,1.5,0",
    ]) + "\n")
    with pytest.raises(SchemaError, match="iteration"):
        TrajectoryFrame.load(csv)
    csv.write_text("\n".join([
        TRAJ_HEADER,
        "b,s,v,0,0,1.0,1.0,0",
        "b,s,v,0,1,0.5,0.5,0",
    ]) + "\n")
    with pytest.raises(SchemaError, match="best_so_far"):
        TrajectoryFrame.load(csv)


def test_plot_trajectories_two_by_two(tmp_path):
    csv = tmp_path / "traj.csv"
    out = tmp_path / "traj.png"
    write_trajectories(csv)
    fig = plot_trajectories(csv, out)
    assert out.exists()
    assert len(fig.axes) == 2  # one panel per benchmark
    for ax in fig.axes:
        assert len(ax.lines) == 2          # one mean line per variant
        assert len(ax.collections) == 2    # one shaded band per variant


def test_plot_trajectories_single_trial_band(tmp_path):
    csv = tmp_path / "traj.csv"
    out = tmp_path / "traj.png"
    write_trajectories(csv, benchmarks=("b1",), variants=("v",), trials=1)
    fig = plot_trajectories(csv, out)
    band = fig.axes[0].collections[0]
    paths = band.get_paths()[0].vertices
    ymin = paths[:, 1].min()
    ymax = paths[:, 1].max()
    line = fig.axes[0].lines[0].get_ydata()
    assert ymin >= line.min() - 1e-12 and ymax <= line.max() + 1e-12


def test_empty_csv_errors_without_output(tmp_path):
    csv = tmp_path / "empty.csv"
    out = tmp_path / "never.png"
    csv.write_text(TRAJ_HEADER + "\n")
    code = main(["trajectories", "--csv", str(csv), "--out", str(out)])
    assert code == 1
    assert not out.exists()
    csv.write_text("")
    assert main(["trajectories", "--csv", str(csv), "--out", str(out)]) == 1


def test_psd_histogram(tmp_path):
    csv = tmp_path / "diag.csv"
    rng = np.random.default_rng(1)
    lines = ["diagnostic,kernel,variant,group,index,metric,value"]
    for variant in ("ip=1", "ip=0"):
        for k, lam in enumerate(rng.uniform(0.0, 0.5, 20)):
            lines.append(f"psd,gp_perm,{variant},64,{k},lambda_min,{lam:.17g}")
        lines.append(f"psd,gp_perm,{variant},64,0,violation_frac_1e-10,0")
    csv.write_text("\n".join(lines) + "\n")
    out = tmp_path / "psd.png"
    fig = plot_psd_hist(csv, out)
    assert out.exists()
    # Threshold markers at the three -delta values.
    marker_x = sorted(l.get_xdata()[0] for l in fig.axes[0].lines)
    assert marker_x == [-1e-6, -1e-8, -1e-10]


def test_sweep_box(tmp_path):
    csv = tmp_path / "sweep.csv"
    lines = ["benchmark,surrogate,variant,trial,norm_auc,norm_final"]
    for variant in ("eps=0.1", "eps=1"):
        for trial in range(3):
            lines.append(f"b,gp_perm,{variant},{trial},0.5,0.5")
    csv.write_text("\n".join(lines) + "\n")
    out = tmp_path / "sweep.png"
    fig = plot_sweep_box(csv, out)  # all-equal values must not crash
    assert out.exists()
    assert len(fig.axes) == 2


def test_sweep_single_variant(tmp_path):
    csv = tmp_path / "one.csv"
    csv.write_text("\n".join([
        "benchmark,surrogate,variant,trial,norm_auc,norm_final",
        "b,gp_perm,eps=0.1,0,0.2,0.8",
        "b,gp_perm,eps=0.1,1,0.4,0.6",
    ]) + "\n")
    out = tmp_path / "one.png"
    assert main(["sweep", "--csv", str(csv), "--out", str(out)]) == 0
    assert out.exists()
