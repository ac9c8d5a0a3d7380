"""Command-line entry point and bit-exact result serialization.

Commands::

    setbo bench run   --config cfg.yaml --out results/
    setbo bench sweep --config cfg.yaml --out results/
    setbo diag psd    --out results/
    setbo diag posterior --out results/

All commands write an output bundle into ``--out``: a trajectories CSV with
the fixed column order (benchmark, surrogate, variant, trial, iteration,
best_so_far, raw_value, phase_ms), a summary JSON (which carries timestamps
and wall-clock timings), a diagnostics CSV where applicable, and a verbatim
echo of the resolved config.  Floats in CSVs use 17 significant digits; the
phase_ms CSV column is a placeholder 0 so that reruns are byte-identical,
with the measured per-phase timings reported in the summary JSON instead.
"""

import argparse
import copy
import datetime
import json
import os
import sys

from . import __version__
from .bo import auc_and_final, build_space, run_experiment, run_trial
from .config import (
    ConfigError,
    build_run_config,
    dump_config,
    load_config,
    set_by_path,
)
from .diagnostics import (
    posterior_diagnostics,
    psd_stress_offline,
    sobol_probe_designs,
)
from .gp import fit

TRAJECTORY_COLUMNS = ("benchmark", "surrogate", "variant", "trial",
                      "iteration", "best_so_far", "raw_value", "phase_ms")
DIAGNOSTIC_COLUMNS = ("diagnostic", "kernel", "variant", "group", "index",
                      "metric", "value")


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _write_lines(path, lines):
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def trajectory_rows(benchmark, surrogate, variant, records):
    rows = []
    for rec in records:
        raw_by_iter = {}
        for e in rec.evaluations:
            raw_by_iter.setdefault(e.iteration, []).append(e.raw_value)
        for t, b in enumerate(rec.best_so_far):
            raw = max(raw_by_iter.get(t, [float("nan")]))
            rows.append(",".join([
                benchmark, surrogate, variant, str(rec.trial_index), str(t),
                _fmt(b), _fmt(raw), _fmt(0.0),
            ]))
    return rows


def write_trajectories(out_dir, rows):
    _write_lines(os.path.join(out_dir, "trajectories.csv"),
                 [",".join(TRAJECTORY_COLUMNS)] + rows)


def write_summary(out_dir, cfg, experiments, extra=None):
    payload = {
        "schema_version": cfg["schema_version"],
        "tool_version": __version__,
        "base_seed": cfg["run"]["base_seed"],
        "generated_at": datetime.datetime.now(
            datetime.timezone.utc).isoformat(),
        "experiments": experiments,
    }
    if extra:
        payload.update(extra)
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def write_config_echo(out_dir, cfg):
    with open(os.path.join(out_dir, "config_echo.yaml"), "w") as fh:
        fh.write(dump_config(cfg))


def write_diagnostics(out_dir, rows):
    _write_lines(os.path.join(out_dir, "diagnostics.csv"),
                 [",".join(DIAGNOSTIC_COLUMNS)] + rows)


def _experiment_entry(benchmark, surrogate, variant, records, summary):
    return {
        "benchmark": benchmark,
        "surrogate": surrogate,
        "variant": variant,
        "summary": summary,
        "trial_seeds": [r.seed for r in records],
        "phase_ms": [r.phase_ms for r in records],
        "fit_failures": [r.fit_failures for r in records],
        "clamped_inputs": [r.clamped_inputs for r in records],
    }


def cmd_bench_run(cfg, out_dir) -> int:
    run = cfg["run"]
    rows, experiments, errors = [], [], []
    for benchmark in run["benchmarks"]:
        for surrogate in run["surrogates"]:
            rc = build_run_config(cfg, benchmark, surrogate)
            try:
                records, summary = run_experiment(rc, threads=run["threads"])
            except Exception as err:  # runtime trial error, recorded
                errors.append({"benchmark": benchmark, "surrogate": surrogate,
                               "error": f"{type(err).__name__}: {err}"})
                continue
            rows.extend(trajectory_rows(benchmark, surrogate, surrogate,
                                        records))
            experiments.append(_experiment_entry(benchmark, surrogate,
                                                 surrogate, records, summary))
    write_config_echo(out_dir, cfg)
    write_trajectories(out_dir, rows)
    write_summary(out_dir, cfg, experiments,
                  extra={"errors": errors} if errors else None)
    return 0 if experiments else 1


def cmd_sweep(cfg, out_dir) -> int:
    from .bo import minmax_normalize_metrics, selection_score

    run = cfg["run"]
    parameter = cfg["sweep"]["parameter"]
    values = cfg["sweep"]["values"]
    surrogate = run["surrogates"][0]
    variants = [f"{parameter}={v:g}" if isinstance(v, (int, float))
                else f"{parameter}={v}" for v in values]

    rows, experiments = [], []
    auc_bv, final_bv, records_bv = {}, {}, {}
    for variant, value in zip(variants, values):
        cfg_v = copy.deepcopy(cfg)
        set_by_path(cfg_v, parameter, value)
        for benchmark in run["benchmarks"]:
            rc = build_run_config(cfg_v, benchmark, surrogate)
            records, summary = run_experiment(rc, threads=run["threads"])
            rows.extend(trajectory_rows(benchmark, surrogate, variant,
                                        records))
            experiments.append(_experiment_entry(benchmark, surrogate,
                                                 variant, records, summary))
            metrics = [auc_and_final(r) for r in records]
            auc_bv[(benchmark, variant)] = [m[0] for m in metrics]
            final_bv[(benchmark, variant)] = [m[1] for m in metrics]
            records_bv[(benchmark, variant)] = records

    scores, winner = selection_score(auc_bv, final_bv, run["benchmarks"],
                                     variants)
    sweep_rows = []
    for benchmark in run["benchmarks"]:
        norm_auc, _ = minmax_normalize_metrics(
            {v: auc_bv[(benchmark, v)] for v in variants})
        norm_final, _ = minmax_normalize_metrics(
            {v: final_bv[(benchmark, v)] for v in variants})
        for v in variants:
            for trial in range(len(norm_auc[v])):
                sweep_rows.append(",".join([
                    benchmark, surrogate, v, str(trial),
                    _fmt(norm_auc[v][trial]), _fmt(norm_final[v][trial]),
                ]))
    _write_lines(os.path.join(out_dir, "sweep.csv"),
                 ["benchmark,surrogate,variant,trial,norm_auc,norm_final"]
                 + sweep_rows)
    with open(os.path.join(out_dir, "selection.json"), "w") as fh:
        json.dump({"parameter": parameter, "variants": variants,
                   "scores": scores, "winner": winner}, fh, indent=2)
        fh.write("\n")

    write_config_echo(out_dir, cfg)
    write_trajectories(out_dir, rows)
    write_summary(out_dir, cfg, experiments,
                  extra={"selection": {"scores": scores, "winner": winner}})
    return 0


def cmd_diag_psd(cfg, out_dir) -> int:
    pc = cfg["diagnostics"]["psd"]
    kernel = pc["kernel"]
    ip_weights = pc["ip_weights"] if kernel == "gp_perm" else [None]
    rows, entries = [], []
    for ip_w in ip_weights:
        variant = kernel if ip_w is None else f"ip={ip_w:g}"
        report = psd_stress_offline(
            kernel, d=pc["d"], n_list=pc["n_list"], draws=pc["draws"],
            seed=pc["seed"], deltas=tuple(pc["deltas"]),
            eps=cfg["kernel"]["eps"],
            ip_weight=1.0 if ip_w is None else ip_w)
        for n, vals in report.lambda_mins.items():
            for k, lam in enumerate(vals):
                rows.append(",".join(["psd", kernel, variant, str(n), str(k),
                                      "lambda_min", _fmt(lam)]))
        for (n, delta), frac in report.violation_fractions.items():
            rows.append(",".join(["psd", kernel, variant, str(n), "0",
                                  f"violation_frac_{delta:g}", _fmt(frac)]))
        entries.append({
            "diagnostic": "psd", "kernel": kernel, "variant": variant,
            "medians": {str(k): v for k, v in report.medians.items()},
            "violation_fractions": {f"N={n},delta={d:g}": f for (n, d), f
                                    in report.violation_fractions.items()},
        })
    write_config_echo(out_dir, cfg)
    write_diagnostics(out_dir, rows)
    write_summary(out_dir, cfg, entries)
    return 0


def cmd_diag_posterior(cfg, out_dir) -> int:
    run = cfg["run"]
    pc = cfg["diagnostics"]["posterior"]
    benchmark = run["benchmarks"][0]
    surrogate = run["surrogates"][0]
    rc = build_run_config(cfg, benchmark, surrogate)
    rec = run_trial(rc, 0)
    from .benchmarks import make_benchmark

    bench = make_benchmark(benchmark, aux_seed=rc.aux_seed,
                           n_points=rc.n_points, n_inj=rc.n_inj,
                           n_prod=rc.n_prod, constants=rc.constants)
    space = build_space(bench)
    train = [space.normalize(e.design)[0] for e in rec.evaluations]
    y = [e.penalized_value for e in rec.evaluations]
    model = fit(train, y, kernel=surrogate, optimizer=rc.optimizer,
                eps=rc.eps, ip_weight=rc.ip_weight)
    probes = sobol_probe_designs(space, size=pc["probe_size"],
                                 seed=pc["probe_seed"])
    last_iter = max(e.iteration for e in rec.evaluations)
    last = [e for e in rec.evaluations if e.iteration == last_iter]
    x_next = [space.normalize(e.design)[0] for e in last]
    y_next = [e.raw_value for e in last]
    diag = posterior_diagnostics(model, probes, x_next, y_next,
                                 rc.acquisition, seed=pc["probe_seed"])
    metrics = {
        "rho_qlogei": diag.rho_qlogei,
        "rho_undefined": float(diag.rho_undefined),
        "mean_sigma_z": diag.mean_sigma_z,
        "sigma_next": diag.sigma_next,
        "abs_mean_std_residual": diag.abs_mean_std_residual,
    }
    rows = [",".join(["posterior", surrogate, benchmark, "0", "0", name,
                      _fmt(val)]) for name, val in metrics.items()]
    write_config_echo(out_dir, cfg)
    write_diagnostics(out_dir, rows)
    write_summary(out_dir, cfg, [{
        "diagnostic": "posterior", "benchmark": benchmark,
        "surrogate": surrogate, "metrics": metrics,
    }])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="setbo",
        description="Bayesian optimization over unordered point sets")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", default=None, help="YAML config file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override run.base_seed")
        p.add_argument("--threads", type=int, default=None,
                       help="override run.threads")
        p.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE", help="dotted config override")

    bench = sub.add_parser("bench", help="run experiments")
    bench_sub = bench.add_subparsers(dest="bench_command", required=True)
    add_common(bench_sub.add_parser("run", help="run benchmark experiments"))
    add_common(bench_sub.add_parser("sweep", help="variant grid sweep"))

    diag = sub.add_parser("diag", help="run diagnostics")
    diag_sub = diag.add_subparsers(dest="diag_command", required=True)
    add_common(diag_sub.add_parser("psd", help="PSD stress test"))
    add_common(diag_sub.add_parser("posterior",
                                   help="posterior and acquisition health"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.override)
        if args.seed is not None:
            cfg["run"]["base_seed"] = args.seed
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("run.threads: must be >= 1")
            cfg["run"]["threads"] = args.threads
    except (ConfigError, OSError) as err:
        print(json.dumps({"error": "invalid config", "detail": str(err)}),
              file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    if args.command == "bench" and args.bench_command == "run":
        return cmd_bench_run(cfg, args.out)
    if args.command == "bench" and args.bench_command == "sweep":
        return cmd_sweep(cfg, args.out)
    if args.command == "diag" and args.diag_command == "psd":
        return cmd_diag_psd(cfg, args.out)
    return cmd_diag_posterior(cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
