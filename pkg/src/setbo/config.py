"""Resolved run configuration: defaults, YAML loading, overrides, validation.

A config file is a YAML document whose keys deep-merge over the defaults
below.  The resolved config lists every benchmark constant and algorithmic
default, so echoing it and parsing the echo reproduces the identical run.
Dotted ``--override section.key=value`` strings patch individual entries.
"""

import copy

import yaml

from .acquisition import AcquisitionConfig
from .benchmarks import BENCHMARK_CONSTANTS
from .bo import FeasibilityConfig, RunConfig
from .gp import OptimizerConfig

SCHEMA_VERSION = 1

EPS_SWEEP_GRID = [1e-2, 5e-2, 5e-3, 1e-4, 0.5, 1.0, 5.0, 10.0, 2.0, 0.1]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _to_plain(obj):
    """Recursively convert tuples to lists so the config serializes as YAML."""
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    return obj


def default_config() -> dict:
    acq = AcquisitionConfig()
    opt = OptimizerConfig()
    feas = FeasibilityConfig()
    return {
        "schema_version": SCHEMA_VERSION,
        "run": {
            "benchmarks": ["twoset_ablation"],
            "surrogates": ["gp_perm"],
            "n_trials": 10,
            "n_init": 6,
            "T": 25,
            "q": 4,
            "base_seed": 0,
            "aux_seed": 0,
            "n_points": None,
            "n_inj": 4,
            "n_prod": 6,
            "threads": 1,
        },
        "kernel": {
            "eps": 0.1,
            "ip_weight": 1.0,
            "sinkhorn_max_iters": 200,
            "sinkhorn_tol": 1e-6,
        },
        "acquisition": {
            "mc_samples": acq.mc_samples,
            "tau_softplus": acq.tau_softplus,
            "tau_max": acq.tau_max,
            "restarts": acq.restarts,
            "raw_samples": acq.raw_samples,
            "ascent_steps": acq.ascent_steps,
            "fd_step": acq.fd_step,
        },
        "optimizer": {
            "restarts": opt.restarts,
            "max_steps": opt.max_steps,
            "grad_tol": opt.grad_tol,
            "fd_step": opt.fd_step,
            "perturb_scale": opt.perturb_scale,
        },
        "feasibility": {
            "enabled": False,
            "generator": feas.generator,
            "nx": feas.nx,
            "ny": feas.ny,
            "mask_seed": feas.mask_seed,
            "mask_path": feas.mask_path,
            "k_nearest": feas.k_nearest,
            "barrier_weight": feas.barrier_weight,
            "barrier_margin": feas.barrier_margin,
            "barrier_sharpness": feas.barrier_sharpness,
        },
        "benchmark_constants": _to_plain(copy.deepcopy(BENCHMARK_CONSTANTS)),
        "sweep": {
            "parameter": "kernel.eps",
            "values": list(EPS_SWEEP_GRID),
        },
        "diagnostics": {
            "psd": {
                "kernel": "gp_perm",
                "ip_weights": [1.0, 0.0],
                "d": 20,
                "n_list": [64, 128],
                "draws": 20,
                "deltas": [1e-10, 1e-8, 1e-6],
                "seed": 0,
            },
            "posterior": {
                "probe_size": 256,
                "probe_seed": 0,
            },
        },
    }


def _merge(base, patch, path=""):
    for key, val in patch.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {here}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{here}: expected a mapping")
            _merge(base[key], val, here)
        else:
            base[key] = val


def apply_override(cfg: dict, spec: str) -> None:
    """Apply one dotted override, e.g. ``run.T=5`` or ``kernel.eps=0.5``."""
    if "=" not in spec:
        raise ConfigError(f"override {spec!r} is not of the form key=value")
    dotted, raw = spec.split("=", 1)
    keys = dotted.strip().split(".")
    node = cfg
    for k in keys[:-1]:
        if not isinstance(node, dict) or k not in node:
            raise ConfigError(f"unknown config key: {dotted}")
        node = node[k]
    if not isinstance(node, dict) or keys[-1] not in node:
        raise ConfigError(f"unknown config key: {dotted}")
    try:
        node[keys[-1]] = yaml.safe_load(raw)
    except yaml.YAMLError as err:
        raise ConfigError(f"{dotted}: cannot parse value {raw!r}: {err}")


def set_by_path(cfg: dict, dotted: str, value) -> None:
    node = cfg
    keys = dotted.split(".")
    for k in keys[:-1]:
        if not isinstance(node, dict) or k not in node:
            raise ConfigError(f"unknown config key: {dotted}")
        node = node[k]
    if keys[-1] not in node:
        raise ConfigError(f"unknown config key: {dotted}")
    node[keys[-1]] = value


def validate_config(cfg: dict) -> None:
    run = cfg["run"]
    if cfg["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version: expected {SCHEMA_VERSION}, got "
            f"{cfg['schema_version']}")
    if not run["benchmarks"]:
        raise ConfigError("run.benchmarks: must list at least one benchmark")
    for b in run["benchmarks"]:
        if b not in BENCHMARK_CONSTANTS:
            raise ConfigError(f"run.benchmarks: unknown benchmark {b!r}")
    if not run["surrogates"]:
        raise ConfigError("run.surrogates: must list at least one surrogate")
    for s in run["surrogates"]:
        if s not in ("gp_perm", "flat", "ds", "de"):
            raise ConfigError(f"run.surrogates: unknown surrogate {s!r}")
    for key in ("n_trials", "n_init", "q"):
        if not isinstance(run[key], int) or run[key] < 1:
            raise ConfigError(f"run.{key}: must be a positive integer")
    if not isinstance(run["T"], int) or run["T"] < 0:
        raise ConfigError("run.T: must be a nonnegative integer")
    if run["threads"] < 1:
        raise ConfigError("run.threads: must be >= 1")
    if cfg["kernel"]["eps"] <= 0:
        raise ConfigError("kernel.eps: must be positive")
    if not cfg["sweep"]["values"]:
        raise ConfigError("sweep.values: grid must be nonempty")
    if cfg["feasibility"]["enabled"]:
        gen = cfg["feasibility"]["generator"]
        if gen not in ("full", "disk", "two_lobes", "l_shape", "file"):
            raise ConfigError(f"feasibility.generator: unknown {gen!r}")
        if gen == "file" and not cfg["feasibility"]["mask_path"]:
            raise ConfigError("feasibility.mask_path: required for file masks")


def load_config(path=None, overrides=()) -> dict:
    cfg = default_config()
    if path is not None:
        with open(path) as fh:
            try:
                user = yaml.safe_load(fh) or {}
            except yaml.YAMLError as err:
                raise ConfigError(f"cannot parse {path}: {err}")
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        _merge(cfg, user)
    for spec in overrides:
        apply_override(cfg, spec)
    validate_config(cfg)
    return cfg


def dump_config(cfg: dict) -> str:
    return yaml.safe_dump(_to_plain(cfg), sort_keys=False)


def build_run_config(cfg: dict, benchmark: str, surrogate: str) -> RunConfig:
    """Instantiate the engine-level RunConfig for one (benchmark, surrogate)."""
    run = cfg["run"]
    feas = None
    if cfg["feasibility"]["enabled"]:
        f = cfg["feasibility"]
        gen = f["generator"]
        feas = FeasibilityConfig(
            generator=gen, nx=f["nx"], ny=f["ny"], mask_seed=f["mask_seed"],
            mask_path=f["mask_path"] if gen == "file" else None,
            k_nearest=f["k_nearest"], barrier_weight=f["barrier_weight"],
            barrier_margin=f["barrier_margin"],
            barrier_sharpness=f["barrier_sharpness"])
    try:
        acquisition = AcquisitionConfig(q=run["q"], **cfg["acquisition"])
        optimizer = OptimizerConfig(seed=run["base_seed"], **cfg["optimizer"])
        return RunConfig(
            benchmark=benchmark,
            surrogate=surrogate,
            n_trials=run["n_trials"],
            n_init=run["n_init"],
            T=run["T"],
            q=run["q"],
            base_seed=run["base_seed"],
            aux_seed=run["aux_seed"],
            n_points=run["n_points"],
            n_inj=run["n_inj"],
            n_prod=run["n_prod"],
            eps=cfg["kernel"]["eps"],
            ip_weight=cfg["kernel"]["ip_weight"],
            sinkhorn_max_iters=cfg["kernel"]["sinkhorn_max_iters"],
            sinkhorn_tol=cfg["kernel"]["sinkhorn_tol"],
            constants=cfg["benchmark_constants"].get(benchmark),
            acquisition=acquisition,
            optimizer=optimizer,
            feasibility=feas,
        )
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err))
