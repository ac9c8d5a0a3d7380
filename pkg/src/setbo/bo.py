"""The Bayesian-optimization loop over structured designs.

A trial alternates between refitting the surrogate on all collected
(normalized) designs and maximizing the batch acquisition in the [0,1] cube,
with optional snapping of well coordinates to feasible grid cells and a soft
barrier keeping acquisition candidates away from infeasible regions.  Metrics
follow the best-so-far convention: b_0 after initialization, b_t after BO
iteration t, AUC = sum of b_1..b_T.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import qmc

from .acquisition import AcquisitionConfig, barrier_penalty, optimize_acquisition
from .benchmarks import Benchmark, make_benchmark
from .feasibility import (
    GridMask,
    interior_score,
    read_mask,
    sdf_from_mask,
    snap_design,
    synthetic_mask,
)
from .gp import GpModel, ModelFitError, OptimizerConfig, fit
from .kernels import Design

PENALTY_FRACTION = 0.1
PENALTY_RANGE_FLOOR = 1.0


@dataclass
class DesignSpace:
    """Affine map between domain-unit designs and the normalized cube."""

    d_v: int
    n_inj: int
    n_prod: int
    v_bounds: np.ndarray  # (d_v, 2)
    xy_bounds: tuple      # ((x_lo, x_hi), (y_lo, y_hi))

    def __post_init__(self):
        self.v_bounds = np.asarray(self.v_bounds, dtype=np.float64).reshape(-1, 2)
        lo, hi = self.v_bounds[:, 0], self.v_bounds[:, 1]
        (xl, xh), (yl, yh) = self.xy_bounds
        if np.any(hi <= lo) or xh <= xl or yh <= yl:
            raise ValueError("bounds must satisfy lower < upper")

    @property
    def dim(self) -> int:
        return self.d_v + 2 * (self.n_inj + self.n_prod)

    def _xy_lo_span(self):
        (xl, xh), (yl, yh) = self.xy_bounds
        return np.array([xl, yl]), np.array([xh - xl, yh - yl])

    def normalize(self, design: Design):
        """Map a domain-unit design into [0,1]; clamps and flags excursions."""
        lo, span = self._xy_lo_span()
        v = np.zeros(0)
        if self.d_v:
            v = (design.v - self.v_bounds[:, 0]) / (
                self.v_bounds[:, 1] - self.v_bounds[:, 0])
        I = (design.I - lo) / span
        P = (design.P - lo) / span
        clamped = bool(
            np.any(v < 0) or np.any(v > 1)
            or np.any(I < 0) or np.any(I > 1)
            or np.any(P < 0) or np.any(P > 1)
        )
        out = Design.create(v=np.clip(v, 0.0, 1.0), I=np.clip(I, 0.0, 1.0),
                            P=np.clip(P, 0.0, 1.0))
        return out, clamped

    def unnormalize(self, design: Design) -> Design:
        lo, span = self._xy_lo_span()
        v = np.zeros(0)
        if self.d_v:
            v = self.v_bounds[:, 0] + design.v * (
                self.v_bounds[:, 1] - self.v_bounds[:, 0])
        return Design.create(v=v, I=lo + design.I * span, P=lo + design.P * span)

    def decode(self, z: np.ndarray) -> Design:
        """Normalized flat vector (v, I rows, P rows) to a normalized Design."""
        z = np.asarray(z, dtype=np.float64).ravel()
        if z.shape[0] != self.dim:
            raise ValueError(f"expected {self.dim} coordinates, got {z.shape[0]}")
        v = z[:self.d_v]
        rest = z[self.d_v:].reshape(-1, 2)
        return Design.create(v=v, I=rest[:self.n_inj], P=rest[self.n_inj:])


@dataclass
class FeasibilityConfig:
    generator: str = "disk"       # synthetic mask family, or "file"
    nx: int = 24
    ny: int = 24
    mask_seed: int = 0
    mask_path: str | None = None
    k_nearest: int = 8
    barrier_weight: float = 1.0
    barrier_margin: float = 0.05
    barrier_sharpness: float = 10.0


@dataclass
class RunConfig:
    benchmark: str = "twoset_ablation"
    surrogate: str = "gp_perm"
    n_trials: int = 10
    n_init: int = 6
    T: int = 25
    q: int = 4
    base_seed: int = 0
    aux_seed: int = 0
    n_points: int | None = None
    n_inj: int = 4
    n_prod: int = 6
    eps: float = 0.1
    ip_weight: float = 1.0
    sinkhorn_max_iters: int = 200
    sinkhorn_tol: float = 1e-6
    constants: dict | None = None
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    feasibility: FeasibilityConfig | None = None

    def __post_init__(self):
        if min(self.n_trials, self.n_init, self.T + 1, self.q) < 1:
            raise ValueError("budgets must be positive (T may be 0)")

    @property
    def total_evals(self) -> int:
        return self.n_init + self.T * self.q


@dataclass
class EvalRecord:
    design: Design        # domain units, post-snapping
    raw_value: float
    penalized_value: float
    iteration: int        # 0 = initialization


@dataclass
class TrialRecord:
    trial_index: int
    seed: int
    evaluations: list
    best_so_far: np.ndarray  # length T+1, index 0 after initialization
    phase_ms: dict
    fit_failures: list = field(default_factory=list)
    clamped_inputs: int = 0


def build_space(bench: Benchmark) -> DesignSpace:
    d_v, n_inj, n_prod = bench.spec.design_shape
    lo, hi = bench.spec.domain
    return DesignSpace(d_v=d_v, n_inj=n_inj, n_prod=n_prod,
                       v_bounds=np.zeros((0, 2)),
                       xy_bounds=((lo, hi), (lo, hi)))


def build_mask(cfg: FeasibilityConfig) -> GridMask:
    if cfg.mask_path:
        return read_mask(cfg.mask_path)
    return synthetic_mask(cfg.generator, cfg.nx, cfg.ny, cfg.mask_seed)


def initial_design(space: DesignSpace, n: int, seed: int, mask=None,
                   interior=None) -> list:
    """N normalized designs: Sobol continuous coordinates; with a mask, well
    cells are drawn without replacement with weight 1 + interior score."""
    n_wells = space.n_inj + space.n_prod
    if mask is None:
        sob = qmc.Sobol(d=space.dim, scramble=True, seed=seed)
        k = int(np.ceil(np.log2(max(n, 2))))
        rows = sob.random_base2(k)[:n]
        return [space.decode(row) for row in rows]

    feas_idx = np.flatnonzero(mask.feasible.ravel())
    if len(feas_idx) < n_wells:
        raise ValueError(f"{len(feas_idx)} feasible cells for {n_wells} wells")
    weights = 1.0 + interior.ravel()[feas_idx]
    weights = weights / weights.sum()
    centers = mask.cell_centers()[feas_idx]
    rng = np.random.default_rng(seed)
    if space.d_v:
        sob = qmc.Sobol(d=space.d_v, scramble=True, seed=seed)
        k = int(np.ceil(np.log2(max(n, 2))))
        vs = sob.random_base2(k)[:n]
    designs = []
    for t in range(n):
        pick = rng.choice(len(feas_idx), size=n_wells, replace=False, p=weights)
        pts = centers[pick]
        domain = Design.create(
            v=np.zeros(0), I=pts[:space.n_inj], P=pts[space.n_inj:])
        norm, _ = space.normalize(domain)
        if space.d_v:
            norm = Design.create(v=vs[t], I=norm.I, P=norm.P)
        designs.append(norm)
    return designs


def penalize_invalid(raw_values) -> np.ndarray:
    """Replace invalid (non-finite) values by a penalty below the worst
    feasible observation: min - 0.1 * max(range, 1), recomputed per call."""
    raw = np.asarray(raw_values, dtype=np.float64)
    valid = np.isfinite(raw)
    if not valid.any():
        raise ValueError("all observations are invalid")
    if valid.all():
        return raw.copy()
    feas = raw[valid]
    penalty = feas.min() - PENALTY_FRACTION * max(
        float(feas.max() - feas.min()), PENALTY_RANGE_FLOOR)
    out = raw.copy()
    out[~valid] = penalty
    return out


def _random_feasible_batch(space, q, rng, mask, interior):
    seed = int(rng.integers(0, 2**31 - 1))
    return initial_design(space, q, seed, mask, interior)


def run_trial(config: RunConfig, trial_index: int,
              benchmark: Benchmark | None = None) -> TrialRecord:
    seed = config.base_seed + trial_index
    bench = benchmark or make_benchmark(
        config.benchmark, aux_seed=config.aux_seed, n_points=config.n_points,
        n_inj=config.n_inj, n_prod=config.n_prod, constants=config.constants)
    space = build_space(bench)
    mask = interior = sdf = None
    if config.feasibility is not None:
        mask = build_mask(config.feasibility)
        interior = interior_score(mask)
        if config.feasibility.barrier_weight > 0:
            sdf = sdf_from_mask(mask)

    phase_ms = {"init": 0.0, "fit": 0.0, "acquisition": 0.0, "evaluate": 0.0}
    evaluations = []
    clamped = 0
    fit_failures = []
    rng = np.random.default_rng(seed)

    def finish_designs(norm_designs, iteration):
        nonlocal clamped
        out = []
        t0 = time.perf_counter()
        for d in norm_designs:
            domain = space.unnormalize(d)
            if mask is not None:
                domain = snap_design(domain, mask, interior,
                                     config.feasibility.k_nearest)
            raw = bench(domain)
            out.append(EvalRecord(design=domain, raw_value=float(raw),
                                  penalized_value=float(raw),
                                  iteration=iteration))
        phase_ms["evaluate"] += 1e3 * (time.perf_counter() - t0)
        return out

    t0 = time.perf_counter()
    init = initial_design(space, config.n_init, seed, mask, interior)
    phase_ms["init"] = 1e3 * (time.perf_counter() - t0)
    evaluations.extend(finish_designs(init, iteration=0))

    best = np.zeros(config.T + 1)
    best[0] = max(e.raw_value for e in evaluations)

    for t in range(1, config.T + 1):
        raws = np.array([e.raw_value for e in evaluations])
        targets = penalize_invalid(raws)
        for e, p in zip(evaluations, targets):
            e.penalized_value = float(p)
        train = []
        for e in evaluations:
            norm, was_clamped = space.normalize(e.design)
            clamped += int(was_clamped)
            train.append(norm)
        batch_norm = None
        t_fit = time.perf_counter()
        try:
            model = fit(train, targets, kernel=config.surrogate,
                        optimizer=replace(config.optimizer, seed=seed),
                        eps=config.eps, ip_weight=config.ip_weight,
                        sinkhorn_max_iters=config.sinkhorn_max_iters,
                        sinkhorn_tol=config.sinkhorn_tol)
            phase_ms["fit"] += 1e3 * (time.perf_counter() - t_fit)
            f_best = float(np.max(model.y_std))
            acq = replace(config.acquisition, q=config.q)
            penalty_fn = None
            if sdf is not None:
                fc = config.feasibility

                def penalty_fn(Z):
                    total = 0.0
                    for row in Z:
                        d = space.unnormalize(space.decode(row))
                        pts = np.vstack([d.I, d.P])
                        total += barrier_penalty(pts, sdf, fc.barrier_margin,
                                                 fc.barrier_weight,
                                                 fc.barrier_sharpness)
                    return total

            t_acq = time.perf_counter()
            Z, _ = optimize_acquisition(
                model, space.dim, f_best, acq,
                decode=lambda Z: [space.decode(row) for row in Z],
                penalty_fn=penalty_fn, seed=seed * 100003 + t)
            phase_ms["acquisition"] += 1e3 * (time.perf_counter() - t_acq)
            batch_norm = [space.decode(row) for row in Z]
        except ModelFitError as err:
            phase_ms["fit"] += 1e3 * (time.perf_counter() - t_fit)
            fit_failures.append({"iteration": t, "error": str(err)})
            batch_norm = _random_feasible_batch(space, config.q, rng, mask,
                                                interior)
        evaluations.extend(finish_designs(batch_norm, iteration=t))
        batch_raws = [e.raw_value for e in evaluations[-config.q:]]
        finite = [v for v in batch_raws if np.isfinite(v)]
        best[t] = max([best[t - 1]] + finite)

    return TrialRecord(trial_index=trial_index, seed=seed,
                       evaluations=evaluations, best_so_far=best,
                       phase_ms=phase_ms, fit_failures=fit_failures,
                       clamped_inputs=clamped)


def auc_and_final(record: TrialRecord):
    """AUC = sum of b_t over BO iterations 1..T; final = b_T."""
    b = record.best_so_far
    if len(b) == 1:
        return float(b[0]), float(b[0])
    return float(np.sum(b[1:])), float(b[-1])


def run_experiment(config: RunConfig, threads: int = 1):
    """Independent trials with seeds base_seed + trial index, plus a summary.

    Trials are independent, so with threads > 1 they run on a thread pool with
    static assignment by trial index; results are gathered in index order.
    """
    bench = make_benchmark(
        config.benchmark, aux_seed=config.aux_seed, n_points=config.n_points,
        n_inj=config.n_inj, n_prod=config.n_prod, constants=config.constants)
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(
                lambda i: run_trial(config, i, benchmark=bench),
                range(config.n_trials)))
    else:
        records = [run_trial(config, i, benchmark=bench)
                   for i in range(config.n_trials)]
    aucs, finals = zip(*(auc_and_final(r) for r in records))
    summary = {
        "benchmark": config.benchmark,
        "surrogate": config.surrogate,
        "n_trials": config.n_trials,
        "auc": list(aucs),
        "final_best": list(finals),
        "auc_mean": float(np.mean(aucs)),
        "auc_std": float(np.std(aucs)) if config.n_trials > 1 else 0.0,
        "final_mean": float(np.mean(finals)),
        "final_std": float(np.std(finals)) if config.n_trials > 1 else 0.0,
        "degenerate_std": config.n_trials == 1,
        "fit_failures": int(sum(len(r.fit_failures) for r in records)),
    }
    return records, summary


def minmax_normalize_metrics(values_by_variant: dict):
    """Min-max normalize pooled across variants; degenerate spread -> 0.5."""
    pooled = np.concatenate([np.asarray(v, dtype=np.float64)
                             for v in values_by_variant.values()])
    lo, hi = float(pooled.min()), float(pooled.max())
    degenerate = hi <= lo
    out = {}
    for k, v in values_by_variant.items():
        v = np.asarray(v, dtype=np.float64)
        out[k] = np.full_like(v, 0.5) if degenerate else (v - lo) / (hi - lo)
    return out, degenerate


def selection_score(auc_by_bench_variant: dict, final_by_bench_variant: dict,
                    benchmarks, variants):
    """Mean over benchmarks of mean over trials of (nAUC + nFinal)/2.

    Inputs are dicts keyed by (benchmark, variant) holding per-trial arrays.
    Returns (scores dict, winning variant), ties broken by variant order.
    """
    per_variant = {v: [] for v in variants}
    for b in benchmarks:
        norm_auc, _ = minmax_normalize_metrics(
            {v: auc_by_bench_variant[(b, v)] for v in variants})
        norm_final, _ = minmax_normalize_metrics(
            {v: final_by_bench_variant[(b, v)] for v in variants})
        for v in variants:
            per_variant[v].append(
                float(np.mean(0.5 * (norm_auc[v] + norm_final[v]))))
    scores = {v: float(np.mean(per_variant[v])) for v in variants}
    winner = max(range(len(variants)), key=lambda i: (scores[variants[i]], -i))
    return scores, variants[winner]
