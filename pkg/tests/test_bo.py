import numpy as np
import pytest

from setbo.acquisition import AcquisitionConfig
from setbo.bo import (
    DesignSpace,
    FeasibilityConfig,
    RunConfig,
    auc_and_final,
    build_space,
    initial_design,
    minmax_normalize_metrics,
    penalize_invalid,
    run_experiment,
    run_trial,
    selection_score,
)
from setbo.benchmarks import make_benchmark
from setbo.feasibility import interior_score, synthetic_mask
from setbo.gp import OptimizerConfig
from setbo.kernels import Design

LEAN_ACQ = AcquisitionConfig(q=1, mc_samples=16, restarts=1, raw_samples=8,
                             ascent_steps=2)
LEAN_OPT = OptimizerConfig(restarts=1, max_steps=30)


def small_config(**kw):
    base = dict(benchmark="twoset_ablation", surrogate="flat", n_trials=1,
                n_init=4, T=2, q=2, base_seed=0, n_inj=1, n_prod=2,
                acquisition=LEAN_ACQ, optimizer=LEAN_OPT)
    base.update(kw)
    return RunConfig(**base)


def test_design_space_roundtrip_and_decode():
    space = DesignSpace(d_v=2, n_inj=1, n_prod=1,
                        v_bounds=[(0.0, 10.0), (-2.0, 2.0)],
                        xy_bounds=((-1.0, 1.0), (-1.0, 1.0)))
    assert space.dim == 2 + 4
    d = Design.create(v=(0.0, 0.0), I=[(-1.0, 1.0)], P=[(0.0, 0.5)])
    norm, clamped = space.normalize(d)
    assert not clamped
    assert norm.v[0] == 0.0 and norm.v[1] == 0.5
    assert np.allclose(norm.I[0], [0.0, 1.0])
    back = space.unnormalize(norm)
    assert np.allclose(back.v, d.v, atol=1e-12)
    assert np.allclose(back.I, d.I, atol=1e-12)
    assert np.allclose(back.P, d.P, atol=1e-12)
    z = np.array([0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    dec = space.decode(z)
    assert np.array_equal(dec.v, [0.1, 0.2])
    assert np.array_equal(dec.I, [[0.3, 0.4]])
    assert np.array_equal(dec.P, [[0.5, 0.6]])


def test_design_space_clamps_out_of_bounds():
    space = DesignSpace(d_v=0, n_inj=1, n_prod=0, v_bounds=np.zeros((0, 2)),
                        xy_bounds=((-1.0, 1.0), (-1.0, 1.0)))
    norm, clamped = space.normalize(Design.create(I=[(1.5, 0.0)]))
    assert clamped and norm.I[0, 0] == 1.0


def test_penalize_invalid():
    raw = [1.0, 3.0, np.nan]
    out = penalize_invalid(raw)
    assert out[2] == pytest.approx(0.8)  # 1 - 0.1 * max(2, 1)
    clean = penalize_invalid([1.0, 3.0])
    assert np.array_equal(clean, [1.0, 3.0])
    assert penalize_invalid([5.0, np.inf, 5.5])[1] < 5.0
    with pytest.raises(ValueError):
        penalize_invalid([np.nan, np.nan])


def test_initial_design_deterministic_and_unique_wells():
    bench = make_benchmark("twoset_ablation", n_inj=2, n_prod=2)
    space = build_space(bench)
    mask = synthetic_mask("disk", 12, 12)
    interior = interior_score(mask)
    d1 = initial_design(space, 3, seed=5, mask=mask, interior=interior)
    d2 = initial_design(space, 3, seed=5, mask=mask, interior=interior)
    for a, b in zip(d1, d2):
        assert np.array_equal(a.I, b.I) and np.array_equal(a.P, b.P)
    for d in d1:
        pts = np.vstack([space.unnormalize(d).I, space.unnormalize(d).P])
        cells = {mask.cell_of(p) for p in pts}
        assert len(cells) == 4
        assert all(mask.feasible[i, j] for i, j in cells)


def test_initial_design_interior_bias():
    bench = make_benchmark("twoset_ablation", n_inj=1, n_prod=0)
    space = DesignSpace(d_v=0, n_inj=1, n_prod=0, v_bounds=np.zeros((0, 2)),
                        xy_bounds=((-1.0, 1.0), (-1.0, 1.0)))
    mask = synthetic_mask("two_lobes", 16, 16, seed=0)
    interior = interior_score(mask)
    counts = np.zeros_like(interior)
    designs = initial_design(space, 4096, seed=0, mask=mask, interior=interior)
    for d in designs:
        i, j = mask.cell_of(space.unnormalize(d).I[0])
        counts[i, j] += 1
    boundary = (interior == 1)
    inner = (interior >= interior[mask.feasible].max())
    assert counts[boundary].mean() < counts[inner].mean()


def test_run_trial_t0_and_counts():
    rec = run_trial(small_config(T=0), 0)
    assert len(rec.best_so_far) == 1
    assert rec.best_so_far[0] == max(e.raw_value for e in rec.evaluations)
    assert len(rec.evaluations) == 4


def test_run_trial_full_loop():
    cfg = small_config()
    rec = run_trial(cfg, 0)
    assert len(rec.evaluations) == cfg.total_evals == 4 + 2 * 2
    assert np.all(np.diff(rec.best_so_far) >= 0)
    assert rec.fit_failures == []


def test_run_trial_with_mask_and_barrier():
    cfg = small_config(feasibility=FeasibilityConfig(generator="disk",
                                                     nx=12, ny=12))
    rec = run_trial(cfg, 0)
    mask = synthetic_mask("disk", 12, 12)
    for e in rec.evaluations:
        pts = np.vstack([e.design.I, e.design.P])
        cells = [mask.cell_of(p) for p in pts]
        assert all(mask.feasible[i, j] for i, j in cells)
        assert len(set(cells)) == len(cells)


def test_run_experiment_determinism_and_summary():
    cfg = small_config(n_trials=2)
    rec1, s1 = run_experiment(cfg)
    rec2, s2 = run_experiment(cfg)
    for a, b in zip(rec1, rec2):
        assert np.array_equal(a.best_so_far, b.best_so_far)
        for ea, eb in zip(a.evaluations, b.evaluations):
            assert ea.raw_value == eb.raw_value
            assert np.array_equal(ea.design.I, eb.design.I)
    assert s1["auc"] == s2["auc"] and s1["final_best"] == s2["final_best"]
    assert [r.seed for r in rec1] == [cfg.base_seed, cfg.base_seed + 1]


def test_auc_and_final():
    rec = TrialStub([0.5, 1.0, 2.0, 3.0])
    assert auc_and_final(rec) == (6.0, 3.0)
    const = TrialStub([2.0, 2.0, 2.0])
    assert auc_and_final(const) == (4.0, 2.0)
    single = TrialStub([1.5, 4.0])
    assert auc_and_final(single) == (4.0, 4.0)


class TrialStub:
    def __init__(self, b):
        self.best_so_far = np.asarray(b, dtype=np.float64)


def test_minmax_normalize():
    out, flag = minmax_normalize_metrics({"a": [2.0, 4.0], "b": [6.0]})
    assert not flag
    assert np.allclose(out["a"], [0.0, 0.5]) and np.allclose(out["b"], [1.0])
    out2, _ = minmax_normalize_metrics({"a": [3.0 * 2 + 1, 3.0 * 4 + 1],
                                        "b": [3.0 * 6 + 1]})
    assert np.allclose(out2["a"], out["a"]) and np.allclose(out2["b"], out["b"])
    deg, flag = minmax_normalize_metrics({"a": [1.0, 1.0], "b": [1.0]})
    assert flag and np.all(deg["a"] == 0.5)


def test_selection_score():
    benchmarks = ["b1", "b2"]
    variants = ["v1", "v2"]
    auc = {("b1", "v1"): [1.0], ("b1", "v2"): [0.0],
           ("b2", "v1"): [0.0], ("b2", "v2"): [1.0]}
    final = dict(auc)
    scores, winner = selection_score(auc, final, benchmarks, variants)
    assert scores["v1"] == scores["v2"] == 0.5
    assert winner == "v1"  # tie broken by variant order

    auc2 = {("b1", "v1"): [1.0], ("b1", "v2"): [0.0],
            ("b2", "v1"): [1.0], ("b2", "v2"): [0.0]}
    scores2, winner2 = selection_score(auc2, auc2, benchmarks, variants)
    assert scores2["v1"] == 1.0 and winner2 == "v1"
