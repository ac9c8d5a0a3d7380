import os

import numpy as np
import pytest

from setbo.feasibility import (
    GridMask,
    InfeasibleDesignError,
    interior_score,
    read_mask,
    sdf_from_mask,
    snap_design,
    synthetic_mask,
    write_mask,
)
from setbo.kernels import Design


def brute_chebyshev_interior(feasible):
    """All-pairs oracle: distance to nearest infeasible or out-of-grid cell."""
    nx, ny = feasible.shape
    out = np.zeros((nx, ny))
    blocked = [(i, j) for i in range(-1, nx + 1) for j in range(-1, ny + 1)
               if not (0 <= i < nx and 0 <= j < ny) or not feasible[i, j]]
    for i in range(nx):
        for j in range(ny):
            if feasible[i, j]:
                out[i, j] = min(max(abs(i - a), abs(j - b)) for a, b in blocked)
    return out


def test_interior_score_full_grid():
    mask = synthetic_mask("full", 5, 5)
    score = interior_score(mask)
    assert score[2, 2] == 3
    assert score[0, 0] == 1 and score[4, 4] == 1
    assert np.array_equal(score, brute_chebyshev_interior(mask.feasible))


def test_interior_score_single_cell_and_infeasible():
    feas = np.zeros((4, 4), dtype=bool)
    feas[1, 2] = True
    mask = GridMask(nx=4, ny=4, cell_size=0.5, origin=(0.0, 0.0), feasible=feas)
    score = interior_score(mask)
    assert score[1, 2] == 1
    assert score[0, 0] == 0


def test_interior_score_matches_bruteforce_random():
    rng = np.random.default_rng(0)
    feas = rng.random((7, 6)) < 0.7
    feas[3, 3] = True
    mask = GridMask(nx=7, ny=6, cell_size=1.0, origin=(0.0, 0.0), feasible=feas)
    assert np.array_equal(interior_score(mask), brute_chebyshev_interior(feas))


def brute_sdf(feasible, cell_size):
    nx, ny = feasible.shape
    out = np.zeros((nx, ny))
    outside = [(i, j) for i in range(-1, nx + 1) for j in range(-1, ny + 1)
               if not (0 <= i < nx and 0 <= j < ny) or not feasible[i, j]]
    inside = [(i, j) for i in range(nx) for j in range(ny) if feasible[i, j]]
    for i in range(nx):
        for j in range(ny):
            if feasible[i, j]:
                d = min(np.hypot(i - a, j - b) for a, b in outside)
                out[i, j] = d * cell_size
            else:
                d = min(np.hypot(i - a, j - b) for a, b in inside)
                out[i, j] = -d * cell_size
    return out


def test_sdf_matches_bruteforce():
    rng = np.random.default_rng(1)
    feas = rng.random((6, 5)) < 0.6
    feas[2, 2] = True
    mask = GridMask(nx=6, ny=5, cell_size=0.25, origin=(-1.0, -1.0), feasible=feas)
    sdf = sdf_from_mask(mask)
    assert np.allclose(sdf.values, brute_sdf(feas, 0.25), atol=1e-12)
    # Sign matches the mask at every cell center.
    assert np.array_equal(sdf.values > 0, feas)


def test_sdf_adjacent_cell_value_and_all_feasible():
    feas = np.ones((5, 5), dtype=bool)
    feas[2, 2] = False
    mask = GridMask(nx=5, ny=5, cell_size=0.3, origin=(0.0, 0.0), feasible=feas)
    sdf = sdf_from_mask(mask)
    assert sdf.values[2, 3] == pytest.approx(0.3)
    full = sdf_from_mask(synthetic_mask("full", 6, 6))
    assert np.all(full.values > 0)


def test_sdf_bilinear_interpolation():
    mask = synthetic_mask("full", 6, 6)
    sdf = sdf_from_mask(mask)
    c00 = mask.cell_center(2, 2)
    c10 = mask.cell_center(3, 2)
    mid = 0.5 * (c00 + c10)
    expect = 0.5 * (sdf.values[2, 2] + sdf.values[3, 2])
    assert sdf.value_at(mid) == pytest.approx(expect, abs=1e-12)
    assert sdf.value_at(c00) == pytest.approx(sdf.values[2, 2], abs=1e-12)


def test_snap_design_identity_on_feasible_center():
    mask = synthetic_mask("full", 8, 8)
    interior = interior_score(mask)
    center = mask.cell_center(5, 3)
    d = Design.create(I=center[None, :], P=np.zeros((0, 2)))
    snapped = snap_design(d, mask, interior)
    assert np.allclose(snapped.I[0], center, atol=1e-12)


def test_snap_design_infeasible_point_bruteforce():
    mask = synthetic_mask("disk", 10, 10)
    interior = interior_score(mask)
    p = np.array([0.9, 0.9])  # outside the disk
    d = Design.create(I=p[None, :])
    snapped = snap_design(d, mask, interior, k_nearest=8)
    # Brute-force: among the 8 nearest feasible centers, lexicographic best.
    feas_idx = np.flatnonzero(mask.feasible.ravel())
    centers = mask.cell_centers()[feas_idx]
    scores = interior.ravel()[feas_idx]
    dist = np.linalg.norm(centers - p, axis=1)
    near = np.argsort(dist, kind="stable")[:8]
    best = min(near, key=lambda t: (-scores[t], dist[t], feas_idx[t]))
    assert np.allclose(snapped.I[0], centers[best], atol=1e-12)
    i, j = mask.cell_of(snapped.I[0])
    assert mask.feasible[i, j]


def test_snap_design_uniqueness_and_idempotence():
    mask = synthetic_mask("two_lobes", 12, 12, seed=3)
    interior = interior_score(mask)
    rng = np.random.default_rng(4)
    target = mask.cell_center(4, 6)
    d = Design.create(
        I=np.tile(target, (3, 1)), P=rng.uniform(-0.8, 0.8, (4, 2))
    )
    snapped = snap_design(d, mask, interior)
    cells = [mask.cell_of(p) for p in np.vstack([snapped.I, snapped.P])]
    assert len(set(cells)) == len(cells)
    assert all(mask.feasible[i, j] for i, j in cells)
    again = snap_design(snapped, mask, interior)
    assert np.array_equal(again.I, snapped.I) and np.array_equal(again.P, snapped.P)


def test_snap_design_insufficient_cells():
    feas = np.zeros((4, 4), dtype=bool)
    feas[0, 0] = feas[1, 1] = True
    mask = GridMask(nx=4, ny=4, cell_size=0.5, origin=(0.0, 0.0), feasible=feas)
    d = Design.create(I=np.zeros((3, 2)))
    with pytest.raises(InfeasibleDesignError):
        snap_design(d, mask, interior_score(mask))


def test_snap_displacement_bound_full_mask():
    mask = synthetic_mask("full", 10, 10)
    interior = interior_score(mask)
    rng = np.random.default_rng(5)
    for _ in range(20):
        p = rng.uniform(-0.9, 0.9, 2)
        snapped = snap_design(Design.create(I=p[None, :]), mask, interior)
        # With a full mask the nearest cells tie on interior score away from
        # the boundary, so displacement stays within one cell diagonal.
        assert np.linalg.norm(snapped.I[0] - p) <= mask.cell_size * np.sqrt(2)


def test_synthetic_masks():
    assert synthetic_mask("full", 5, 7).feasible.all()
    m1 = synthetic_mask("two_lobes", 16, 16, seed=2)
    m2 = synthetic_mask("two_lobes", 16, 16, seed=2)
    assert np.array_equal(m1.feasible, m2.feasible)
    l = synthetic_mask("l_shape", 8, 8)
    assert not l.feasible.all() and l.feasible.any()
    with pytest.raises(ValueError):
        synthetic_mask("full", 3, 8)
    with pytest.raises(ValueError):
        synthetic_mask("hexagon", 8, 8)


def test_mask_file_roundtrip(tmp_path):
    mask = synthetic_mask("two_lobes", 9, 7, seed=1)
    path = os.path.join(tmp_path, "mask.txt")
    write_mask(mask, path)
    back = read_mask(path)
    assert back.nx == mask.nx and back.ny == mask.ny
    assert back.cell_size == mask.cell_size and back.origin == tuple(mask.origin)
    assert np.array_equal(back.feasible, mask.feasible)
