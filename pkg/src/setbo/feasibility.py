"""Grid feasibility masks, interior scores, signed distance fields, snapping.

A mask is a boolean nx-by-ny grid of feasible cells with a physical cell size
and origin.  The interior score (Chebyshev distance to the nearest infeasible
or out-of-grid cell) biases sampling toward interior cells; the signed
Euclidean distance field supports the differentiable acquisition barrier; and
snap_design moves continuous candidates onto unique feasible cell centers.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import distance_transform_cdt, distance_transform_edt

from .kernels import Design


class InfeasibleDesignError(RuntimeError):
    """Not enough feasible cells for the requested number of wells."""


@dataclass
class GridMask:
    nx: int
    ny: int
    cell_size: float
    origin: tuple
    feasible: np.ndarray  # bool, shape (nx, ny); [i, j] = cell i along x, j along y

    def __post_init__(self):
        self.feasible = np.asarray(self.feasible, dtype=bool)
        if self.nx < 1 or self.ny < 1 or self.cell_size <= 0:
            raise ValueError("invalid mask dimensions")
        if self.feasible.shape != (self.nx, self.ny):
            raise ValueError("feasible grid shape mismatch")
        if not self.feasible.any():
            raise ValueError("mask needs at least one feasible cell")

    def cell_center(self, i, j) -> np.ndarray:
        return np.array([
            self.origin[0] + (np.asarray(i) + 0.5) * self.cell_size,
            self.origin[1] + (np.asarray(j) + 0.5) * self.cell_size,
        ]).T

    def cell_centers(self) -> np.ndarray:
        """(nx*ny, 2) centers in row-major (i, j) order."""
        ii, jj = np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="ij")
        return self.cell_center(ii.ravel(), jj.ravel())

    def cell_of(self, p) -> tuple:
        """Indices of the cell containing point p, clipped to the grid."""
        p = np.asarray(p, dtype=np.float64)
        i = int(np.clip((p[0] - self.origin[0]) // self.cell_size, 0, self.nx - 1))
        j = int(np.clip((p[1] - self.origin[1]) // self.cell_size, 0, self.ny - 1))
        return i, j

    @property
    def bounds(self):
        """((x_lo, x_hi), (y_lo, y_hi)) of the grid extent."""
        return (
            (self.origin[0], self.origin[0] + self.nx * self.cell_size),
            (self.origin[1], self.origin[1] + self.ny * self.cell_size),
        )


def interior_score(mask: GridMask) -> np.ndarray:
    """Chebyshev distance of each feasible cell to the nearest infeasible or
    out-of-grid cell; infeasible cells score 0."""
    padded = np.zeros((mask.nx + 2, mask.ny + 2), dtype=bool)
    padded[1:-1, 1:-1] = mask.feasible
    dist = distance_transform_cdt(padded, metric="chessboard")
    return dist[1:-1, 1:-1].astype(np.float64)


@dataclass
class SdfField:
    """Signed distance to the feasibility boundary, in coordinate units.

    Positive inside the feasible region, negative outside; bilinear
    interpolation between cell centers for off-grid queries.
    """

    mask: GridMask
    values: np.ndarray = field(init=False)

    def __post_init__(self):
        feas = self.mask.feasible
        # Out-of-grid counts as infeasible, so the field is positive even on
        # an all-feasible mask and the barrier keeps wells inside the domain.
        padded = np.zeros((self.mask.nx + 2, self.mask.ny + 2), dtype=bool)
        padded[1:-1, 1:-1] = feas
        d_out = distance_transform_edt(padded)[1:-1, 1:-1]
        d_in = distance_transform_edt(~feas)
        self.values = np.where(feas, d_out, -d_in) * self.mask.cell_size

    def value_at(self, p) -> float:
        """Bilinear interpolation of the field at point p."""
        m = self.mask
        gx = (p[0] - m.origin[0]) / m.cell_size - 0.5
        gy = (p[1] - m.origin[1]) / m.cell_size - 0.5
        gx = float(np.clip(gx, 0.0, m.nx - 1.0))
        gy = float(np.clip(gy, 0.0, m.ny - 1.0))
        i0 = min(int(gx), m.nx - 2) if m.nx > 1 else 0
        j0 = min(int(gy), m.ny - 2) if m.ny > 1 else 0
        i1 = min(i0 + 1, m.nx - 1)
        j1 = min(j0 + 1, m.ny - 1)
        fx = gx - i0
        fy = gy - j0
        v = self.values
        return float(
            v[i0, j0] * (1 - fx) * (1 - fy)
            + v[i1, j0] * fx * (1 - fy)
            + v[i0, j1] * (1 - fx) * fy
            + v[i1, j1] * fx * fy
        )


def sdf_from_mask(mask: GridMask) -> SdfField:
    return SdfField(mask)


def snap_design(candidate: Design, mask: GridMask, interior: np.ndarray,
                k_nearest: int = 8) -> Design:
    """Snap each well to a unique feasible cell center.

    Wells are processed in stored order (injectors then producers).  A well
    whose containing cell is feasible and unassigned keeps that cell (so
    snapping is idempotent and displacement is bounded by half a diagonal);
    otherwise the k_nearest unassigned feasible cells by center distance are
    ranked lexicographically by (interior score, -distance, cell index) and
    the best is taken.  The auxiliary vector passes through unchanged.
    """
    n_wells = candidate.n_inj + candidate.n_prod
    feas_idx = np.flatnonzero(mask.feasible.ravel())
    if len(feas_idx) < n_wells:
        raise InfeasibleDesignError(
            f"{len(feas_idx)} feasible cells for {n_wells} wells"
        )
    centers = mask.cell_centers()[feas_idx]
    scores = interior.ravel()[feas_idx]
    taken = np.zeros(len(feas_idx), dtype=bool)
    flat_of = {int(f): t for t, f in enumerate(feas_idx)}

    def snap_point(p):
        i, j = mask.cell_of(p)
        home = flat_of.get(i * mask.ny + j)
        if home is not None and not taken[home]:
            taken[home] = True
            return centers[home]
        avail = np.flatnonzero(~taken)
        d = np.linalg.norm(centers[avail] - np.asarray(p, dtype=np.float64), axis=1)
        k = min(k_nearest, len(avail))
        near = avail[np.argsort(d, kind="stable")[:k]]
        d_near = np.linalg.norm(centers[near] - np.asarray(p), axis=1)
        # Highest interior score, then smallest distance, then smallest index.
        best = min(
            range(len(near)),
            key=lambda t: (-scores[near[t]], d_near[t], feas_idx[near[t]]),
        )
        taken[near[best]] = True
        return centers[near[best]]

    new_I = np.array([snap_point(p) for p in candidate.I]).reshape(-1, 2)
    new_P = np.array([snap_point(p) for p in candidate.P]).reshape(-1, 2)
    return Design.create(v=candidate.v, I=new_I, P=new_P)


def synthetic_mask(generator: str, nx: int, ny: int, seed: int = 0) -> GridMask:
    """Deterministic procedural masks; two_lobes and l_shape are non-convex."""
    if nx < 4 or ny < 4:
        raise ValueError("mask needs nx, ny >= 4")
    cell = 2.0 / max(nx, ny)
    origin = (-0.5 * nx * cell, -0.5 * ny * cell)
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    cx = (ii + 0.5) / nx - 0.5
    cy = (jj + 0.5) / ny - 0.5
    if generator == "full":
        feas = np.ones((nx, ny), dtype=bool)
    elif generator == "disk":
        feas = cx**2 + cy**2 <= 0.45**2
    elif generator == "two_lobes":
        rng = np.random.default_rng(seed)
        c1 = np.array([-0.25, 0.0]) + 0.05 * rng.standard_normal(2)
        c2 = np.array([0.25, 0.0]) + 0.05 * rng.standard_normal(2)
        lobe1 = (cx - c1[0]) ** 2 + (cy - c1[1]) ** 2 <= 0.22**2
        lobe2 = (cx - c2[0]) ** 2 + (cy - c2[1]) ** 2 <= 0.22**2
        bridge = (np.abs(cy) <= 0.04) & (np.abs(cx) <= 0.3)
        feas = lobe1 | lobe2 | bridge
    elif generator == "l_shape":
        feas = (cx <= 0.0) | (cy <= 0.0)
    else:
        raise ValueError(f"unknown mask generator {generator!r}")
    return GridMask(nx=nx, ny=ny, cell_size=cell, origin=origin, feasible=feas)


def write_mask(mask: GridMask, path) -> None:
    """Plain-text mask format; row 0 of the body is the minimum-y row."""
    with open(path, "w") as fh:
        fh.write(f"{mask.nx} {mask.ny} {mask.cell_size:.17g} "
                 f"{mask.origin[0]:.17g} {mask.origin[1]:.17g}\n")
        for j in range(mask.ny):
            fh.write("".join("1" if mask.feasible[i, j] else "0"
                             for i in range(mask.nx)) + "\n")


def read_mask(path) -> GridMask:
    with open(path) as fh:
        header = fh.readline().split()
        nx, ny = int(header[0]), int(header[1])
        cell_size = float(header[2])
        origin = (float(header[3]), float(header[4]))
        feas = np.zeros((nx, ny), dtype=bool)
        for j in range(ny):
            row = fh.readline().strip()
            if len(row) != nx:
                raise ValueError(f"mask row {j} has length {len(row)}, expected {nx}")
            feas[:, j] = [ch == "1" for ch in row]
    return GridMask(nx=nx, ny=ny, cell_size=cell_size, origin=origin, feasible=feas)
