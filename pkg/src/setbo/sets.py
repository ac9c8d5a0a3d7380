"""Planar point-set primitives shared by the divergence and kernel code.

A point set is a float64 array of shape (m, 2) interpreted as an unordered
multiset.  Operations that must be exactly permutation-invariant sort their
inputs into a canonical lexicographic order first, so that the floating-point
reduction order is identical for any input permutation.
"""

import numpy as np


def as_point_set(points) -> np.ndarray:
    """Validate and return a (m, 2) float64 point set with m >= 1."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1 and pts.size == 2:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"point set must have shape (m, 2), got {pts.shape}")
    if pts.shape[0] < 1:
        raise ValueError("point set must contain at least one point")
    if not np.all(np.isfinite(pts)):
        raise ValueError("point set contains non-finite coordinates")
    return pts


def canonical_order(points: np.ndarray) -> np.ndarray:
    """Sort points lexicographically by (x, y).

    Any two permutations of the same multiset map to the same array, which
    makes downstream reductions bitwise permutation-invariant.
    """
    pts = as_point_set(points)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    return pts[order]


def cost_matrix(S, T) -> np.ndarray:
    """Pairwise Euclidean distances, shape (|S|, |T|)."""
    S = as_point_set(S)
    T = as_point_set(T)
    diff = S[:, None, :] - T[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def interaction_set(I, P) -> np.ndarray:
    """Cross-group displacement set {p_b - i_a}, cardinality |I|*|P|.

    Row-major order: index a*|P| + b holds P[b] - I[a].  Consumers must not
    rely on this ordering; it is fixed only for reproducibility.
    """
    I = as_point_set(I)
    P = as_point_set(P)
    return (P[None, :, :] - I[:, None, :]).reshape(-1, 2)
