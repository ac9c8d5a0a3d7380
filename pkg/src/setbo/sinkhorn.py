"""Entropic optimal transport between small planar point sets.

Implements the regularized OT cost W_eps under uniform weights and the
debiased, non-negatively clamped Sinkhorn divergence

    S_eps(S, T) = max(0, W_eps(S, T) - W_eps(S, S)/2 - W_eps(T, T)/2).

Inputs are canonically sorted before solving, so the divergence is bitwise
invariant to permutations of either set.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from ._backend import sinkhorn_cost_batch, sinkhorn_self_cost_batch
from .sets import as_point_set, canonical_order, cost_matrix


@dataclass(frozen=True)
class SinkhornConfig:
    epsilon: float = 0.1
    max_iters: int = 200
    tol: float = 1e-6

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class OtResult:
    value: float
    iterations: int
    converged: bool


class NonConvergenceWarning(UserWarning):
    """Sinkhorn hit the iteration cap; the last iterate was returned."""


def entropic_ot_cost(S, T, cfg: SinkhornConfig) -> OtResult:
    """Regularized OT cost W_eps(S, T) with uniform weights.

    Non-convergence within cfg.max_iters returns the last iterate with
    ``converged=False``; it never raises.
    """
    C = cost_matrix(canonical_order(S), canonical_order(T))
    values, iters, conv = sinkhorn_cost_batch(
        C[None, :, :], cfg.epsilon, cfg.max_iters, cfg.tol
    )
    return OtResult(float(values[0]), int(iters[0]), bool(conv[0]))


class SelfTermCache:
    """Per-set cache of W_eps(S, S), keyed by the canonical byte image.

    Not thread-safe; use one cache per thread or per kernel-matrix build.
    """

    def __init__(self):
        self._store = {}

    def get(self, S_sorted: np.ndarray, cfg: SinkhornConfig) -> OtResult:
        key = (S_sorted.tobytes(), cfg.epsilon, cfg.max_iters, cfg.tol)
        hit = self._store.get(key)
        if hit is None:
            C = cost_matrix(S_sorted, S_sorted)
            values, iters, conv = sinkhorn_self_cost_batch(
                C[None, :, :], cfg.epsilon, cfg.max_iters, cfg.tol
            )
            hit = OtResult(float(values[0]), int(iters[0]), bool(conv[0]))
            self._store[key] = hit
        return hit


def sinkhorn_divergence(S, T, cfg: SinkhornConfig, cache: SelfTermCache | None = None) -> float:
    """Debiased Sinkhorn divergence, clamped non-negative.

    Symmetric in (S, T) and exactly zero for S == T as multisets.  Emits a
    NonConvergenceWarning if any of the three transport problems hits the
    iteration cap.
    """
    Ss = canonical_order(S)
    Ts = canonical_order(T)
    if Ss.shape == Ts.shape and Ss.tobytes() == Ts.tobytes():
        return 0.0
    cache = cache if cache is not None else SelfTermCache()
    cross = entropic_ot_cost(Ss, Ts, cfg)
    self_s = cache.get(Ss, cfg)
    self_t = cache.get(Ts, cfg)
    if not (cross.converged and self_s.converged and self_t.converged):
        warnings.warn(
            f"Sinkhorn did not converge within {cfg.max_iters} iterations "
            f"(eps={cfg.epsilon}); using last iterate",
            NonConvergenceWarning,
            stacklevel=2,
        )
    return max(0.0, cross.value - 0.5 * self_s.value - 0.5 * self_t.value)


def divergence_matrix(sets_a, sets_b, cfg: SinkhornConfig, symmetric: bool = False) -> np.ndarray:
    """All-pairs Sinkhorn divergences between two lists of equal-size sets.

    ``sets_a`` and ``sets_b`` are sequences of (m, 2) / (k, 2) arrays with a
    homogeneous size within each sequence; the cross problems are solved as a
    single compiled batch.  With ``symmetric=True`` the two sequences are the
    same list and only the upper triangle is solved.
    """
    A = [canonical_order(as_point_set(s)) for s in sets_a]
    Bv = A if symmetric else [canonical_order(as_point_set(s)) for s in sets_b]
    na, nb = len(A), len(Bv)

    cache = SelfTermCache()
    self_a = np.array([cache.get(s, cfg).value for s in A])
    self_b = self_a if symmetric else np.array([cache.get(s, cfg).value for s in Bv])

    keys_a = [s.tobytes() for s in A]
    keys_b = keys_a if symmetric else [s.tobytes() for s in Bv]
    if symmetric:
        pairs = [(i, j) for i in range(na) for j in range(i + 1, na)]
    else:
        pairs = [(i, j) for i in range(na) for j in range(nb)]
    # Bitwise-equal sets have divergence exactly zero; skip the solve.
    pairs = [(i, j) for i, j in pairs if keys_a[i] != keys_b[j]]
    out = np.zeros((na, nb))
    if pairs:
        C = np.stack([cost_matrix(A[i], Bv[j]) for i, j in pairs])
        values, _, conv = sinkhorn_cost_batch(C, cfg.epsilon, cfg.max_iters, cfg.tol)
        if not conv.all():
            warnings.warn(
                f"Sinkhorn did not converge for {int((~conv).sum())} of "
                f"{len(pairs)} pairs (eps={cfg.epsilon}); using last iterates",
                NonConvergenceWarning,
                stacklevel=2,
            )
        for (i, j), w in zip(pairs, values):
            d = max(0.0, w - 0.5 * self_a[i] - 0.5 * self_b[j])
            out[i, j] = d
            if symmetric:
                out[j, i] = d
    return out
