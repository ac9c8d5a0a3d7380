"""Covariance functions over structured designs.

A design x = (v, I, P) combines an auxiliary vector v with unordered injector
and producer point sets.  Kernels here:

* the permutation-invariant composite kernel: Matern-5/2 radialization of an
  additive squared distance mixing ARD vector terms with Sinkhorn divergences
  between the injector, producer, and interaction sets;
* Double-Sum (DS) and Deep-Embedding (DE) set-kernel baselines;
* a non-invariant Matern kernel on the flattened coordinate vector.

Single-set problems use d_v = 0 and an empty producer set; empty components
contribute nothing to any composite form.
"""

from dataclasses import dataclass, field

import numpy as np

from .sets import as_point_set, interaction_set
from .sinkhorn import SelfTermCache, SinkhornConfig, sinkhorn_divergence

SQRT5 = np.sqrt(5.0)


@dataclass(frozen=True)
class Design:
    """Structured input: auxiliary vector plus injector/producer point sets."""

    v: np.ndarray
    I: np.ndarray
    P: np.ndarray

    @staticmethod
    def create(v=(), I=(), P=()) -> "Design":
        v = np.atleast_1d(np.asarray(v, dtype=np.float64))
        I = np.asarray(I, dtype=np.float64).reshape(-1, 2)
        P = np.asarray(P, dtype=np.float64).reshape(-1, 2)
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(I)) and np.all(np.isfinite(P))):
            raise ValueError("design contains non-finite values")
        return Design(v=v, I=I, P=P)

    @staticmethod
    def single_set(points) -> "Design":
        """Degenerate shape used by the single-set benchmarks."""
        return Design.create(v=(), I=as_point_set(points), P=())

    @property
    def n_inj(self) -> int:
        return self.I.shape[0]

    @property
    def n_prod(self) -> int:
        return self.P.shape[0]

    @property
    def d_v(self) -> int:
        return self.v.shape[0]

    def interaction(self) -> np.ndarray | None:
        if self.n_inj == 0 or self.n_prod == 0:
            return None
        return interaction_set(self.I, self.P)

    def flatten(self) -> np.ndarray:
        """Fixed flattening order: v, then I rows, then P rows."""
        return np.concatenate([self.v, self.I.ravel(), self.P.ravel()])

    def same_shape(self, other: "Design") -> bool:
        return (
            self.d_v == other.d_v
            and self.n_inj == other.n_inj
            and self.n_prod == other.n_prod
        )


def check_same_shape(x: Design, y: Design) -> None:
    if not x.same_shape(y):
        raise ValueError(
            f"design shape mismatch: ({x.d_v},{x.n_inj},{x.n_prod}) vs "
            f"({y.d_v},{y.n_inj},{y.n_prod})"
        )


@dataclass
class GpPermHyperparams:
    """Composite-kernel hyperparameters; positive quantities, linear scale."""

    ell_v: np.ndarray = field(default_factory=lambda: np.ones(0))
    ell_I: float = 1.0
    ell_P: float = 1.0
    ell_IP: float = 1.0
    out_scale: float = 1.0
    noise: float = 1e-4
    eps: float = 0.1
    ip_weight: float = 1.0  # 0 or 1; configuration switch, not learned

    def __post_init__(self):
        self.ell_v = np.atleast_1d(np.asarray(self.ell_v, dtype=np.float64))
        pos = [self.ell_I, self.ell_P, self.ell_IP, self.out_scale, self.eps]
        if np.any(self.ell_v <= 0) or any(p <= 0 for p in pos):
            raise ValueError("lengthscales, out_scale, and eps must be positive")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")
        if self.ip_weight not in (0.0, 1.0):
            raise ValueError("ip_weight must be 0 or 1")


@dataclass
class SetKernelHyperparams:
    """Hyperparameters for the DS/DE composite baselines."""

    base_ell: float = 1.0
    outer_ell: float = 1.0  # DE only
    ell_v: np.ndarray = field(default_factory=lambda: np.ones(0))
    scale_vec: float = 1.0
    scale_I: float = 1.0
    scale_P: float = 1.0
    scale_R: float = 1.0
    noise: float = 1e-4

    def __post_init__(self):
        self.ell_v = np.atleast_1d(np.asarray(self.ell_v, dtype=np.float64))
        pos = [self.base_ell, self.outer_ell, self.scale_vec, self.scale_I,
               self.scale_P, self.scale_R]
        if np.any(self.ell_v <= 0) or any(p <= 0 for p in pos):
            raise ValueError("lengthscales and output scales must be positive")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")


def matern52(d, out_scale: float = 1.0):
    """Matern-5/2 radial profile out_scale * (1 + √5 d + 5d²/3) exp(-√5 d)."""
    d = np.asarray(d, dtype=np.float64)
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    val = out_scale * (1.0 + SQRT5 * d + (5.0 / 3.0) * d * d) * np.exp(-SQRT5 * d)
    return float(val) if val.ndim == 0 else val


def matern52_deriv_wrt_d2(d, out_scale: float = 1.0):
    """d matern52 / d(d²); finite at d = 0 (equals -5/6 out_scale)."""
    d = np.asarray(d, dtype=np.float64)
    return -out_scale * (5.0 / 6.0) * (1.0 + SQRT5 * d) * np.exp(-SQRT5 * d)


def gp_perm_distance2(
    x: Design,
    y: Design,
    h: GpPermHyperparams,
    cfg: SinkhornConfig | None = None,
    cache: SelfTermCache | None = None,
) -> float:
    """Additive squared distance of the permutation-invariant composite kernel.

    Sum of ARD vector terms and per-component Sinkhorn divergences scaled by
    their lengthscales; empty components contribute 0.
    """
    check_same_shape(x, y)
    cfg = cfg or SinkhornConfig(epsilon=h.eps)
    d2 = 0.0
    if x.d_v:
        dv = (x.v - y.v) / h.ell_v
        d2 += float(np.dot(dv, dv))
    if x.n_inj:
        d2 += sinkhorn_divergence(x.I, y.I, cfg, cache) / h.ell_I**2
    if x.n_prod:
        d2 += sinkhorn_divergence(x.P, y.P, cfg, cache) / h.ell_P**2
    if h.ip_weight and x.n_inj and x.n_prod:
        d2 += (
            h.ip_weight
            * sinkhorn_divergence(x.interaction(), y.interaction(), cfg, cache)
            / h.ell_IP**2
        )
    return d2


def gp_perm_kernel(
    x: Design,
    y: Design,
    h: GpPermHyperparams,
    cfg: SinkhornConfig | None = None,
    cache: SelfTermCache | None = None,
) -> float:
    d2 = gp_perm_distance2(x, y, h, cfg, cache)
    return matern52(np.sqrt(d2), h.out_scale)


def _rbf_cross_mean(S: np.ndarray, T: np.ndarray, base_ell: float) -> float:
    diff = S[:, None, :] - T[None, :, :]
    sq = np.sum(diff * diff, axis=2)
    return float(np.mean(np.exp(-sq / (2.0 * base_ell**2))))


def ds_set_kernel(S, T, base_ell: float) -> float:
    """Double-sum kernel: mean RBF similarity over all cross-element pairs."""
    return _rbf_cross_mean(as_point_set(S), as_point_set(T), base_ell)


def de_set_kernel(S, T, base_ell: float, outer_ell: float) -> float:
    """Radial kernel on the biased (V-statistic) squared MMD between sets."""
    S = as_point_set(S)
    T = as_point_set(T)
    mmd2 = (
        _rbf_cross_mean(S, S, base_ell)
        + _rbf_cross_mean(T, T, base_ell)
        - 2.0 * _rbf_cross_mean(S, T, base_ell)
    )
    mmd2 = max(0.0, mmd2)  # guard tiny negative roundoff
    return float(np.exp(-mmd2 / (2.0 * outer_ell**2)))


def ard_distance(u: np.ndarray, w: np.ndarray, ell: np.ndarray) -> float:
    dv = (u - w) / ell
    return float(np.sqrt(np.dot(dv, dv)))


def composite_baseline_kernel(
    x: Design, y: Design, h: SetKernelHyperparams, which: str
) -> float:
    """Additive composition of a vector Matern term and per-set DS/DE terms."""
    if which not in ("DS", "DE"):
        raise ValueError(f"unknown set kernel {which!r}")
    check_same_shape(x, y)

    def set_term(S, T):
        if which == "DS":
            return ds_set_kernel(S, T, h.base_ell)
        return de_set_kernel(S, T, h.base_ell, h.outer_ell)

    val = 0.0
    if x.d_v:
        val += h.scale_vec * matern52(ard_distance(x.v, y.v, h.ell_v))
    if x.n_inj:
        val += h.scale_I * set_term(x.I, y.I)
    if x.n_prod:
        val += h.scale_P * set_term(x.P, y.P)
    if x.n_inj and x.n_prod:
        val += h.scale_R * set_term(x.interaction(), y.interaction())
    return val


def flat_baseline_kernel(x: Design, y: Design, ell, out_scale: float) -> float:
    """Non-invariant control: Matern-5/2 on the ARD-scaled flattened vectors."""
    check_same_shape(x, y)
    u, w = x.flatten(), y.flatten()
    ell = np.broadcast_to(np.asarray(ell, dtype=np.float64), u.shape)
    if u.shape != w.shape:
        raise ValueError("flattened length mismatch")
    return matern52(ard_distance(u, w, ell), out_scale)
