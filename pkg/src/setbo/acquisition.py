"""Monte-Carlo qLogEI acquisition and its multi-start optimizer.

Improvement is smoothed twice: a softplus with temperature tau0 replaces the
hinge, and a tempered logsumexp with temperature tau_max replaces the batch
max.  Everything is computed in log space so far-from-incumbent batches give
large negative values instead of underflowing to -inf.  Candidates live in
the normalized [0,1] cube; a caller-supplied decoder turns a (q, dim) array
into Design objects for the surrogate.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky
from scipy.special import logsumexp
from scipy.stats import norm, qmc

from .gp import GpModel, posterior


@dataclass
class AcquisitionConfig:
    q: int = 1
    mc_samples: int = 128
    tau_softplus: float = 1e-4
    tau_max: float = 1e-2
    restarts: int = 10
    raw_samples: int = 256
    ascent_steps: int = 50
    fd_step: float = 1e-3

    def __post_init__(self):
        vals = [self.q, self.mc_samples, self.tau_softplus, self.tau_max,
                self.restarts, self.raw_samples, self.ascent_steps, self.fd_step]
        if any(v <= 0 for v in vals):
            raise ValueError("all acquisition parameters must be positive")


def draw_base_samples(m: int, q: int, seed: int) -> np.ndarray:
    """M x q standard normals, fixed per BO iteration (common random numbers).

    Drawn as scrambled-Sobol quasi-Monte-Carlo normals; the variance reduction
    is what makes moderate sample counts track the analytic q=1 EI closely.
    """
    sampler = qmc.Sobol(d=q, scramble=True, seed=seed)
    k = int(np.ceil(np.log2(max(m, 2))))
    u = sampler.random_base2(k)[:m]
    return norm.ppf(np.clip(u, 1e-12, 1.0 - 1e-12))


def _log_softplus(z: np.ndarray, tau: float) -> np.ndarray:
    """log(tau * log1p(exp(z / tau))), stable across the whole real line."""
    u = z / tau
    out = np.empty_like(u)
    hi = u > 30.0
    lo = u < -30.0
    mid = ~(hi | lo)
    # log1p(exp(u)) ~ u for large u, ~ exp(u) for very negative u.
    out[hi] = np.log(u[hi])
    out[lo] = u[lo]
    out[mid] = np.log(np.log1p(np.exp(u[mid])))
    return out + np.log(tau)


def _sample_chol(cov: np.ndarray) -> np.ndarray:
    n = cov.shape[0]
    scale = max(float(np.mean(np.diag(cov))), 1e-300)
    for level in (0.0, 1e-12, 1e-10, 1e-8, 1e-6):
        try:
            return cholesky(cov + level * scale * np.eye(n), lower=True)
        except np.linalg.LinAlgError:
            continue
    raise np.linalg.LinAlgError("posterior covariance not factorizable")


def qlogei_from_moments(mean: np.ndarray, cov: np.ndarray, f_best: float,
                        cfg: AcquisitionConfig, base_samples: np.ndarray) -> float:
    """Smoothed log expected improvement of a Gaussian batch (mean, cov)."""
    L = _sample_chol(cov)
    xi = mean[None, :] + base_samples @ L.T  # (M, q)
    a = _log_softplus(xi - f_best, cfg.tau_softplus)
    b = cfg.tau_max * logsumexp(a / cfg.tau_max, axis=1)
    return float(logsumexp(b) - np.log(b.shape[0]))


def qlogei(model: GpModel, Xq, f_best: float, cfg: AcquisitionConfig,
           base_samples: np.ndarray) -> float:
    """Smoothed log expected improvement of a candidate batch.

    ``f_best`` is the incumbent in standardized target units.  ``base_samples``
    must be an (M, q) matrix of standard normals shared across all candidate
    batches of the iteration.
    """
    post = posterior(model, Xq)
    return qlogei_from_moments(post.mean, post.cov, f_best, cfg, base_samples)


def barrier_penalty(points, field, margin: float, weight: float,
                    sharpness: float) -> float:
    """Soft feasibility barrier from a signed distance field.

    weight * sum over points of softplus((margin - sdf) * sharpness) / sharpness;
    near zero deep inside the feasible region, growing linearly outside.
    """
    if weight == 0.0:
        return 0.0
    total = 0.0
    for p in np.asarray(points, dtype=np.float64).reshape(-1, 2):
        z = (margin - field.value_at(p)) * sharpness
        total += np.logaddexp(0.0, z) / sharpness
    return weight * total


def _sobol_batches(n: int, dim: int, seed: int) -> np.ndarray:
    sampler = qmc.Sobol(d=dim, scramble=True, seed=seed)
    k = int(np.ceil(np.log2(max(n, 1))))
    return sampler.random_base2(k)[:n]


def optimize_acquisition(model: GpModel, dim: int, f_best: float,
                         cfg: AcquisitionConfig, decode, penalty_fn=None,
                         seed: int = 0):
    """Maximize qlogei minus penalty over batches in the [0,1] cube.

    ``decode`` maps a (q, dim) normalized array to a list of q Designs for the
    surrogate; ``penalty_fn`` (optional) maps the same array to a nonnegative
    barrier value.  Raw Sobol batches seed a top-``restarts`` refinement by
    projected ascent on central finite-difference gradients.  Deterministic
    given ``seed``.  Returns (batch, value).
    """
    base = draw_base_samples(cfg.mc_samples, cfg.q, seed)

    def objective(flat):
        Z = flat.reshape(cfg.q, dim)
        val = qlogei(model, decode(Z), f_best, cfg, base)
        if penalty_fn is not None:
            val -= penalty_fn(Z)
        return val

    raw = _sobol_batches(cfg.raw_samples, cfg.q * dim, seed)
    raw_vals = np.array([objective(z) for z in raw])
    order = np.argsort(-raw_vals, kind="stable")[:cfg.restarts]

    best_flat = raw[order[0]]
    best_val = raw_vals[order[0]]
    for idx in order:
        flat = raw[idx].copy()
        val = objective(flat)
        lr = 0.1
        for _ in range(cfg.ascent_steps):
            grad = np.zeros_like(flat)
            for i in range(len(flat)):
                zp, zm = flat.copy(), flat.copy()
                zp[i] = min(1.0, flat[i] + cfg.fd_step)
                zm[i] = max(0.0, flat[i] - cfg.fd_step)
                if zp[i] == zm[i]:
                    continue
                grad[i] = (objective(zp) - objective(zm)) / (zp[i] - zm[i])
            gmax = float(np.max(np.abs(grad)))
            if gmax == 0.0:
                break
            moved = False
            while lr * gmax >= 1e-8:
                cand = np.clip(flat + lr * grad / gmax, 0.0, 1.0)
                cval = objective(cand)
                if cval > val:
                    flat, val = cand, cval
                    lr = min(lr * 2.0, 0.5)
                    moved = True
                    break
                lr *= 0.5
            if not moved:
                break
        if val > best_val:
            best_flat, best_val = flat, val
    return best_flat.reshape(cfg.q, dim), float(best_val)
