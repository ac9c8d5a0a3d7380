"""Exact Gaussian-process regression over structured designs.

Targets are standardized, the noisy Gram matrix is factorized with a staged
jitter ladder, hyperparameters are fit by multi-start gradient ascent with
backtracking on the log-parameters, and posteriors are symmetrized and
eigenvalue-clamped so downstream sampling always sees a valid covariance.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, eigh, solve_triangular
from scipy.optimize import minimize

from .gram import build_kernel_model
from .kernels import Design

LOG_2PI = np.log(2.0 * np.pi)
JITTER_LEVELS = (1e-6, 1e-5, 1e-4, 1e-3)
NOISE_FLOOR = 1e-6
SD_FLOOR = 1e-12
EIG_FLOOR = 1e-12


class ModelFitError(RuntimeError):
    """All jitter levels failed to factorize the training Gram matrix."""

    def __init__(self, message: str, lambda_min: float):
        super().__init__(message)
        self.lambda_min = lambda_min


def standardize(y):
    """Zero-mean unit-sd transform with the sd floored for constant targets."""
    y = np.asarray(y, dtype=np.float64)
    mean = float(np.mean(y))
    sd = max(float(np.std(y)), SD_FLOOR)
    return (y - mean) / sd, mean, sd


def destandardize(y_std, mean: float, sd: float):
    return np.asarray(y_std) * sd + mean


def chol_with_staged_jitter(K: np.ndarray):
    """Lower Cholesky factor of K + jitter*I, escalating jitter on failure."""
    scale = float(np.mean(np.diag(K)))
    for level in JITTER_LEVELS:
        jitter = level * scale
        try:
            L = cholesky(K + jitter * np.eye(K.shape[0]), lower=True)
            return L, jitter
        except np.linalg.LinAlgError:
            continue
    lam_min = float(eigh(K, eigvals_only=True)[0])
    raise ModelFitError(
        f"Cholesky failed at all jitter levels (lambda_min ~ {lam_min:.3e})",
        lam_min,
    )


@dataclass
class OptimizerConfig:
    restarts: int = 4
    max_steps: int = 200
    grad_tol: float = 1e-5
    fd_step: float = 1e-5  # models without analytic gradients
    seed: int = 0
    perturb_scale: float = 0.5


@dataclass
class Posterior:
    """Predictive mean/covariance in standardized output units."""

    mean: np.ndarray
    cov: np.ndarray
    y_mean: float
    y_sd: float

    @property
    def variance(self) -> np.ndarray:
        return np.diag(self.cov)

    def mean_original(self) -> np.ndarray:
        return destandardize(self.mean, self.y_mean, self.y_sd)

    def cov_original(self) -> np.ndarray:
        return self.cov * self.y_sd**2


@dataclass
class GpModel:
    """Fitted exact GP: kernel model, hyperparameters, and solved factors."""

    kernel_model: object
    theta: np.ndarray
    X: list
    y: np.ndarray
    y_std: np.ndarray
    y_mean: float
    y_sd: float
    chol: np.ndarray
    jitter_used: float
    alpha: np.ndarray
    mll: float
    fit_diagnostics: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.X)

    def prior_variance(self) -> float:
        return self.kernel_model.prior_variance(self.theta)

    def hyperparams(self):
        return self.kernel_model.hyperparams(self.theta)


def _mll_value(kernel_model, theta, y_std):
    K = kernel_model.gram(theta)
    L, jitter = chol_with_staged_jitter(K)
    alpha = cho_solve((L, True), y_std)
    n = len(y_std)
    val = -0.5 * float(y_std @ alpha) - float(np.sum(np.log(np.diag(L)))) \
        - 0.5 * n * LOG_2PI
    return val, L, jitter, alpha


def _mll_and_grad(kernel_model, theta, y_std, fd_step):
    val, L, jitter, alpha = _mll_value(kernel_model, theta, y_std)
    if kernel_model.analytic_gradients:
        K, grads = kernel_model.gram_with_grads(theta)
        Kinv = cho_solve((L, True), np.eye(len(y_std)))
        grad = np.array([
            0.5 * float(alpha @ dK @ alpha) - 0.5 * float(np.sum(Kinv * dK))
            for dK in grads
        ])
        # The jitter scales with mean(diag K), which depends on out_scale and
        # noise; fold that dependence into their gradient entries.
        level = jitter / float(np.mean(np.diag(K)))
        if level > 0:
            _, out2, noise = kernel_model.split(theta)
            s = 0.5 * float(alpha @ alpha) - 0.5 * float(np.trace(Kinv))
            grad[-2] += s * level * out2
            grad[-1] += s * level * noise
    else:
        grad = np.zeros_like(theta)
        for i in range(len(theta)):
            tp, tm = theta.copy(), theta.copy()
            tp[i] += fd_step
            tm[i] -= fd_step
            vp = _mll_value(kernel_model, tp, y_std)[0]
            vm = _mll_value(kernel_model, tm, y_std)[0]
            grad[i] = (vp - vm) / (2.0 * fd_step)
    return val, grad, L, jitter, alpha


def _clamp_noise(kernel_model, theta):
    # log-noise is the last entry in every model's layout.
    theta = theta.copy()
    theta[-1] = max(theta[-1], np.log(NOISE_FLOOR))
    return theta


def log_marginal_likelihood(model: GpModel):
    """MLL of the standardized targets and its gradient in log-parameters."""
    val, grad, _, _, _ = _mll_and_grad(
        model.kernel_model, model.theta, model.y_std, fd_step=1e-5
    )
    return val, grad


def _ascend(kernel_model, theta0, y_std, cfg: OptimizerConfig):
    """Maximize the MLL from one start with L-BFGS-B; returns (theta, mll, steps)."""
    theta0 = _clamp_noise(kernel_model, theta0)
    # Generous box keeps the line search away from exp overflow.
    bounds = [(-20.0, 20.0)] * (len(theta0) - 1) + [(np.log(NOISE_FLOOR), 20.0)]

    def neg_mll(theta):
        try:
            val, grad, *_ = _mll_and_grad(kernel_model, theta, y_std, cfg.fd_step)
        except ModelFitError:
            return np.inf, np.zeros_like(theta)
        return -val, -grad

    res = minimize(
        neg_mll, theta0, jac=True, method="L-BFGS-B", bounds=bounds,
        options={"maxiter": cfg.max_steps, "gtol": cfg.grad_tol, "ftol": 1e-13},
    )
    val = -res.fun if np.isfinite(res.fun) else -np.inf
    return res.x, val, int(res.nit)


def fit(X, y, kernel="gp_perm", optimizer: OptimizerConfig | None = None,
        eps: float = 0.1, ip_weight: float = 1.0, sinkhorn_max_iters: int = 200,
        sinkhorn_tol: float = 1e-6, kernel_model=None) -> GpModel:
    """Fit hyperparameters by multi-start gradient ascent on the MLL.

    ``kernel`` names the surrogate family (gp_perm, flat, ds, de); a prebuilt
    kernel model may be passed instead to reuse cached Sinkhorn components.
    """
    X = list(X)
    y = np.asarray(y, dtype=np.float64)
    if len(X) < 2:
        raise ValueError("need at least 2 training points")
    if y.shape != (len(X),) or not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite with one value per design")
    cfg = optimizer or OptimizerConfig()

    if kernel_model is None:
        kernel_model = build_kernel_model(
            X, kernel, eps=eps, ip_weight=ip_weight,
            max_iters=sinkhorn_max_iters, tol=sinkhorn_tol,
        )
    y_std, y_mean, y_sd = standardize(y)

    theta0 = kernel_model.theta_init()
    best = None
    for r in range(cfg.restarts):
        if r == 0:
            start = theta0
        else:
            rng = np.random.default_rng(cfg.seed + r)
            start = theta0 + cfg.perturb_scale * rng.standard_normal(len(theta0))
        theta, val, steps = _ascend(kernel_model, start, y_std, cfg)
        if best is None or val > best[1]:
            best = (theta, val, r, steps)

    theta, mll, winner, steps = best
    if not np.isfinite(mll):
        raise ModelFitError("no restart produced a factorizable model", np.nan)
    val, L, jitter, alpha = _mll_value(kernel_model, theta, y_std)
    return GpModel(
        kernel_model=kernel_model,
        theta=theta,
        X=X,
        y=y,
        y_std=y_std,
        y_mean=y_mean,
        y_sd=y_sd,
        chol=L,
        jitter_used=jitter,
        alpha=alpha,
        mll=val,
        fit_diagnostics={"winner_restart": winner, "steps": steps},
    )


def posterior(model: GpModel, Xq) -> Posterior:
    """Exact GP predictive distribution at the query designs.

    The covariance is symmetrized and eigenvalue-clamped at a small floor so
    it is always usable for Cholesky sampling.
    """
    Xq = list(Xq)
    Kqx, Kqq = model.kernel_model.cross(model.theta, Xq)
    mean = Kqx @ model.alpha
    V = solve_triangular(model.chol, Kqx.T, lower=True)
    cov = Kqq - V.T @ V
    cov = 0.5 * (cov + cov.T)
    w, Q = eigh(cov)
    cov = (Q * np.maximum(w, EIG_FLOOR)) @ Q.T
    cov = 0.5 * (cov + cov.T)
    return Posterior(mean=mean, cov=cov, y_mean=model.y_mean, y_sd=model.y_sd)
