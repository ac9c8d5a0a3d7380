"""PSD stress tests and posterior/acquisition health diagnostics.

The offline stress test draws random point-set designs, assembles the
noise-free kernel matrix, and tabulates how often the minimum eigenvalue
falls below -delta.  The training-trace variant replays kernel matrices over
growing prefixes of recorded BO runs.  Posterior diagnostics summarize how
the fitted surrogate and the acquisition relate at the selected batch.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from .acquisition import AcquisitionConfig, draw_base_samples, qlogei
from .gp import GpModel, posterior
from .gram import build_kernel_model
from .kernels import Design

DEFAULT_DELTAS = (1e-10, 1e-8, 1e-6)


@dataclass
class PsdReport:
    kernel: str
    deltas: tuple
    lambda_mins: dict           # N -> list of per-draw lambda_min
    medians: dict = field(init=False)
    means: dict = field(init=False)
    violation_fractions: dict = field(init=False)  # (N, delta) -> fraction

    def __post_init__(self):
        self.medians = {n: float(np.median(v)) for n, v in self.lambda_mins.items()}
        self.means = {n: float(np.mean(v)) for n, v in self.lambda_mins.items()}
        self.violation_fractions = {}
        for n, vals in self.lambda_mins.items():
            vals = np.asarray(vals)
            for d in self.deltas:
                frac = float(np.mean(vals < -d))
                assert 0.0 <= frac <= 1.0
                self.violation_fractions[(n, d)] = frac


@dataclass
class PosteriorDiagnostics:
    rho_qlogei: float
    rho_undefined: bool
    mean_sigma_z: float
    sigma_next: float
    abs_mean_std_residual: float


def random_designs(rng, n, n_points) -> list:
    return [Design.single_set(rng.uniform(0.0, 1.0, (n_points, 2)))
            for _ in range(n)]


def kernel_matrix_noise_free(designs, kernel: str, theta=None,
                             eps: float = 0.1, ip_weight: float = 1.0):
    """Noise-free, jitter-free kernel matrix at the given (or init) theta."""
    model = build_kernel_model(designs, kernel, eps=eps, ip_weight=ip_weight)
    if theta is None:
        theta = model.theta_init()
    _, Kqq = model.cross(theta, designs)
    return Kqq


def min_eigenvalue(K: np.ndarray) -> float:
    K = 0.5 * (K + K.T)
    return float(eigh(K, eigvals_only=True, subset_by_index=[0, 0])[0])


def psd_stress_offline(kernel: str, d: int, n_list, draws: int, seed: int,
                       deltas=DEFAULT_DELTAS, theta=None, eps: float = 0.1,
                       ip_weight: float = 1.0) -> PsdReport:
    """Minimum-eigenvalue statistics of noise-free kernel matrices on random
    point sets uniform in [0,1]^d (d = 2 * points per set)."""
    if d % 2 or d < 2:
        raise ValueError("d must be an even number of flattened coordinates")
    n_points = d // 2
    lambda_mins = {}
    for n in n_list:
        if n < 2:
            raise ValueError("matrix size must be >= 2")
        vals = []
        for k in range(draws):
            rng = np.random.default_rng(seed + 1009 * k + n)
            designs = random_designs(rng, n, n_points)
            try:
                K = kernel_matrix_noise_free(designs, kernel, theta, eps,
                                             ip_weight)
                vals.append(min_eigenvalue(K))
            except np.linalg.LinAlgError:
                vals.append(-np.inf)  # recorded as a violation
        lambda_mins[n] = vals
    return PsdReport(kernel=kernel, deltas=tuple(deltas),
                     lambda_mins=lambda_mins)


def psd_stress_training(records, kernel: str, space=None, prefix_cap: int = 64,
                        deltas=DEFAULT_DELTAS, theta=None, eps: float = 0.1,
                        ip_weight: float = 1.0):
    """Per-iteration minimum eigenvalues over growing training prefixes.

    Returns (per-trial list of per-iteration lambda_min, PsdReport keyed by
    iteration with medians across trials).
    """
    traces = []
    for rec in records:
        iters = sorted({e.iteration for e in rec.evaluations})
        trace = []
        for t in iters:
            designs = [e.design for e in rec.evaluations if e.iteration <= t]
            designs = designs[:prefix_cap]
            if space is not None:
                designs = [space.normalize(x)[0] for x in designs]
            if len(designs) < 2:
                model = build_kernel_model(designs * 2, kernel, eps=eps,
                                           ip_weight=ip_weight)
                th = theta if theta is not None else model.theta_init()
                _, Kqq = model.cross(th, designs)
                trace.append(float(Kqq[0, 0]))
                continue
            K = kernel_matrix_noise_free(designs, kernel, theta, eps, ip_weight)
            trace.append(min_eigenvalue(K))
        traces.append(trace)
    by_iter = {t: [trace[t] for trace in traces if t < len(trace)]
               for t in range(max(len(tr) for tr in traces))}
    report = PsdReport(kernel=kernel, deltas=tuple(deltas),
                       lambda_mins=by_iter)
    return traces, report


def sobol_probe_designs(space, size: int = 256, seed: int = 0) -> list:
    """Fixed quasi-random probe set Z in the normalized design cube."""
    from scipy.stats import qmc

    sampler = qmc.Sobol(d=space.dim, scramble=True, seed=seed)
    k = int(np.ceil(np.log2(max(size, 2))))
    rows = sampler.random_base2(k)[:size]
    return [space.decode(row) for row in rows]


def posterior_diagnostics(model: GpModel, probes, x_next, y_next,
                          acq: AcquisitionConfig | None = None,
                          seed: int = 0) -> PosteriorDiagnostics:
    """Acquisition concentration and calibration summary at a selected batch.

    ``probes`` is the fixed design set Z; ``x_next`` the selected batch of
    designs; ``y_next`` their realized objective values in original units.
    """
    acq = acq or AcquisitionConfig()
    q = len(x_next)
    f_best = float(np.max(model.y_std))

    base_q = draw_base_samples(acq.mc_samples, q, seed)
    val_next = qlogei(model, list(x_next), f_best, acq, base_q)
    base_1 = draw_base_samples(acq.mc_samples, 1, seed)
    probe_vals = [np.exp(qlogei(model, [z], f_best, acq, base_1))
                  for z in probes]
    max_probe = max(probe_vals)
    undefined = max_probe == 0.0
    rho = float("nan") if undefined else float(np.exp(val_next) / max_probe)

    post_z = posterior(model, list(probes))
    mean_sigma_z = float(np.mean(np.sqrt(np.maximum(post_z.variance, 0.0))))

    post_n = posterior(model, list(x_next))
    sigma = np.sqrt(np.maximum(post_n.variance, 0.0))
    sigma_next = float(np.mean(sigma))
    y_std = (np.asarray(y_next, dtype=np.float64) - model.y_mean) / model.y_sd
    resid = (y_std - post_n.mean) / np.maximum(sigma, 1e-12)
    return PosteriorDiagnostics(
        rho_qlogei=rho,
        rho_undefined=bool(undefined),
        mean_sigma_z=mean_sigma_z,
        sigma_next=sigma_next,
        abs_mean_std_residual=float(abs(np.mean(resid))),
    )
