"""Kernel-matrix models bound to a fixed training set.

Each model owns the hyperparameter vector layout (log-scale), assembles the
noisy training Gram matrix, and produces cross/query Gram blocks for
posterior prediction.  Sinkhorn divergences are hyperparameter-independent,
so they are computed once per training set and cached per query component;
marginal-likelihood optimization then touches only closed-form terms.

``GpPermModel`` and ``FlatModel`` share the additive-Matern structure
(Matern-5/2 over a sum of per-component squared distances) and provide
analytic gradients.  ``DsDeModel`` uses finite differences in the fit.
"""

import numpy as np

from .kernels import (
    Design,
    GpPermHyperparams,
    SetKernelHyperparams,
    check_same_shape,
    matern52,
    matern52_deriv_wrt_d2,
)
from .sets import canonical_order, interaction_set
from .sinkhorn import (
    SelfTermCache,
    SinkhornConfig,
    divergence_matrix,
    sinkhorn_divergence,
)


def _design_components(x: Design, ip: bool):
    """Ordered (kind, point-set) pairs present in a design."""
    out = []
    if x.n_inj:
        out.append(("I", x.I))
    if x.n_prod:
        out.append(("P", x.P))
    if ip and x.n_inj and x.n_prod:
        out.append(("R", interaction_set(x.I, x.P)))
    return out


class _AdditiveMaternGram:
    """Shared math for kernels of the form sigma2 * M52(sqrt(sum_c S_c/l_c^2)).

    Subclasses populate ``self.comp`` (name -> (n, n) squared-distance or
    divergence matrix) and implement ``cross_components``.
    """

    def __init__(self, designs):
        self.designs = list(designs)
        self.n = len(self.designs)
        self.comp: dict[str, np.ndarray] = {}
        self.names: list[str] = []

    def _finalize_names(self):
        self.names = [f"log_ell_{c}" for c in self.comp] + ["log_out2", "log_noise"]

    def split(self, theta):
        k = len(self.comp)
        ells = np.exp(theta[:k])
        out2 = float(np.exp(theta[k]))
        noise = float(np.exp(theta[k + 1]))
        return ells, out2, noise

    def theta_init(self, rng: np.random.Generator | None = None) -> np.ndarray:
        # Lengthscales from the median off-diagonal component value so each
        # term contributes O(1); out_scale 1 (targets standardized), small noise.
        iu = np.triu_indices(self.n, k=1)
        logs = []
        for mat in self.comp.values():
            med = float(np.median(mat[iu])) if iu[0].size else 1.0
            logs.append(0.5 * np.log(max(med, 1e-8)))
        return np.array(logs + [0.0, np.log(1e-4)])

    def _d2(self, comps, ells):
        d2 = np.zeros_like(next(iter(comps.values())))
        for mat, ell in zip(comps.values(), ells):
            d2 = d2 + mat / ell**2
        return d2

    def gram(self, theta) -> np.ndarray:
        ells, out2, noise = self.split(theta)
        d = np.sqrt(self._d2(self.comp, ells))
        return matern52(d, out2) + noise * np.eye(self.n)

    def gram_with_grads(self, theta):
        ells, out2, noise = self.split(theta)
        d2 = self._d2(self.comp, ells)
        d = np.sqrt(d2)
        Kf = matern52(d, out2)
        K = Kf + noise * np.eye(self.n)
        dM = matern52_deriv_wrt_d2(d, out2)
        grads = []
        for mat, ell in zip(self.comp.values(), ells):
            # d(d2)/d(log ell) = -2 * mat / ell^2
            grads.append(dM * (-2.0 * mat / ell**2))
        grads.append(Kf)  # d/d(log out2)
        grads.append(noise * np.eye(self.n))  # d/d(log noise)
        return K, grads

    def cross_components(self, queries):
        raise NotImplementedError

    def cross(self, theta, queries):
        """Cross block (nq, n) and query block (nq, nq), both noise-free."""
        ells, out2, _ = self.split(theta)
        cx, cq = self.cross_components(queries)
        Kqx = matern52(np.sqrt(self._d2(cx, ells)), out2)
        Kqq = matern52(np.sqrt(self._d2(cq, ells)), out2)
        return Kqx, Kqq

    def prior_variance(self, theta) -> float:
        _, out2, _ = self.split(theta)
        return out2


def _vector_sq_components(vs: np.ndarray, prefix: str) -> dict[str, np.ndarray]:
    out = {}
    for j in range(vs.shape[1]):
        diff = vs[:, j][:, None] - vs[:, j][None, :]
        out[f"{prefix}{j}"] = diff * diff
    return out


def _vector_sq_cross(va: np.ndarray, vb: np.ndarray, prefix: str):
    out = {}
    for j in range(va.shape[1]):
        diff = va[:, j][:, None] - vb[:, j][None, :]
        out[f"{prefix}{j}"] = diff * diff
    return out


class GpPermModel(_AdditiveMaternGram):
    """Permutation-invariant composite kernel over structured designs."""

    family = "gp_perm"
    analytic_gradients = True

    def __init__(self, designs, eps: float = 0.1, ip_weight: float = 1.0,
                 max_iters: int = 200, tol: float = 1e-6):
        super().__init__(designs)
        if ip_weight not in (0.0, 1.0):
            raise ValueError("ip_weight must be 0 or 1")
        x0 = self.designs[0]
        for x in self.designs[1:]:
            check_same_shape(x0, x)
        self.ip = bool(ip_weight)
        self.cfg = SinkhornConfig(epsilon=eps, max_iters=max_iters, tol=tol)
        self.self_cache = SelfTermCache()

        vs = np.stack([x.v for x in self.designs]) if x0.d_v else np.zeros((self.n, 0))
        self.comp.update(_vector_sq_components(vs, "v"))
        self._train_sets: dict[str, list[np.ndarray]] = {}
        for kind in ("I", "P", "R"):
            sets = self._kind_sets(self.designs, kind)
            if sets is not None:
                self._train_sets[kind] = [canonical_order(s) for s in sets]
                self.comp[kind] = divergence_matrix(
                    self._train_sets[kind], self._train_sets[kind], self.cfg,
                    symmetric=True,
                )
        self._finalize_names()
        self._row_cache: dict[tuple, np.ndarray] = {}
        self._qq_cache: dict[tuple, float] = {}

    def _kind_sets(self, designs, kind):
        x0 = designs[0]
        if kind == "I" and x0.n_inj:
            return [x.I for x in designs]
        if kind == "P" and x0.n_prod:
            return [x.P for x in designs]
        if kind == "R" and self.ip and x0.n_inj and x0.n_prod:
            return [interaction_set(x.I, x.P) for x in designs]
        return None

    def cross_components(self, queries):
        queries = list(queries)
        for xq in queries:
            check_same_shape(self.designs[0], xq)
        nq = len(queries)
        vs_q = (
            np.stack([x.v for x in queries])
            if queries[0].d_v
            else np.zeros((nq, 0))
        )
        vs_t = (
            np.stack([x.v for x in self.designs])
            if queries[0].d_v
            else np.zeros((self.n, 0))
        )
        cx = _vector_sq_cross(vs_q, vs_t, "v")
        cq = _vector_sq_cross(vs_q, vs_q, "v")

        for kind in self._train_sets:
            qsets = [canonical_order(s) for s in self._kind_sets(queries, kind)]
            keys = [s.tobytes() for s in qsets]
            missing = [
                (i, s) for i, (s, k) in enumerate(zip(qsets, keys))
                if (kind, k) not in self._row_cache
            ]
            if missing:
                rows = divergence_matrix(
                    [s for _, s in missing], self._train_sets[kind], self.cfg
                )
                for (i, _), row in zip(missing, rows):
                    self._row_cache[(kind, keys[i])] = row
            cx[kind] = np.stack([self._row_cache[(kind, k)] for k in keys])

            qq = np.zeros((nq, nq))
            for i in range(nq):
                for j in range(i + 1, nq):
                    key = (kind, min(keys[i], keys[j]), max(keys[i], keys[j]))
                    val = self._qq_cache.get(key)
                    if val is None:
                        val = sinkhorn_divergence(
                            qsets[i], qsets[j], self.cfg, self.self_cache
                        )
                        self._qq_cache[key] = val
                    qq[i, j] = qq[j, i] = val
            cq[kind] = qq
        return cx, cq

    def hyperparams(self, theta) -> GpPermHyperparams:
        ells, out2, noise = self.split(theta)
        by_name = dict(zip(self.comp.keys(), ells))
        d_v = self.designs[0].d_v
        return GpPermHyperparams(
            ell_v=np.array([by_name[f"v{j}"] for j in range(d_v)]),
            ell_I=by_name.get("I", 1.0),
            ell_P=by_name.get("P", 1.0),
            ell_IP=by_name.get("R", 1.0),
            out_scale=out2,
            noise=noise,
            eps=self.cfg.epsilon,
            ip_weight=1.0 if self.ip else 0.0,
        )


class FlatModel(_AdditiveMaternGram):
    """Non-invariant ARD Matern kernel on flattened design vectors."""

    family = "flat"
    analytic_gradients = True

    def __init__(self, designs):
        super().__init__(designs)
        x0 = self.designs[0]
        for x in self.designs[1:]:
            check_same_shape(x0, x)
        flats = np.stack([x.flatten() for x in self.designs])
        self.comp.update(_vector_sq_components(flats, "x"))
        self._finalize_names()

    def cross_components(self, queries):
        queries = list(queries)
        fq = np.stack([x.flatten() for x in queries])
        ft = np.stack([x.flatten() for x in self.designs])
        return _vector_sq_cross(fq, ft, "x"), _vector_sq_cross(fq, fq, "x")


class DsDeModel:
    """Additive DS/DE set-kernel baseline over structured designs.

    Hyperparameter layout: log base_ell, (log outer_ell for DE), per-dim
    log ell_v, then log output scales for the active terms, then log noise.
    Gradients are taken by finite differences in the fit.
    """

    analytic_gradients = False

    def __init__(self, designs, which: str):
        if which not in ("DS", "DE"):
            raise ValueError(f"unknown set kernel {which!r}")
        self.which = which
        self.family = "ds" if which == "DS" else "de"
        self.designs = list(designs)
        self.n = len(self.designs)
        x0 = self.designs[0]
        for x in self.designs[1:]:
            check_same_shape(x0, x)
        self.d_v = x0.d_v
        self.terms = [k for k, _ in _design_components(x0, ip=True)]

        # Squared cross-element distances, flattened per pair: term -> (n, n, m*k)
        self._sq = {
            kind: self._sq_tensor(
                self._kind_sets(self.designs, kind),
                self._kind_sets(self.designs, kind),
            )
            for kind in self.terms
        }
        self._vs = np.stack([x.v for x in self.designs]) if self.d_v else None

        self.names = ["log_base_ell"]
        if which == "DE":
            self.names.append("log_outer_ell")
        self.names += [f"log_ell_v{j}" for j in range(self.d_v)]
        if self.d_v:
            self.names.append("log_scale_vec")
        self.names += [f"log_scale_{k}" for k in self.terms]
        self.names.append("log_noise")

    def _kind_sets(self, designs, kind):
        if kind == "I":
            return [x.I for x in designs]
        if kind == "P":
            return [x.P for x in designs]
        return [interaction_set(x.I, x.P) for x in designs]

    @staticmethod
    def _sq_tensor(sets_a, sets_b):
        A = np.stack(sets_a)  # (na, m, 2)
        B = np.stack(sets_b)  # (nb, k, 2)
        diff = A[:, None, :, None, :] - B[None, :, None, :, :]
        sq = np.sum(diff * diff, axis=-1)
        na, nb, m, k = sq.shape
        return sq.reshape(na, nb, m * k)

    def split(self, theta):
        h = SetKernelHyperparams()
        i = 0
        h.base_ell = float(np.exp(theta[i])); i += 1
        if self.which == "DE":
            h.outer_ell = float(np.exp(theta[i])); i += 1
        h.ell_v = np.exp(theta[i:i + self.d_v]); i += self.d_v
        if self.d_v:
            h.scale_vec = float(np.exp(theta[i])); i += 1
        scales = {}
        for kind in self.terms:
            scales[kind] = float(np.exp(theta[i])); i += 1
        h.scale_I = scales.get("I", 1.0)
        h.scale_P = scales.get("P", 1.0)
        h.scale_R = scales.get("R", 1.0)
        h.noise = float(np.exp(theta[i]))
        return h, scales

    def theta_init(self, rng=None) -> np.ndarray:
        pooled = np.concatenate(
            [np.vstack([x.I, x.P]) for x in self.designs]
        ) if (self.designs[0].n_inj + self.designs[0].n_prod) else np.zeros((1, 2))
        if len(pooled) > 1:
            diff = pooled[:, None, :] - pooled[None, :, :]
            dists = np.sqrt(np.sum(diff * diff, axis=-1))
            med = float(np.median(dists[np.triu_indices(len(pooled), k=1)]))
        else:
            med = 1.0
        med = max(med, 1e-3)
        theta = [np.log(med)]
        if self.which == "DE":
            theta.append(0.0)
        if self.d_v:
            vd = np.abs(self._vs[:, None, :] - self._vs[None, :, :])
            for j in range(self.d_v):
                theta.append(np.log(max(float(np.median(vd[..., j])), 1e-3)))
            theta.append(np.log(1.0 / (1 + len(self.terms))))
        theta += [np.log(1.0 / max(1, len(self.terms)))] * len(self.terms)
        theta.append(np.log(1e-4))
        return np.array(theta)

    def _term_values(self, sq, h):
        # DS: mean base-kernel similarity; DE: radialized V-statistic MMD^2.
        E = np.mean(np.exp(-sq / (2.0 * h.base_ell**2)), axis=-1)
        if self.which == "DS":
            return E
        diag = np.diagonal(E) if E.shape[0] == E.shape[1] else None
        return E, diag

    def _assemble(self, h, scales, sq_by_kind, vs_a, vs_b, self_a=None, self_b=None):
        shape = next(iter(sq_by_kind.values())).shape[:2] if sq_by_kind else (
            len(vs_a), len(vs_b))
        K = np.zeros(shape)
        if self.d_v:
            diff = (vs_a[:, None, :] - vs_b[None, :, :]) / h.ell_v
            d = np.sqrt(np.sum(diff * diff, axis=-1))
            K += h.scale_vec * matern52(d)
        for kind, sq in sq_by_kind.items():
            E = np.mean(np.exp(-sq / (2.0 * h.base_ell**2)), axis=-1)
            if self.which == "DS":
                K += scales[kind] * E
            else:
                mmd2 = np.maximum(0.0, self_a[kind][:, None] + self_b[kind][None, :] - 2.0 * E)
                K += scales[kind] * np.exp(-mmd2 / (2.0 * h.outer_ell**2))
        return K

    def _self_means(self, designs, h):
        out = {}
        for kind in self.terms:
            sets = self._kind_sets(designs, kind)
            vals = []
            for s in sets:
                diff = s[:, None, :] - s[None, :, :]
                sq = np.sum(diff * diff, axis=-1)
                vals.append(float(np.mean(np.exp(-sq / (2.0 * h.base_ell**2)))))
            out[kind] = np.array(vals)
        return out

    def gram(self, theta) -> np.ndarray:
        h, scales = self.split(theta)
        selfs = self._self_means(self.designs, h) if self.which == "DE" else None
        K = self._assemble(h, scales, self._sq, self._vs, self._vs, selfs, selfs)
        return K + h.noise * np.eye(self.n)

    def gram_with_grads(self, theta):
        return None  # finite differences in the fit

    def cross(self, theta, queries):
        queries = list(queries)
        for xq in queries:
            check_same_shape(self.designs[0], xq)
        h, scales = self.split(theta)
        sq_x = {
            kind: self._sq_tensor(
                self._kind_sets(queries, kind), self._kind_sets(self.designs, kind)
            )
            for kind in self.terms
        }
        sq_q = {
            kind: self._sq_tensor(
                self._kind_sets(queries, kind), self._kind_sets(queries, kind)
            )
            for kind in self.terms
        }
        vs_q = np.stack([x.v for x in queries]) if self.d_v else None
        if self.which == "DE":
            self_q = self._self_means(queries, h)
            self_t = self._self_means(self.designs, h)
        else:
            self_q = self_t = None
        Kqx = self._assemble(h, scales, sq_x, vs_q, self._vs, self_q, self_t)
        Kqq = self._assemble(h, scales, sq_q, vs_q, vs_q, self_q, self_q)
        return Kqx, Kqq

    def prior_variance(self, theta) -> float:
        h, scales = self.split(theta)
        total = (h.scale_vec if self.d_v else 0.0) + sum(scales.values())
        return total

    def hyperparams(self, theta) -> SetKernelHyperparams:
        h, _ = self.split(theta)
        return h


def build_kernel_model(designs, family: str, eps: float = 0.1,
                       ip_weight: float = 1.0, max_iters: int = 200,
                       tol: float = 1e-6):
    """Factory keyed by surrogate family name."""
    fam = family.lower()
    if fam in ("gp_perm", "gpperm", "gp-perm"):
        return GpPermModel(designs, eps=eps, ip_weight=ip_weight,
                           max_iters=max_iters, tol=tol)
    if fam in ("flat", "gp", "gp_flat"):
        return FlatModel(designs)
    if fam in ("ds", "ds_gp", "ds-gp"):
        return DsDeModel(designs, "DS")
    if fam in ("de", "de_gp", "de-gp"):
        return DsDeModel(designs, "DE")
    raise ValueError(f"unknown surrogate family {family!r}")
