# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled log-domain Sinkhorn core.

Mirrors the semantics of ``_sinkhorn_np``: uniform weights, f-then-g dual
updates, epsilon-scaling warm start, convergence on the sup-norm change of
either potential, and the dual value mean(f) + mean(g).

The inner loops work with potentials and costs pre-divided by the current
epsilon level, so the hot path is free of divisions.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log

cnp.import_array()

BACKEND_NAME = "cython"

DEF SCALE_START = 1.0
DEF SCALE_FACTOR = 0.25
DEF SCALE_ITERS = 5


cdef double _update_pair(const double[:, ::1] Ce, double[::1] F, double[::1] G,
                         double[::1] Fn, double[::1] Gn,
                         double eps_l, double loga, double logb,
                         Py_ssize_t m, Py_ssize_t k) nogil:
    """One f-then-g update in scaled coordinates (F = f/eps_l, Ce = C/eps_l).

    Returns the sup-norm change of the unscaled potentials.
    """
    cdef Py_ssize_t a, b
    cdef double mx, s, t, delta = 0.0
    for a in range(m):
        mx = -1e308
        for b in range(k):
            t = G[b] - Ce[a, b]
            if t > mx:
                mx = t
        s = 0.0
        for b in range(k):
            s += exp(G[b] - Ce[a, b] - mx)
        Fn[a] = -(mx + logb + log(s))
        t = fabs(Fn[a] - F[a])
        if t > delta:
            delta = t
    for b in range(k):
        mx = -1e308
        for a in range(m):
            t = Fn[a] - Ce[a, b]
            if t > mx:
                mx = t
        s = 0.0
        for a in range(m):
            s += exp(Fn[a] - Ce[a, b] - mx)
        Gn[b] = -(mx + loga + log(s))
        t = fabs(Gn[b] - G[b])
        if t > delta:
            delta = t
    for a in range(m):
        F[a] = Fn[a]
    for b in range(k):
        G[b] = Gn[b]
    return delta * eps_l


def sinkhorn_cost_batch(C, double eps, int max_iters, double tol):
    """Entropic OT cost for a batch of cost matrices under uniform weights.

    C has shape (B, m, k) (a single (m, k) matrix is promoted).  Returns
    (values, iters, converged) arrays of length B.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=3] Carr
    Cin = np.asarray(C, dtype=np.float64)
    if Cin.ndim == 2:
        Cin = Cin[None, :, :]
    Carr = np.ascontiguousarray(Cin)
    cdef Py_ssize_t B = Carr.shape[0]
    cdef Py_ssize_t m = Carr.shape[1]
    cdef Py_ssize_t k = Carr.shape[2]
    cdef double loga = -log(<double> m)
    cdef double logb = -log(<double> k)

    values = np.empty(B, dtype=np.float64)
    iters = np.full(B, max_iters, dtype=np.int64)
    conv = np.zeros(B, dtype=np.uint8)
    cdef double[::1] values_v = values
    cdef cnp.int64_t[::1] iters_v = iters
    cdef cnp.uint8_t[::1] conv_v = conv

    cdef double[::1] F = np.empty(m)
    cdef double[::1] G = np.empty(k)
    cdef double[::1] Fn = np.empty(m)
    cdef double[::1] Gn = np.empty(k)
    cdef double[:, ::1] Ce = np.empty((m, k))
    cdef const double[:, :] Ci
    cdef Py_ssize_t i, a, b
    cdef int it, j
    cdef double eps_l, eps_prev, delta, acc, inv

    for i in range(B):
        Ci = Carr[i]
        for a in range(m):
            F[a] = 0.0
        for b in range(k):
            G[b] = 0.0
        eps_prev = 0.0
        eps_l = SCALE_START
        while eps_l > eps:
            inv = 1.0 / eps_l
            for a in range(m):
                for b in range(k):
                    Ce[a, b] = Ci[a, b] * inv
            if eps_prev != 0.0:
                for a in range(m):
                    F[a] *= eps_prev * inv
                for b in range(k):
                    G[b] *= eps_prev * inv
            for j in range(SCALE_ITERS):
                _update_pair(Ce, F, G, Fn, Gn, eps_l, loga, logb, m, k)
            eps_prev = eps_l
            eps_l *= SCALE_FACTOR
        inv = 1.0 / eps
        for a in range(m):
            for b in range(k):
                Ce[a, b] = Ci[a, b] * inv
        if eps_prev != 0.0:
            for a in range(m):
                F[a] *= eps_prev * inv
            for b in range(k):
                G[b] *= eps_prev * inv
        for it in range(1, max_iters + 1):
            delta = _update_pair(Ce, F, G, Fn, Gn, eps, loga, logb, m, k)
            if delta < tol:
                iters_v[i] = it
                conv_v[i] = 1
                break
        acc = 0.0
        for a in range(m):
            acc += F[a]
        acc /= m
        for b in range(k):
            acc += G[b] / k
        values_v[i] = acc * eps

    return values, iters, conv.astype(bool)


cdef double _self_update(const double[:, ::1] Ce, double[::1] F, double[::1] Fn,
                         double eps_l, double loga, Py_ssize_t m) nogil:
    """Damped symmetric update F <- (F + T(F)) / 2 in scaled coordinates."""
    cdef Py_ssize_t a, b
    cdef double mx, s, t, delta = 0.0
    for a in range(m):
        mx = -1e308
        for b in range(m):
            t = F[b] - Ce[a, b]
            if t > mx:
                mx = t
        s = 0.0
        for b in range(m):
            s += exp(F[b] - Ce[a, b] - mx)
        Fn[a] = 0.5 * (F[a] - (mx + loga + log(s)))
        t = fabs(Fn[a] - F[a])
        if t > delta:
            delta = t
    for a in range(m):
        F[a] = Fn[a]
    return delta * eps_l


def sinkhorn_self_cost_batch(C, double eps, int max_iters, double tol):
    """Entropic OT cost W_eps(S, S) for a batch of symmetric cost matrices.

    Uses the damped symmetric fixed-point update, which converges far faster
    than alternating updates on symmetric problems.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=3] Carr
    Cin = np.asarray(C, dtype=np.float64)
    if Cin.ndim == 2:
        Cin = Cin[None, :, :]
    Carr = np.ascontiguousarray(Cin)
    cdef Py_ssize_t B = Carr.shape[0]
    cdef Py_ssize_t m = Carr.shape[1]
    cdef double loga = -log(<double> m)

    values = np.empty(B, dtype=np.float64)
    iters = np.full(B, max_iters, dtype=np.int64)
    conv = np.zeros(B, dtype=np.uint8)
    cdef double[::1] values_v = values
    cdef cnp.int64_t[::1] iters_v = iters
    cdef cnp.uint8_t[::1] conv_v = conv

    cdef double[::1] F = np.empty(m)
    cdef double[::1] Fn = np.empty(m)
    cdef double[:, ::1] Ce = np.empty((m, m))
    cdef const double[:, :] Ci
    cdef Py_ssize_t i, a, b
    cdef int it, j
    cdef double eps_l, eps_prev, delta, acc, inv

    for i in range(B):
        Ci = Carr[i]
        for a in range(m):
            F[a] = 0.0
        eps_prev = 0.0
        eps_l = SCALE_START
        while eps_l > eps:
            inv = 1.0 / eps_l
            for a in range(m):
                for b in range(m):
                    Ce[a, b] = Ci[a, b] * inv
            if eps_prev != 0.0:
                for a in range(m):
                    F[a] *= eps_prev * inv
            for j in range(SCALE_ITERS):
                _self_update(Ce, F, Fn, eps_l, loga, m)
            eps_prev = eps_l
            eps_l *= SCALE_FACTOR
        inv = 1.0 / eps
        for a in range(m):
            for b in range(m):
                Ce[a, b] = Ci[a, b] * inv
        if eps_prev != 0.0:
            for a in range(m):
                F[a] *= eps_prev * inv
        for it in range(1, max_iters + 1):
            delta = _self_update(Ce, F, Fn, eps, loga, m)
            if delta < tol:
                iters_v[i] = it
                conv_v[i] = 1
                break
        acc = 0.0
        for a in range(m):
            acc += F[a]
        values_v[i] = 2.0 * eps * acc / m

    return values, iters, conv.astype(bool)
