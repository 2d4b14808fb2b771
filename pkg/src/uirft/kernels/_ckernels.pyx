# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; same contracts as ``_pykernels``."""

import numpy as np
from libc.math cimport exp, log


cdef void _log_softmax(const double* z, Py_ssize_t v, double inv_temp, double* out) noexcept nogil:
    cdef Py_ssize_t j
    cdef double m = z[0] * inv_temp
    cdef double s = 0.0
    for j in range(1, v):
        if z[j] * inv_temp > m:
            m = z[j] * inv_temp
    for j in range(v):
        s += exp(z[j] * inv_temp - m)
    s = m + log(s)
    for j in range(v):
        out[j] = z[j] * inv_temp - s


def log_softmax_rows(z, double inv_temp=1.0):
    arr = np.ascontiguousarray(z, dtype=np.float64)
    shape = arr.shape
    out = np.empty_like(arr)
    cdef double[:, ::1] zz = arr.reshape(-1, shape[arr.ndim - 1])
    cdef double[:, ::1] o = out.reshape(-1, shape[arr.ndim - 1])
    cdef Py_ssize_t i, v = zz.shape[1]
    for i in range(zz.shape[0]):
        _log_softmax(&zz[i, 0], v, inv_temp, &o[i, 0])
    return out


def surrogate_head(z, zref, tokens, old_logp, adv, weight, double eps, double beta, double inv_temp):
    cdef double[:, ::1] zc = np.ascontiguousarray(z, dtype=np.float64)
    cdef double[:, ::1] zr = np.ascontiguousarray(zref, dtype=np.float64)
    cdef long long[::1] tok = np.ascontiguousarray(tokens, dtype=np.int64)
    cdef double[::1] old = np.ascontiguousarray(old_logp, dtype=np.float64)
    cdef double[::1] a = np.ascontiguousarray(adv, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weight, dtype=np.float64)
    cdef Py_ssize_t n = zc.shape[0], v = zc.shape[1], t, j, k

    grad_arr = np.zeros((n, v), dtype=np.float64)
    logp_arr = np.zeros(n, dtype=np.float64)
    kl_arr = np.zeros(n, dtype=np.float64)
    cdef double[:, ::1] g = grad_arr
    cdef double[::1] lp_out = logp_arr, kl_out = kl_arr
    cdef double[::1] lp = np.empty(max(v, 1), dtype=np.float64)
    cdef double[::1] lq = np.empty(max(v, 1), dtype=np.float64)
    cdef double objective = 0.0, ratio, clipped, surr, kl, coef, pj, scale

    with nogil:
        for t in range(n):
            _log_softmax(&zc[t, 0], v, inv_temp, &lp[0])
            _log_softmax(&zr[t, 0], v, inv_temp, &lq[0])
            k = tok[t]
            ratio = exp(lp[k] - old[t])
            clipped = ratio
            if clipped < 1.0 - eps:
                clipped = 1.0 - eps
            elif clipped > 1.0 + eps:
                clipped = 1.0 + eps
            surr = ratio * a[t]
            if clipped * a[t] < surr:
                surr = clipped * a[t]
            kl = 0.0
            for j in range(v):
                kl += exp(lp[j]) * (lp[j] - lq[j])
            objective += w[t] * (surr - beta * kl)
            lp_out[t] = lp[k]
            kl_out[t] = kl

            if (a[t] > 0 and ratio > 1.0 + eps) or (a[t] < 0 and ratio < 1.0 - eps):
                coef = 0.0
            else:
                coef = a[t] * ratio
            scale = w[t] * inv_temp
            for j in range(v):
                pj = exp(lp[j])
                g[t, j] = scale * (-coef * pj - beta * pj * (lp[j] - lq[j] - kl))
            g[t, k] += scale * coef
    return objective, grad_arr, logp_arr, kl_arr
