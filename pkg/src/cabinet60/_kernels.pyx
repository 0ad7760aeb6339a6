# cython: language_level=3
"""Compiled inner loops.

Every function here has a numpy twin in ``_kernels_py`` with the same
signature and semantics; ``cabinet60._backend`` picks one at import time.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, INFINITY

cnp.import_array()


def em_exp_mixture_step(const double[::1] x, double weight, double lam1, double lam2):
    """One fused E/M pass of the two-component exponential mixture.

    Returns ``(weight, lam1, lam2, loglik)`` where the parameters are the
    M-step update and ``loglik`` is evaluated at the *input* parameters.
    """
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double la1 = log(weight) + log(lam1) if weight > 0.0 else -INFINITY
    cdef double la2 = log(1.0 - weight) + log(lam2) if weight < 1.0 else -INFINITY
    cdef double xi, a1, a2, d, e, r1, ll = 0.0
    cdef double s1 = 0.0, s1x = 0.0, s2 = 0.0, s2x = 0.0

    with nogil:
        for i in range(n):
            xi = x[i]
            a1 = la1 - lam1 * xi
            a2 = la2 - lam2 * xi
            d = a1 - a2
            if d > 0.0:
                e = exp(-d)
                ll += a1 + log1p(e)
                r1 = 1.0 / (1.0 + e)
            else:
                e = exp(d)
                ll += a2 + log1p(e)
                r1 = e / (1.0 + e)
            s1 += r1
            s1x += r1 * xi
            s2 += 1.0 - r1
            s2x += (1.0 - r1) * xi

    cdef double nw = s1 / n
    cdef double n1 = lam1, n2 = lam2
    if s1x > 0.0 and s1 > 1e-300:
        n1 = s1 / s1x
    if s2x > 0.0 and s2 > 1e-300:
        n2 = s2 / s2x
    return nw, n1, n2, ll


def strict_local_maxima(const double[::1] power, double floor):
    """Indices ``k`` with ``power[k]`` strictly above both neighbours and >= floor.

    Samples beyond either end count as ``-inf``.
    """
    cdef Py_ssize_t k, n = power.shape[0], m = 0
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(n, dtype=np.int64)
    cdef double p, left, right
    for k in range(n):
        p = power[k]
        if p < floor:
            continue
        left = power[k - 1] if k > 0 else -INFINITY
        right = power[k + 1] if k + 1 < n else -INFINITY
        if p > left and p > right:
            out[m] = k
            m += 1
    return out[:m].copy()


def accumulate_bins(const cnp.int64_t[::1] index, const double complex[::1] values, Py_ssize_t n):
    """Coherently sum ``values`` into ``n`` bins; out-of-range indices are dropped."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.zeros(n, dtype=np.complex128)
    cdef double complex[::1] o = out
    cdef Py_ssize_t i, k, m = index.shape[0]
    for i in range(m):
        k = index[i]
        if 0 <= k < n:
            o[k] = o[k] + values[i]
    return out
