# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the per-observation beta-regression terms.

Mirrors ``_kernels_py`` function for function; ``betashrink._backend``
picks whichever is importable.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, lgamma, NAN

cnp.import_array()

cdef double SHIFT = 10.0


cdef inline double _digamma(double x) noexcept nogil:
    cdef double acc = 0.0, inv, inv2
    if not x > 0.0:
        return NAN
    while x < SHIFT:
        acc -= 1.0 / x
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    return acc + log(x) - 0.5 * inv - inv2 * (
        1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (
            1.0 / 240 - inv2 * (1.0 / 132 - inv2 * (691.0 / 32760 - inv2 / 12))))))


cdef inline void _two_prod(double a, double b, double* p, double* err) noexcept nogil:
    cdef double c, ah, al, bh, bl
    p[0] = a * b
    c = 134217729.0 * a
    ah = c - (c - a)
    al = a - ah
    c = 134217729.0 * b
    bh = c - (c - b)
    bl = b - bh
    err[0] = ((ah * bh - p[0]) + ah * bl + al * bh) + al * bl


cdef inline double _add_inv_square(double x, double s) noexcept nogil:
    # s + 1/x**2 with the large term carried in double-double
    cdef double r = 1.0 / x, p, err, e1, hi, lo
    _two_prod(r, x, &p, &err)
    e1 = ((1.0 - p) - err) / x
    _two_prod(r, r, &hi, &lo)
    return hi + ((lo + 2.0 * r * e1) + s)


cdef inline double _trigamma(double x) noexcept nogil:
    cdef int n = 0, j
    cdef double z, inv, inv2, series
    if not x > 0.0:
        return NAN
    while x + n < SHIFT:
        n += 1
    z = x + n
    inv = 1.0 / z
    inv2 = inv * inv
    series = inv + 0.5 * inv2 + inv * inv2 * (
        1.0 / 6 - inv2 * (1.0 / 30 - inv2 * (1.0 / 42 - inv2 * (
            1.0 / 30 - inv2 * (5.0 / 66 - inv2 * (691.0 / 2730 - inv2 * 7.0 / 6))))))
    # smallest terms first: 1/x^2 dominates near zero
    for j in range(n - 1, 0, -1):
        series += 1.0 / ((x + j) * (x + j))
    if n > 0:
        series = _add_inv_square(x, series)
    return series


def digamma(x):
    """Elementwise digamma for positive input (NaN elsewhere)."""
    cdef cnp.ndarray[double, ndim=1] a = np.ascontiguousarray(np.ravel(x), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] out = np.empty_like(a)
    cdef Py_ssize_t i, n = a.shape[0]
    with nogil:
        for i in range(n):
            out[i] = _digamma(a[i])
    return out.reshape(np.shape(x))


def trigamma(x):
    """Elementwise trigamma for positive input (NaN elsewhere)."""
    cdef cnp.ndarray[double, ndim=1] a = np.ascontiguousarray(np.ravel(x), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] out = np.empty_like(a)
    cdef Py_ssize_t i, n = a.shape[0]
    with nogil:
        for i in range(n):
            out[i] = _trigamma(a[i])
    return out.reshape(np.shape(x))


def beta_terms(const double[::1] log_y, const double[::1] log_1my, const double[::1] eta, double phi):
    """Per-observation pieces of the log-likelihood, score and information.

    Returns ``(loglik, u_phi, mu, resid, w, c, d)`` where ``resid`` is
    ``y* - mu*`` and ``w, c, d`` are the expected-information weights.
    """
    cdef Py_ssize_t i, n = eta.shape[0]
    cdef cnp.ndarray[double, ndim=1] mu_a = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] r_a = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] w_a = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] c_a = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] d_a = np.empty(n)
    cdef double[::1] mu_v = mu_a, r_v = r_a, w_v = w_a, c_v = c_a, d_v = d_a
    cdef double ll = 0.0, uphi = 0.0
    cdef double lg_phi = lgamma(phi), psi_phi = _digamma(phi), tri_phi = _trigamma(phi)
    cdef double e, m, q, a, b, pa, pb, ta, tb, t
    with nogil:
        for i in range(n):
            e = eta[i]
            if e >= 0:
                m = 1.0 / (1.0 + exp(-e))
                q = exp(-e) * m
            else:
                q = 1.0 / (1.0 + exp(e))
                m = exp(e) * q
            a = m * phi
            b = q * phi
            pa = _digamma(a)
            pb = _digamma(b)
            ta = _trigamma(a)
            tb = _trigamma(b)
            t = m * q
            ll += lg_phi - lgamma(a) - lgamma(b) + (a - 1.0) * log_y[i] + (b - 1.0) * log_1my[i]
            r_v[i] = (log_y[i] - log_1my[i]) - (pa - pb)
            uphi += m * r_v[i] + log_1my[i] - pb + psi_phi
            mu_v[i] = m
            w_v[i] = phi * (ta + tb) * t * t
            c_v[i] = phi * (ta * m - tb * q)
            d_v[i] = ta * m * m + tb * q * q - tri_phi
    return ll, uphi, mu_a, r_a, w_a, c_a, d_a


def beta_loglik(const double[::1] log_y, const double[::1] log_1my, const double[::1] eta, double phi):
    """Log-likelihood only; used by step-halving line searches."""
    cdef Py_ssize_t i, n = eta.shape[0]
    cdef double ll = 0.0, lg_phi = lgamma(phi), e, m, q, a, b
    with nogil:
        for i in range(n):
            e = eta[i]
            if e >= 0:
                m = 1.0 / (1.0 + exp(-e))
                q = exp(-e) * m
            else:
                q = 1.0 / (1.0 + exp(e))
                m = exp(e) * q
            a = m * phi
            b = q * phi
            ll += lg_phi - lgamma(a) - lgamma(b) + (a - 1.0) * log_y[i] + (b - 1.0) * log_1my[i]
    return ll
