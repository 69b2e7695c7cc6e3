# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled numeric kernels for the mixture sampler's hot loops.

Everything here is deterministic math (no RNG): log-space regularized
incomplete gamma, marginal log-densities of the three error laws on squared
residuals, and the fused per-observation model log-weight sweep.  A numpy
fallback with the same signatures lives in ``_kernels_py``.
"""

from libc.math cimport INFINITY, exp, fabs, lgamma, log, log1p

import numpy as np

__all__ = [
    "log_gammainc_lower",
    "model_log_weights",
    "normal_logpdf_sq",
    "slash_logpdf_sq",
    "student_t_logpdf_sq",
]

cdef double LOG_2PI = 1.8378770664093454836


cdef double _log_p_series(double a, double x) noexcept:
    # log P(a,x) by the lower series; safe for any x > 0, efficient for x < a+1.
    cdef double term = 1.0
    cdef double total = 1.0
    cdef double denom = a
    cdef int k
    for k in range(20000):
        denom += 1.0
        term *= x / denom
        total += term
        if term < total * 1e-17:
            break
    return a * log(x) - x - lgamma(a + 1.0) + log(total)


cdef double _log_q_contfrac(double a, double x) noexcept:
    # log Q(a,x) by Lentz's continued fraction; requires x >= a+1 so Q <= 1/2-ish.
    cdef double tiny = 1e-300
    cdef double b = x + 1.0 - a
    cdef double c = 1.0 / tiny
    cdef double d = 1.0 / b
    cdef double h = d
    cdef double an, delta
    cdef int i
    for i in range(1, 20000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if fabs(d) < tiny:
            d = tiny
        c = b + an / c
        if fabs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if fabs(delta - 1.0) < 1e-16:
            break
    return a * log(x) - x - lgamma(a) + log(h)


cdef double _log_gammainc_p(double a, double x) noexcept:
    if x <= 0.0:
        return -INFINITY
    if x == INFINITY:
        return 0.0
    if x < a + 1.0:
        return _log_p_series(a, x)
    return log1p(-exp(_log_q_contfrac(a, x)))


def log_gammainc_lower(double a, x):
    """log of the regularized lower incomplete gamma P(a, x), elementwise."""
    if a <= 0.0:
        raise ValueError("shape must be positive")
    xs = np.asarray(x, dtype=np.float64)
    flat = np.atleast_1d(xs).ravel()
    out = np.empty(flat.shape[0])
    cdef double[::1] xv = flat
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    for i in range(xv.shape[0]):
        ov[i] = _log_gammainc_p(a, xv[i])
    if xs.ndim == 0:
        return float(out[0])
    return out.reshape(xs.shape)


def normal_logpdf_sq(yt2, double scale2):
    """Gaussian log-density at squared deviations ``yt2`` with variance ``scale2``."""
    arr = np.ascontiguousarray(np.atleast_1d(yt2), dtype=np.float64)
    out = np.empty(arr.shape[0])
    cdef double[::1] xv = arr
    cdef double[::1] ov = out
    cdef double c = -0.5 * (LOG_2PI + log(scale2))
    cdef double inv = 0.5 / scale2
    cdef Py_ssize_t i
    for i in range(xv.shape[0]):
        ov[i] = c - xv[i] * inv
    return out


def student_t_logpdf_sq(yt2, double scale2, double nu):
    """Student-t log-density (scale parametrization) at squared deviations."""
    arr = np.ascontiguousarray(np.atleast_1d(yt2), dtype=np.float64)
    out = np.empty(arr.shape[0])
    cdef double[::1] xv = arr
    cdef double[::1] ov = out
    cdef double c = (lgamma(0.5 * (nu + 1.0)) - lgamma(0.5 * nu)
                     - 0.5 * log(nu * 3.14159265358979323846 * scale2))
    cdef double half1 = 0.5 * (nu + 1.0)
    cdef double inv = 1.0 / (nu * scale2)
    cdef Py_ssize_t i
    for i in range(xv.shape[0]):
        ov[i] = c - half1 * log1p(xv[i] * inv)
    return out


def slash_logpdf_sq(yt2, double scale2, double nu):
    """Slash log-density (scale parametrization) at squared deviations."""
    arr = np.ascontiguousarray(np.atleast_1d(yt2), dtype=np.float64)
    out = np.empty(arr.shape[0])
    cdef double[::1] xv = arr
    cdef double[::1] ov = out
    cdef double a = nu + 0.5
    cdef double head = log(nu) - 0.5 * (LOG_2PI + log(scale2))
    cdef double at_zero = head - log(a)
    cdef double lg = head + lgamma(a)
    cdef double inv = 0.5 / scale2
    cdef double b
    cdef Py_ssize_t i
    for i in range(xv.shape[0]):
        b = xv[i] * inv
        if b <= 0.0:
            ov[i] = at_zero
        else:
            ov[i] = lg + _log_gammainc_p(a, b) - a * log(b)
    return out


def model_log_weights(yt2, double sigma2, double nu_t, double nu_s):
    """Per-observation log-weights of the three error laws.

    Returns arrays (lw_normal, lw_student_t, lw_slash) with the common
    (2*pi*sigma2)^(-1/2) factor dropped from every law.  Squared residuals
    are floored at 1e-12*sigma2 inside the Slash term only.
    """
    arr = np.ascontiguousarray(np.atleast_1d(yt2), dtype=np.float64)
    cdef Py_ssize_t n = arr.shape[0]
    out1 = np.empty(n)
    out2 = np.empty(n)
    out3 = np.empty(n)
    cdef double[::1] xv = arr
    cdef double[::1] o1 = out1
    cdef double[::1] o2 = out2
    cdef double[::1] o3 = out3

    cdef double g2 = (nu_t - 2.0) / nu_t
    cdef double g3 = (nu_s - 1.0) / nu_s
    cdef double half_nu = 0.5 * nu_t
    cdef double c2 = (-0.5 * log(g2) + half_nu * log(half_nu)
                      + lgamma(half_nu + 0.5) - lgamma(half_nu))
    cdef double a3 = nu_s + 0.5
    cdef double c3 = -0.5 * log(g3) + log(nu_s) + lgamma(a3)
    cdef double floor = 1e-12 * sigma2
    cdef double inv1 = 0.5 / sigma2
    cdef double inv2 = 0.5 / (g2 * sigma2)
    cdef double inv3 = 0.5 / (g3 * sigma2)
    cdef double t2, b3
    cdef Py_ssize_t i
    for i in range(n):
        t2 = xv[i]
        o1[i] = -t2 * inv1
        o2[i] = c2 - (half_nu + 0.5) * log(t2 * inv2 + half_nu)
        b3 = (t2 if t2 > floor else floor) * inv3
        o3[i] = c3 + _log_gammainc_p(a3, b3) - a3 * log(b3)
    return out1, out2, out3
