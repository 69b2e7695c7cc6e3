"""Pure numpy/scipy fallback for the compiled kernels in ``_kernels.pyx``.

Same call signatures, same math.  scipy's linear-space ``gammainc`` is used
where it does not underflow; entries that underflow to zero are patched with
a log-space series evaluation, so log-weights stay finite for arbitrarily
small residuals and large shape parameters.
"""

import numpy as np
from scipy import special

__all__ = [
    "log_gammainc_lower",
    "model_log_weights",
    "normal_logpdf_sq",
    "slash_logpdf_sq",
    "student_t_logpdf_sq",
]

LOG_2PI = np.log(2.0 * np.pi)


def _log_p_series(a, x):
    # log P(a,x) via the lower series; never under/overflows for x > 0.
    term = 1.0
    total = 1.0
    denom = a
    for _ in range(20000):
        denom += 1.0
        term *= x / denom
        total += term
        if term < total * 1e-17:
            break
    return a * np.log(x) - x - special.gammaln(a + 1.0) + np.log(total)


def log_gammainc_lower(a, x):
    """log of the regularized lower incomplete gamma P(a, x), elementwise."""
    if a <= 0.0:
        raise ValueError("shape must be positive")
    xs = np.asarray(x, dtype=np.float64)
    flat = np.atleast_1d(xs).astype(np.float64).ravel()
    with np.errstate(divide="ignore"):
        out = np.log(special.gammainc(a, np.maximum(flat, 0.0)))
    # gammainc underflows to 0 for x << a even though log P is representable
    bad = np.isneginf(out) & (flat > 0.0)
    if np.any(bad):
        out[bad] = [_log_p_series(a, xi) for xi in flat[bad]]
    if xs.ndim == 0:
        return float(out[0])
    return out.reshape(xs.shape)


def normal_logpdf_sq(yt2, scale2):
    """Gaussian log-density at squared deviations ``yt2`` with variance ``scale2``."""
    yt2 = np.atleast_1d(np.asarray(yt2, dtype=np.float64))
    return -0.5 * (LOG_2PI + np.log(scale2)) - yt2 / (2.0 * scale2)


def student_t_logpdf_sq(yt2, scale2, nu):
    """Student-t log-density (scale parametrization) at squared deviations."""
    yt2 = np.atleast_1d(np.asarray(yt2, dtype=np.float64))
    return (special.gammaln(0.5 * (nu + 1.0)) - special.gammaln(0.5 * nu)
            - 0.5 * np.log(nu * np.pi * scale2)
            - 0.5 * (nu + 1.0) * np.log1p(yt2 / (nu * scale2)))


def slash_logpdf_sq(yt2, scale2, nu):
    """Slash log-density (scale parametrization) at squared deviations."""
    yt2 = np.atleast_1d(np.asarray(yt2, dtype=np.float64))
    a = nu + 0.5
    b = yt2 / (2.0 * scale2)
    head = np.log(nu) - 0.5 * (LOG_2PI + np.log(scale2))
    out = np.full(yt2.shape, head - np.log(a))
    pos = b > 0.0
    if np.any(pos):
        bp = b[pos]
        out[pos] = (head + special.gammaln(a) + log_gammainc_lower(a, bp)
                    - a * np.log(bp))
    return out


def model_log_weights(yt2, sigma2, nu_t, nu_s):
    """Per-observation log-weights of the three error laws.

    Returns arrays (lw_normal, lw_student_t, lw_slash) with the common
    (2*pi*sigma2)^(-1/2) factor dropped from every law.  Squared residuals
    are floored at 1e-12*sigma2 inside the Slash term only.
    """
    yt2 = np.atleast_1d(np.asarray(yt2, dtype=np.float64))
    g2 = (nu_t - 2.0) / nu_t
    g3 = (nu_s - 1.0) / nu_s
    half_nu = 0.5 * nu_t

    lw1 = -yt2 / (2.0 * sigma2)

    c2 = (-0.5 * np.log(g2) + half_nu * np.log(half_nu)
          + special.gammaln(half_nu + 0.5) - special.gammaln(half_nu))
    lw2 = c2 - (half_nu + 0.5) * np.log(yt2 / (2.0 * g2 * sigma2) + half_nu)

    a3 = nu_s + 0.5
    c3 = -0.5 * np.log(g3) + np.log(nu_s) + special.gammaln(a3)
    b3 = np.maximum(yt2, 1e-12 * sigma2) / (2.0 * g3 * sigma2)
    lw3 = c3 + log_gammainc_lower(a3, b3) - a3 * np.log(b3)
    return lw1, lw2, lw3
