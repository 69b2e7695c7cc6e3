"""The scale-mixture-of-normal error family: Normal, Student-t, Slash.

Each law is Y = mu + u^{-1/2} W with W ~ N(0, sigma2) and a positive mixing
variable u (degenerate at 1, Gamma(nu/2, nu/2), or Beta(nu, 1)).  This module
provides log-densities, moment factors, variance corrections, the mixing-law
samplers, and the truncated-distribution samplers the Gibbs blocks need.

All densities and CDFs are computed and returned in log space.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import special

from ._backend import kernels
from .errors import DomainError

LOG_2PI = np.log(2.0 * np.pi)

#: Degrees of freedom above this are numerically Gaussian; df samplers cap here.
NU_MAX = 200.0


class ModelKind(Enum):
    """The three mixture components, ordered as components 1..3."""

    NORMAL = 1
    STUDENT_T = 2
    SLASH = 3

    @property
    def slot(self) -> int:
        """0-based position in the canonical component order."""
        return self.value - 1

    @property
    def label(self) -> str:
        return {1: "normal", 2: "student-t", 3: "slash"}[self.value]

    @classmethod
    def from_label(cls, label: str) -> "ModelKind":
        table = {k.label: k for k in cls}
        key = label.strip().lower().replace("_", "-")
        if key not in table:
            raise DomainError(f"unknown model kind {label!r}; expected one of "
                              f"{sorted(table)}")
        return table[key]


KINDS = (ModelKind.NORMAL, ModelKind.STUDENT_T, ModelKind.SLASH)

#: Open lower bound of the df support per kind when Var[Y] = sigma2 must be
#: finite (the mixture model's parametrization requires this).
DF_LOWER = {ModelKind.STUDENT_T: 2.0, ModelKind.SLASH: 1.0}


def check_df(kind: ModelKind, nu, strict: bool = True) -> float:
    """Validate a degrees-of-freedom value.

    ``strict`` enforces the finite-variance support used throughout the
    mixture model (nu_t > 2, nu_s > 1); the plain laws themselves only need
    nu > 0, which is what density evaluation checks.
    """
    if kind is ModelKind.NORMAL:
        return float("nan")
    nu = float(nu)
    lo = DF_LOWER[kind] if strict else 0.0
    if not np.isfinite(nu) or nu <= lo:
        raise DomainError(f"{kind.label} requires nu > {lo:g}, got {nu!r}")
    return nu


@dataclass(frozen=True)
class SmnParams:
    """Location/scale/df triple of one error law (sigma2 is the scale, not
    necessarily the variance: Var[Y] = sigma2 * k_2)."""

    mu: float
    sigma2: float
    nu: float | None = None

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise DomainError(f"sigma2 must be positive, got {self.sigma2!r}")


@dataclass(frozen=True)
class MixingLaw:
    """Distribution of the latent scale variable u for one component."""

    kind: ModelKind
    nu: float | None = None

    def __post_init__(self):
        if self.kind is not ModelKind.NORMAL:
            check_df(self.kind, self.nu, strict=False)


def variance_correction(kind: ModelKind, nu=None) -> float:
    """Factor gamma making Var[Y] = sigma2 when the conditional variance is
    sigma2 * gamma / u: 1, (nu-2)/nu, or (nu-1)/nu."""
    if kind is ModelKind.NORMAL:
        return 1.0
    nu = check_df(kind, nu)
    if kind is ModelKind.STUDENT_T:
        return (nu - 2.0) / nu
    return (nu - 1.0) / nu


def moment_k(kind: ModelKind, nu, m: int) -> float:
    """k_m = E[u^{-m/2}] of the mixing law (Normal: 1 for every m)."""
    if m <= 0 or m % 2 != 0:
        raise DomainError(f"m must be an even positive integer, got {m!r}")
    if kind is ModelKind.NORMAL:
        return 1.0
    nu = check_df(kind, nu, strict=False)
    if kind is ModelKind.STUDENT_T:
        if m >= nu:
            raise DomainError(f"Student-t moment k_{m} needs nu > {m}, got {nu:g}")
        return (nu / 2.0) ** (m / 2.0) * np.exp(
            special.gammaln((nu - m) / 2.0) - special.gammaln(nu / 2.0))
    if m >= 2 * nu:
        raise DomainError(f"Slash moment k_{m} needs nu > {m / 2:g}, got {nu:g}")
    return 2.0 * nu / (2.0 * nu - m)


def excess_kurtosis(kind: ModelKind, nu=None) -> float:
    """Excess kurtosis 3*k_4/k_2^2 - 3 (requires a finite fourth moment)."""
    if kind is ModelKind.NORMAL:
        return 0.0
    k2 = moment_k(kind, nu, 2)
    k4 = moment_k(kind, nu, 4)
    return 3.0 * k4 / (k2 * k2) - 3.0


def marginal_logdensity(y, params: SmnParams, kind: ModelKind) -> np.ndarray | float:
    """Log of the marginal density of Y with u integrated out analytically."""
    y = np.asarray(y, dtype=np.float64)
    yt2 = np.atleast_1d((y - params.mu) ** 2)
    if kind is ModelKind.NORMAL:
        out = kernels.normal_logpdf_sq(yt2, params.sigma2)
    elif kind is ModelKind.STUDENT_T:
        nu = check_df(kind, params.nu, strict=False)
        out = kernels.student_t_logpdf_sq(yt2, params.sigma2, nu)
    else:
        nu = check_df(kind, params.nu, strict=False)
        out = kernels.slash_logpdf_sq(yt2, params.sigma2, nu)
    if y.ndim == 0:
        return float(out[0])
    return out.reshape(y.shape)


def unit_variance_logdensity(kind: ModelKind, nu, y) -> np.ndarray | float:
    """Log-density of the variance-standardized law (mu=0, Var=1).

    This is the mixture component's density at sigma2=1: the raw law with
    its scale replaced by the variance correction gamma.
    """
    scale2 = variance_correction(kind, nu)
    return marginal_logdensity(y, SmnParams(0.0, scale2, nu), kind)


def log_gamma_cdf(x, shape: float, rate: float) -> np.ndarray | float:
    """log F_G(x; shape, rate), the Gamma distribution function in log space."""
    if not shape > 0:
        raise DomainError(f"shape must be positive, got {shape!r}")
    if not rate > 0:
        raise DomainError(f"rate must be positive, got {rate!r}")
    return kernels.log_gammainc_lower(shape, np.asarray(x, dtype=np.float64) * rate)


def sample_mixing(law: MixingLaw, rng: np.random.Generator, size=None):
    """Draw from the component's mixing law (u=1, Gamma(nu/2,nu/2), Beta(nu,1))."""
    if law.kind is ModelKind.NORMAL:
        return 1.0 if size is None else np.ones(size)
    if law.kind is ModelKind.STUDENT_T:
        return rng.gamma(law.nu / 2.0, 2.0 / law.nu, size=size)
    return rng.beta(law.nu, 1.0, size=size)


def truncated_gamma_01_ppf(shape: float, rate, v):
    """Quantile function of Gamma(shape, rate) restricted to (0, 1].

    ``rate`` may be a scalar or array; ``v`` holds probabilities in (0, 1].
    rate <= ~1e-12 falls back to the Beta(shape, 1) limit, and entries where
    the linear-space inverse underflows are solved by log-space bisection.
    """
    if not shape > 0:
        raise DomainError(f"shape must be positive, got {shape!r}")
    rate = np.atleast_1d(np.asarray(rate, dtype=np.float64))
    v = np.atleast_1d(np.asarray(v, dtype=np.float64))
    rate, v = np.broadcast_arrays(rate, v)
    if np.any(rate < 0):
        raise DomainError("rate must be nonnegative")
    out = np.empty(rate.shape)

    beta_limit = rate <= 1e-12
    if np.any(beta_limit):
        out[beta_limit] = v[beta_limit] ** (1.0 / shape)

    gen = ~beta_limit
    if np.any(gen):
        b = rate[gen]
        log_p_at_1 = kernels.log_gammainc_lower(shape, b)
        q = np.exp(np.log(v[gen]) + log_p_at_1)
        with np.errstate(all="ignore"):
            u = special.gammaincinv(shape, q) / b
        bad = ~np.isfinite(u) | (u <= 0.0)
        if np.any(bad):
            idx = np.flatnonzero(bad)
            targets = np.log(v[gen][idx]) + log_p_at_1[idx]
            for j, k in enumerate(idx):
                u[k] = _trunc_gamma_bisect(shape, b[k], targets[j])
        out[gen] = np.minimum(u, 1.0)
    return out


def _trunc_gamma_bisect(shape, rate, log_target, iters=90):
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if kernels.log_gammainc_lower(shape, rate * mid) < log_target:
            lo = mid
        else:
            hi = mid
    return max(hi, np.nextafter(0.0, 1.0))


def sample_truncated_gamma_01(shape: float, rate, rng: np.random.Generator,
                              size=None):
    """Draw from Gamma(shape, rate) restricted to (0, 1] by inverse CDF."""
    rate = np.asarray(rate, dtype=np.float64)
    if size is None:
        size = rate.shape if rate.ndim else None
    v = 1.0 - rng.random(size=size)  # in (0, 1], avoids exact-zero quantiles
    out = truncated_gamma_01_ppf(shape, rate, v)
    if size is None:
        return float(out[0])
    return out


def sample_truncated_normal_upper(mu, sigma2, kappa, rng: np.random.Generator,
                                  size=None):
    """Draw from N(mu, sigma2) conditioned on (-inf, kappa].

    Uses inverse-CDF sampling except when the truncation point is more than
    4 standard deviations below the mean, where it switches to an exponential
    tail rejection sampler to keep deep-tail draws finite and exact.
    """
    mu = np.asarray(mu, dtype=np.float64)
    sigma2 = np.asarray(sigma2, dtype=np.float64)
    kappa = np.asarray(kappa, dtype=np.float64)
    if np.any(sigma2 <= 0):
        raise DomainError("sigma2 must be positive")
    scalar = mu.ndim == 0 and sigma2.ndim == 0 and kappa.ndim == 0 and size is None
    if size is not None:
        mu, sigma2, kappa = (np.broadcast_to(a, size) for a in (mu, sigma2, kappa))
    mu, sigma2, kappa = np.atleast_1d(*np.broadcast_arrays(mu, sigma2, kappa))
    sd = np.sqrt(sigma2)
    alpha = (kappa - mu) / sd
    out = np.empty(alpha.shape)

    easy = alpha > -4.0
    if np.any(easy):
        v = 1.0 - rng.random(int(easy.sum()))  # (0,1]: v=1 lands exactly on kappa
        out[easy] = special.ndtri(v * special.ndtr(alpha[easy]))
    hard = ~easy
    if np.any(hard):
        out[hard] = -_normal_tail_beyond(-alpha[hard], rng)
    y = np.minimum(mu + sd * np.minimum(out, alpha), kappa)
    return float(y[0]) if scalar else y


def _normal_tail_beyond(a, rng):
    # Standard-normal draws conditioned on being >= a (a >= 4), by exponential
    # proposal z = a + Exp(a) accepted with probability exp(-(z-a)^2/2).
    z = np.empty(a.shape)
    todo = np.ones(a.shape, dtype=bool)
    while np.any(todo):
        m = int(todo.sum())
        cand = a[todo] + rng.exponential(1.0, m) / a[todo]
        keep = rng.random(m) <= np.exp(-0.5 * (cand - a[todo]) ** 2)
        sel = np.flatnonzero(todo)[keep]
        z[sel] = cand[keep]
        todo[sel] = False
    return z
