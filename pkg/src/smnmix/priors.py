"""Prior machinery: penalised-complexity priors on the df parameters,
the sparse Dirichlet prior on mixture weights, and the conjugate
Normal/inverse-gamma priors on the regression block.

The PC prior puts an exponential law with rate ``lambda`` on the complexity
distance d(nu) = sqrt(2 * KLD(f_nu || N(0,1))), where f_nu is the
variance-standardized component density.  d is strictly decreasing in nu, so
the prior shrinks toward the Gaussian base model.  Standardizing to unit
variance before taking the KLD is a modelling choice: the scale is a shared
parameter of the mixture, so the flexibility prior should only see tail
shape.  d is precomputed on a log-spaced grid and interpolated; the prior is
normalized over the working df range (lower support bound + 1e-4 up to 200).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate, interpolate, optimize

from .errors import DomainError, NumericalError
from .families import (
    DF_LOWER,
    NU_MAX,
    ModelKind,
    check_df,
    unit_variance_logdensity,
)

LOG_2PI = np.log(2.0 * np.pi)

DEFAULT_GRID_SIZE = 400
DEFAULT_LOWER_OFFSET = 1e-4

# Default calibration: P(nu_t < 10) = 0.8 for Student-t, and the Slash df
# that is KL-matched to a Student-t with 10 df gets the same mass.
DEFAULT_NU_STAR_T = 10.0
DEFAULT_XI = 0.8


@dataclass(frozen=True)
class RegressionPrior:
    """N(mu0, tau0_sq * I) on the coefficients, IG(a0, b0) on the variance."""

    mu0: float | np.ndarray = 0.0
    tau0_sq: float = 100.0
    a0: float = 2.1
    b0: float = 1.1

    def __post_init__(self):
        if not (self.tau0_sq > 0 and self.a0 > 0 and self.b0 > 0):
            raise DomainError("tau0_sq, a0 and b0 must all be positive")

    def mu0_vector(self, q: int) -> np.ndarray:
        mu0 = np.asarray(self.mu0, dtype=np.float64)
        if mu0.ndim == 0:
            return np.full(q, float(mu0))
        if mu0.shape != (q,):
            raise DomainError(f"mu0 has shape {mu0.shape}, expected ({q},)")
        return mu0


@dataclass(frozen=True)
class DirichletPrior:
    """Dirichlet(alpha) on the mixture weights."""

    alpha: tuple

    def __post_init__(self):
        alpha = tuple(float(a) for a in np.atleast_1d(self.alpha))
        if any(a <= 0 for a in alpha):
            raise DomainError("all Dirichlet concentrations must be positive")
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def sparse(cls, k: int = 3, concentration: float = 0.01) -> "DirichletPrior":
        return cls(alpha=(concentration,) * k)

    @property
    def k(self) -> int:
        return len(self.alpha)


def posterior_mean_bounds(prior: DirichletPrior) -> np.ndarray:
    """A-priori bounds on the posterior mean of each mixture weight.

    Whatever the data, E[p_j | y] lies in
    (alpha_j / (1 + sum(alpha)), (alpha_j + 1) / (1 + sum(alpha))).
    Returns a (K, 2) array of (low, high) rows.
    """
    alpha = np.asarray(prior.alpha)
    denom = 1.0 + alpha.sum()
    return np.column_stack((alpha / denom, (alpha + 1.0) / denom))


# ---------------------------------------------------------------------------
# Kullback-Leibler complexity distance
# ---------------------------------------------------------------------------

def _kld_quadrature(logf, logg, tail_start=60.0):
    """KLD(f || g) = int f log(f/g) for symmetric unit-variance densities.

    Integrates 2 * int_0^inf, split into panels so the adaptive rule resolves
    both a possible spike at the origin and slow polynomial tails.
    """
    def integrand(y):
        lf = logf(y)
        if not np.isfinite(lf):
            return 0.0
        return np.exp(lf) * (lf - logg(y))

    total = 0.0
    abserr = 0.0
    with warnings.catch_warnings():
        # slow polynomial tails trigger a convergence warning even when the
        # returned error bound is tiny; the bound is checked below instead
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for lo, hi in ((0.0, 0.5), (0.5, 5.0), (5.0, tail_start)):
            v, e = integrate.quad(integrand, lo, hi, epsabs=1e-12,
                                  epsrel=1e-10, limit=300)
            total += v
            abserr += e
        v, e = integrate.quad(integrand, tail_start, np.inf, epsabs=1e-12,
                              limit=300)
        total += v
        abserr += e
    if abserr > 1e-6:
        raise NumericalError(
            f"KLD quadrature did not converge (estimate {total!r}, "
            f"accumulated error bound {abserr!r})")
    return 2.0 * total


def _log_std_normal(y):
    return -0.5 * (LOG_2PI + y * y)


def kld_distance(kind: ModelKind, nu) -> float:
    """Complexity distance d(nu) = sqrt(2 * KLD(f_nu || N(0,1))).

    f_nu is the unit-variance standardization of the component's density, so
    d measures tail flexibility only and decreases to 0 as nu grows.
    """
    nu = check_df(kind, nu)
    kl = _kld_quadrature(lambda y: unit_variance_logdensity(kind, nu, y),
                         _log_std_normal)
    return float(np.sqrt(2.0 * max(kl, 0.0)))


def kld_between_standardized(kind_f: ModelKind, nu_f, kind_g: ModelKind,
                             nu_g) -> float:
    """KLD between two variance-standardized component densities."""
    nu_f = check_df(kind_f, nu_f)
    nu_g = check_df(kind_g, nu_g)
    return _kld_quadrature(
        lambda y: unit_variance_logdensity(kind_f, nu_f, y),
        lambda y: unit_variance_logdensity(kind_g, nu_g, y))


def match_slash_df(nu_t, bounds=(1.0 + 1e-3, 60.0)) -> float:
    """Slash df minimizing KLD(Slash(nu_s) || Student-t(nu_t)), standardized."""
    nu_t = check_df(ModelKind.STUDENT_T, nu_t)
    res = optimize.minimize_scalar(
        lambda ns: kld_between_standardized(ModelKind.SLASH, ns,
                                            ModelKind.STUDENT_T, nu_t),
        bounds=bounds, method="bounded", options={"xatol": 1e-5})
    if not res.success:
        raise NumericalError(f"slash df matching failed: {res.message}")
    return float(res.x)


# ---------------------------------------------------------------------------
# PC prior
# ---------------------------------------------------------------------------

_D_TABLE_CACHE: dict = {}


def _build_d_table(kind: ModelKind, grid_size: int, lower_offset: float,
                   nu_max: float):
    key = (kind, grid_size, lower_offset, nu_max)
    if key not in _D_TABLE_CACHE:
        lo = DF_LOWER[kind]
        offsets = np.geomspace(lower_offset, nu_max - lo, grid_size)
        nu_grid = lo + offsets
        nu_grid[-1] = nu_max
        d_grid = np.array([kld_distance(kind, nu) for nu in nu_grid])
        # node slopes of the monotone interpolant (finite-difference based)
        d_prime = interpolate.PchipInterpolator(nu_grid, d_grid).derivative()(nu_grid)
        _D_TABLE_CACHE[key] = (nu_grid, d_grid, d_prime)
    return _D_TABLE_CACHE[key]


def calibrate_lambda(kind: ModelKind, nu_star, xi: float, *, d_of_nu_star=None) -> float:
    """Rate lambda such that P(nu < nu_star) = xi under d ~ Exp(lambda)."""
    if not 0.0 < xi < 1.0:
        raise DomainError(f"xi must lie in (0, 1), got {xi!r}")
    d_star = kld_distance(kind, nu_star) if d_of_nu_star is None else d_of_nu_star
    if d_star < 1e-3:
        raise NumericalError(
            f"d(nu_star) = {d_star:.2e} is numerically zero; nu_star = "
            f"{nu_star:g} is too close to the Gaussian base model")
    return float(-np.log(xi) / d_star)


@dataclass(frozen=True)
class PcPrior:
    """Penalised-complexity prior on one df parameter, backed by a d-table."""

    kind: ModelKind
    lam: float
    nu_star: float
    xi: float
    nu_grid: np.ndarray
    d_grid: np.ndarray
    d_prime_grid: np.ndarray
    _d: interpolate.PchipInterpolator = field(repr=False, default=None)
    _d_deriv: interpolate.PchipInterpolator = field(repr=False, default=None)
    _nu_of_d: interpolate.PchipInterpolator = field(repr=False, default=None)

    def __post_init__(self):
        if np.any(np.diff(self.d_grid) >= 0):
            raise NumericalError("d(nu) table is not strictly decreasing")
        d = interpolate.PchipInterpolator(self.nu_grid, self.d_grid)
        object.__setattr__(self, "_d", d)
        # using the interpolant's own derivative keeps the truncated prior
        # exactly normalized (plain change of variables through d)
        object.__setattr__(self, "_d_deriv", d.derivative())
        object.__setattr__(self, "_nu_of_d",
                           interpolate.PchipInterpolator(self.d_grid[::-1],
                                                         self.nu_grid[::-1]))

    @classmethod
    def build(cls, kind: ModelKind, nu_star=None, xi=None, *,
              grid_size: int = DEFAULT_GRID_SIZE,
              lower_offset: float = DEFAULT_LOWER_OFFSET,
              nu_max: float = NU_MAX,
              cache_path=None) -> "PcPrior":
        """Construct the prior, computing (or loading) the d-table.

        Default calibration is (nu_star=10, xi=0.8) for Student-t and the
        KL-matched slash df with the same xi for Slash.
        """
        if kind is ModelKind.NORMAL:
            raise DomainError("the Normal component has no df parameter")
        if xi is None:
            xi = DEFAULT_XI
        if nu_star is None:
            nu_star = (DEFAULT_NU_STAR_T if kind is ModelKind.STUDENT_T
                       else _default_slash_nu_star())
        nu_star = check_df(kind, nu_star)
        if cache_path is not None and Path(cache_path).exists():
            nu_grid, d_grid, d_prime = load_d_table(cache_path)
        else:
            nu_grid, d_grid, d_prime = _build_d_table(kind, grid_size,
                                                      lower_offset, nu_max)
            if cache_path is not None:
                save_d_table(cache_path, nu_grid, d_grid, d_prime)
        d_interp = interpolate.PchipInterpolator(nu_grid, d_grid)
        lam = calibrate_lambda(kind, nu_star, xi,
                               d_of_nu_star=float(d_interp(nu_star)))
        return cls(kind=kind, lam=lam, nu_star=nu_star, xi=xi,
                   nu_grid=np.asarray(nu_grid), d_grid=np.asarray(d_grid),
                   d_prime_grid=np.asarray(d_prime))

    @property
    def support(self):
        return float(self.nu_grid[0]), float(self.nu_grid[-1])

    def distance(self, nu):
        return self._d(nu)

    def _log_normalizer(self) -> float:
        # exponential mass between the table's distance endpoints
        hi = np.exp(-self.lam * self.d_grid[-1])
        lo = np.exp(-self.lam * self.d_grid[0])
        return float(np.log(hi - lo))

    def log_prior(self, nu) -> np.ndarray | float:
        """log pi(nu); -inf outside the tabulated support."""
        nu_arr = np.atleast_1d(np.asarray(nu, dtype=np.float64))
        out = np.full(nu_arr.shape, -np.inf)
        ok = (nu_arr >= self.nu_grid[0]) & (nu_arr <= self.nu_grid[-1])
        if np.any(ok):
            d = self._d(nu_arr[ok])
            ad = np.maximum(-self._d_deriv(nu_arr[ok]), 1e-300)
            out[ok] = (np.log(self.lam) - self.lam * d + np.log(ad)
                       - self._log_normalizer())
        if np.ndim(nu) == 0:
            return float(out[0])
        return out

    def prior_cdf(self, nu) -> np.ndarray | float:
        d = self._d(np.clip(nu, self.nu_grid[0], self.nu_grid[-1]))
        lo = np.exp(-self.lam * self.d_grid[0])
        return (np.exp(-self.lam * d) - lo) / np.exp(self._log_normalizer())

    def sample(self, rng: np.random.Generator, size=None):
        """Inverse-transform draws: truncated Exp(lambda) on d, mapped back to nu."""
        t_lo = np.exp(-self.lam * self.d_grid[0])
        t_hi = np.exp(-self.lam * self.d_grid[-1])
        t = t_lo + (t_hi - t_lo) * rng.random(size)
        d = -np.log(t) / self.lam
        return self._nu_of_d(np.clip(d, self.d_grid[-1], self.d_grid[0]))


def pc_log_prior(prior: PcPrior, nu):
    """log pi(nu) under a PC prior (-inf outside the df support)."""
    return prior.log_prior(nu)


_DEFAULT_SLASH_NU_STAR: list = []


def _default_slash_nu_star() -> float:
    if not _DEFAULT_SLASH_NU_STAR:
        _DEFAULT_SLASH_NU_STAR.append(match_slash_df(DEFAULT_NU_STAR_T))
    return _DEFAULT_SLASH_NU_STAR[0]


# ---------------------------------------------------------------------------
# d-table persistence (CSV of nu, d, d' rows; round-trips exactly)
# ---------------------------------------------------------------------------

def save_d_table(path, nu_grid, d_grid, d_prime_grid) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["nu", "d", "d_prime"])
        for row in zip(nu_grid, d_grid, d_prime_grid):
            writer.writerow([f"{v:.17g}" for v in row])


def load_d_table(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["nu", "d", "d_prime"]:
            raise DomainError(f"unrecognized d-table header in {path}: {header}")
        rows = np.array([[float(v) for v in row] for row in reader])
    return rows[:, 0], rows[:, 1], rows[:, 2]
