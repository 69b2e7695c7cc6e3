"""Model-comparison criteria over stored draws, Geweke diagnostics, and
posterior summaries with highest-posterior-density intervals.

The criteria consume an (M, n) matrix of per-draw, per-observation
log-likelihoods.  For mixture fits that matrix is built with the marginal
density of the component active at each draw (latent scales integrated out
analytically), which reproduces the per-model usage of these criteria when
restricted to the draws that visited one model.  Everything is computed in
log space; no criterion overflows for log-likelihoods down to -700.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._backend import kernels
from .errors import DataError, DomainError, NumericalError
from .families import KINDS, ModelKind, variance_correction
from .sampler import ChainOutput, Dataset

HARMONIC_MEAN_WARN_LOG = -600.0


@dataclass
class Summary:
    mean: float
    median: float
    sd: float
    hpd_low: float
    hpd_high: float

    def as_dict(self):
        return {"mean": self.mean, "median": self.median, "sd": self.sd,
                "hpd_low": self.hpd_low, "hpd_high": self.hpd_high}


@dataclass
class CriteriaReport:
    lpml: float
    dic: float
    eaic: float
    ebic: float
    waic: float
    rho_d: float
    rho_waic: float
    cpo: np.ndarray
    n_draws: int
    n_params: int

    def as_dict(self):
        return {"lpml": self.lpml, "dic": self.dic, "eaic": self.eaic,
                "ebic": self.ebic, "waic": self.waic, "rho_d": self.rho_d,
                "rho_waic": self.rho_waic, "cpo": self.cpo.tolist(),
                "n_draws": self.n_draws, "n_params": self.n_params}


# ---------------------------------------------------------------------------
# Criteria on a log-likelihood matrix
# ---------------------------------------------------------------------------

def _check_loglik(loglik, min_draws=1):
    loglik = np.atleast_2d(np.asarray(loglik, dtype=np.float64))
    if loglik.shape[0] < min_draws:
        raise DataError(f"need at least {min_draws} draws, got {loglik.shape[0]}")
    return loglik


def dic(loglik, loglik_at_posterior_mean):
    """Deviance information criterion: (DIC, rho_D).

    D-bar is the posterior mean deviance over the draws; D(theta-tilde) comes
    from the supplied per-observation log-likelihood at the posterior mean.
    """
    loglik = _check_loglik(loglik)
    d_bar = -2.0 * float(loglik.sum(axis=1).mean())
    d_at_mean = -2.0 * float(np.asarray(loglik_at_posterior_mean).sum())
    return 2.0 * d_bar - d_at_mean, d_bar - d_at_mean


def waic(loglik):
    """Widely applicable information criterion: (WAIC, rho_WAIC, lppd)."""
    loglik = _check_loglik(loglik, min_draws=2)
    m = loglik.shape[0]
    lppd = float((logsumexp(loglik, axis=0) - np.log(m)).sum())
    rho = float(loglik.var(axis=0, ddof=1).sum())
    return -2.0 * (lppd - rho), rho, lppd


def eaic_ebic(d_bar, n_params, n_obs):
    """Expected AIC and BIC from the posterior mean deviance."""
    if n_params < 0 or n_obs <= 0:
        raise DomainError("parameter and observation counts must be positive")
    return d_bar + 2.0 * n_params, d_bar + n_params * np.log(n_obs)


def cpo_lpml(loglik):
    """Harmonic-mean conditional predictive ordinates: (cpo vector, LPML).

    LPML is the sum of log CPO values; unlike the deviance-based criteria,
    larger LPML means a better fit (some references tabulate -LPML instead).
    """
    loglik = _check_loglik(loglik)
    m = loglik.shape[0]
    log_cpo = np.log(m) - logsumexp(-loglik, axis=0)
    if np.any(log_cpo < HARMONIC_MEAN_WARN_LOG):
        import warnings
        warnings.warn("some CPO values are numerically zero; the harmonic-mean "
                      "estimator is unstable for these observations")
    return np.exp(log_cpo), float(log_cpo.sum())


# ---------------------------------------------------------------------------
# Convergence diagnostics and posterior summaries
# ---------------------------------------------------------------------------

def _batch_mean_variance(x):
    # variance of the segment mean, estimated from floor(sqrt(L)) batch means
    length = x.shape[0]
    n_batches = int(np.floor(np.sqrt(length)))
    size = length // n_batches
    means = x[: n_batches * size].reshape(n_batches, size).mean(axis=1)
    return float(means.var(ddof=1) / n_batches)


def mcse(x):
    """Batch-means Monte Carlo standard error of the series mean."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] < 4:
        raise DataError("series too short for a batch-means standard error")
    return float(np.sqrt(_batch_mean_variance(x)))


def geweke_z(series, frac_a=0.1, frac_b=0.5):
    """Geweke convergence z-score comparing the first and last chain segments.

    Spectral variances at frequency zero are estimated by nonoverlapping
    batch means on each segment.
    """
    x = np.asarray(series, dtype=np.float64).ravel()
    if x.shape[0] < 100:
        raise DataError(f"series length {x.shape[0]} < 100")
    if np.ptp(x) == 0.0:
        raise NumericalError("constant chain: Geweke z is undefined")
    seg_a = x[: int(frac_a * x.shape[0])]
    seg_b = x[-int(frac_b * x.shape[0]):]
    var = _batch_mean_variance(seg_a) + _batch_mean_variance(seg_b)
    if var == 0.0:
        raise NumericalError("zero spectral variance in both segments")
    return float((seg_a.mean() - seg_b.mean()) / np.sqrt(var))


def posterior_summary(series, level=0.95) -> Summary:
    """Mean, median, sd and the shortest interval holding ``level`` mass."""
    x = np.sort(np.asarray(series, dtype=np.float64).ravel())
    m = x.shape[0]
    if m < 2:
        raise DataError("need at least 2 draws to summarize")
    if not 0.0 < level < 1.0:
        raise DomainError("level must lie in (0, 1)")
    k = min(m, max(2, int(np.ceil(level * m))))
    widths = x[k - 1:] - x[: m - k + 1]
    i = int(np.argmin(widths))
    return Summary(mean=float(x.mean()), median=float(np.median(x)),
                   sd=float(x.std(ddof=1)), hpd_low=float(x[i]),
                   hpd_high=float(x[i + k - 1]))


# ---------------------------------------------------------------------------
# Log-likelihood matrices from chain output
# ---------------------------------------------------------------------------

def _component_loglik(yt2, sigma2, gamma, kind: ModelKind, nu):
    scale2 = gamma * sigma2
    if kind is ModelKind.NORMAL:
        return kernels.normal_logpdf_sq(yt2, scale2)
    if kind is ModelKind.STUDENT_T:
        return kernels.student_t_logpdf_sq(yt2, scale2, nu)
    return kernels.slash_logpdf_sq(yt2, scale2, nu)


def _effective_y(output: ChainOutput, data: Dataset, row):
    if output.censored_draws is None:
        return data.y
    y = data.y.copy()
    y[output.censored_indices] = output.censored_draws[row]
    return y


def pointwise_loglik(output: ChainOutput, data: Dataset, rows=None):
    """(M, n) log f(y_i | theta_m) using each draw's active component.

    Censored responses enter through their stored imputations, i.e. this is
    the augmented-data likelihood for censored fits.
    """
    rows = np.arange(output.n_draws) if rows is None else np.asarray(rows)
    out = np.empty((rows.size, data.n))
    for j, m in enumerate(rows):
        kind = ModelKind(output.z_index[m])
        nu = output.nu_t[m] if kind is ModelKind.STUDENT_T else output.nu_s[m]
        resid = _effective_y(output, data, m) - data.X @ output.beta[m]
        out[j] = _component_loglik(resid * resid, output.sigma2[m],
                                   output.gamma[m], kind, nu)
    return out


def model_conditional_criteria(output: ChainOutput, data: Dataset,
                               kind: ModelKind, max_draws=4000):
    """All criteria over the draws that visited one model, or None if < 2."""
    rows = output.model_draw_indices(kind)
    if rows.size < 2:
        return None
    if rows.size > max_draws:
        rows = rows[np.linspace(0, rows.size - 1, max_draws).astype(int)]
    loglik = pointwise_loglik(output, data, rows)

    beta_bar = output.beta[rows].mean(axis=0)
    sigma2_bar = float(output.sigma2[rows].mean())
    if kind is ModelKind.NORMAL:
        nu_bar, gamma_bar, n_params = None, 1.0, data.q + 1
    else:
        nu_draws = (output.nu_t if kind is ModelKind.STUDENT_T
                    else output.nu_s)[rows]
        nu_bar = float(nu_draws.mean())
        gamma_bar = variance_correction(kind, nu_bar)
        n_params = data.q + 2
    y_bar = data.y.copy()
    if output.censored_draws is not None:
        # posterior-mean latent responses for the censored entries
        y_bar[output.censored_indices] = output.censored_draws[rows].mean(axis=0)
    resid = y_bar - data.X @ beta_bar
    ll_at_mean = _component_loglik(resid * resid, sigma2_bar, gamma_bar, kind,
                                   nu_bar)

    d_bar = -2.0 * float(loglik.sum(axis=1).mean())
    dic_val, rho_d = dic(loglik, ll_at_mean)
    waic_val, rho_waic, _ = waic(loglik)
    cpo, lpml = cpo_lpml(loglik)
    eaic, ebic = eaic_ebic(d_bar, n_params, data.n)
    return CriteriaReport(lpml=lpml, dic=dic_val, eaic=eaic, ebic=ebic,
                          waic=waic_val, rho_d=rho_d, rho_waic=rho_waic,
                          cpo=cpo, n_draws=rows.size, n_params=n_params)


def _summary_block(output: ChainOutput, rows, names, level=0.95,
                   min_df_draws=100):
    block = {}
    for j, name in enumerate(names):
        block[name] = posterior_summary(output.beta[rows, j], level).as_dict()
    block["sigma2"] = posterior_summary(output.sigma2[rows], level).as_dict()
    for kind, series in ((ModelKind.STUDENT_T, output.nu_t),
                         (ModelKind.SLASH, output.nu_s)):
        if kind not in output.components:
            continue
        key = "nu_t" if kind is ModelKind.STUDENT_T else "nu_s"
        cond = series[rows][output.z_index[rows] == kind.value]
        block[key] = (posterior_summary(cond, level).as_dict()
                      if cond.size >= min_df_draws else None)
    return block


def build_report(output: ChainOutput, data: Dataset, level=0.95,
                 max_draws=4000, coef_names=None):
    """JSON-ready criteria report for one fitted chain.

    Headline criteria refer to the selected model's conditional draws; the
    per-model block carries the same criteria for every visited model.
    Summaries are reported both model-averaged (whole chain) and conditional
    on the selected model.
    """
    names = (list(coef_names) if coef_names is not None
             else [f"beta_{j}" for j in range(output.q)])
    all_rows = np.arange(output.n_draws)
    selected = output.selected_model()

    per_model = {}
    for kind in output.components:
        rep = model_conditional_criteria(output, data, kind, max_draws)
        if rep is not None:
            per_model[kind.label] = rep.as_dict()

    headline = per_model.get(selected.label)
    geweke = {}
    if output.n_draws >= 100:
        for j, name in enumerate(names):
            geweke[name] = geweke_z(output.beta[:, j])
        geweke["sigma2"] = geweke_z(output.sigma2)

    sel_rows = output.model_draw_indices(selected)
    report = {
        "selected_model": selected.label,
        "rho": {k.label: float(output.rho_hat[k.slot]) for k in KINDS},
        "geweke": geweke,
        "summaries": {
            "model_averaged": _summary_block(output, all_rows, names, level),
            "selected_model": (_summary_block(output, sel_rows, names, level)
                               if sel_rows.size >= 2 else None),
        },
        "per_model": per_model,
        "accept_rate": {
            "nu_t": (output.accept_rate_t
                     if np.isfinite(output.accept_rate_t) else None),
            "nu_s": (output.accept_rate_s
                     if np.isfinite(output.accept_rate_s) else None),
        },
    }
    if headline is not None:
        for key in ("lpml", "dic", "eaic", "ebic", "waic", "rho_d",
                    "rho_waic", "cpo"):
            report[key] = headline[key]
    return report
