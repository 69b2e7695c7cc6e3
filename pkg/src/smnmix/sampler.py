"""Blocked Gibbs sampler with Metropolis steps for the df parameters.

Block order per sweep: (p, Z, U) jointly, censored-response imputation when
the data carry censoring flags, then beta, sigma2, and the (nu_t, nu_s) MH
step.  Z is a single one-hot indicator for the whole dataset, so its
posterior frequencies estimate the model probabilities directly.

All model weights are handled in log space; the weight-vector simulation
uses rejection sampling from the Dirichlet prior with acceptance
w / max_j r_j, and the df proposals are Gaussian random walks on the natural
scale whose target is zero outside the df support.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.special import gammaln, logsumexp

from ._backend import kernels
from .errors import DataError, DomainError, NumericalError
from .families import (
    KINDS,
    ModelKind,
    sample_truncated_gamma_01,
    sample_truncated_normal_upper,
    variance_correction,
)
from .priors import DirichletPrior, PcPrior, RegressionPrior

MAX_REJECTION_PROPOSALS = 1_000_000
DIRICHLET_FLOOR = 1e-300


# ---------------------------------------------------------------------------
# Data containers
# ---------------------------------------------------------------------------

@dataclass
class Dataset:
    """Response vector, design matrix and optional left-censoring marks."""

    y: np.ndarray
    X: np.ndarray
    censored: np.ndarray | None = None
    kappa: np.ndarray | None = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64).ravel()
        self.X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        n, q = self.X.shape
        if self.y.shape[0] != n:
            raise DataError(f"y has length {self.y.shape[0]}, X has {n} rows")
        if n < q:
            warnings.warn(f"fewer observations ({n}) than coefficients ({q})")
        elif n > 0 and np.linalg.matrix_rank(self.X) < q:
            warnings.warn("design matrix is rank deficient; the proper prior "
                          "on beta keeps the sampler well defined")
        if self.censored is not None:
            self.censored = np.asarray(self.censored).astype(bool).ravel()
            if self.censored.shape[0] != n:
                raise DataError("censoring flags do not match the sample size")
            if self.kappa is None:
                raise DataError("censoring flags given without censoring limits")
            self.kappa = np.asarray(self.kappa, dtype=np.float64).ravel()
            if self.kappa.shape[0] != n:
                raise DataError("censoring limits do not match the sample size")
            mask = self.censored
            if not np.allclose(self.y[mask], self.kappa[mask], atol=0.0):
                raise DataError("censored responses must equal their limit "
                                "on input")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def q(self) -> int:
        return self.X.shape[1]

    @property
    def censored_indices(self) -> np.ndarray:
        if self.censored is None:
            return np.empty(0, dtype=np.intp)
        return np.flatnonzero(self.censored)


@dataclass(frozen=True)
class MixtureConfig:
    """Mixture composition plus every prior the sampler needs."""

    components: tuple = KINDS
    dirichlet: DirichletPrior | None = None
    regression: RegressionPrior = field(default_factory=RegressionPrior)
    pc_student_t: PcPrior | None = None
    pc_slash: PcPrior | None = None

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) == 0 or len(set(comps)) != len(comps):
            raise DomainError("components must be a nonempty set of distinct kinds")
        if any(k not in KINDS for k in comps):
            raise DomainError(f"unknown component in {comps!r}")
        ordered = tuple(k for k in KINDS if k in comps)
        object.__setattr__(self, "components", ordered)
        if self.dirichlet is not None and self.dirichlet.k != len(ordered):
            raise DomainError("Dirichlet concentration length does not match "
                              "the number of components")

    def resolved(self) -> "MixtureConfig":
        """Fill in defaults: sparse Dirichlet and default PC priors."""
        out = self
        if out.dirichlet is None:
            out = replace(out, dirichlet=DirichletPrior.sparse(len(out.components)))
        if ModelKind.STUDENT_T in out.components and out.pc_student_t is None:
            out = replace(out, pc_student_t=PcPrior.build(ModelKind.STUDENT_T))
        if ModelKind.SLASH in out.components and out.pc_slash is None:
            out = replace(out, pc_slash=PcPrior.build(ModelKind.SLASH))
        return out

    def pc_prior(self, kind: ModelKind) -> PcPrior:
        if kind is ModelKind.STUDENT_T:
            return self.pc_student_t
        if kind is ModelKind.SLASH:
            return self.pc_slash
        raise DomainError("the Normal component has no df prior")


@dataclass(frozen=True)
class SamplerConfig:
    """Chain length, warm-up, proposal scales and the mandatory seed."""

    seed: int
    iterations: int = 20_000
    burn_in: int = 4_000
    warmup_iters: int = 2_000
    tau_t: float = 1.0
    tau_s: float = 0.5
    nu_t_start: float = 5.0
    nu_s_start: float = 2.0
    thin: int = 1

    def __post_init__(self):
        if self.seed is None:
            raise DomainError("a seed is mandatory (no wall-clock default)")
        if not 0 <= self.burn_in < self.iterations:
            raise DomainError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.tau_t <= 0 or self.tau_s <= 0:
            raise DomainError("proposal standard deviations must be positive")
        if self.thin < 1:
            raise DomainError("thin must be >= 1")
        if self.warmup_iters < 0:
            raise DomainError("warmup_iters must be >= 0")


@dataclass
class ChainState:
    """Mutable state of one Gibbs iteration."""

    components: tuple
    beta: np.ndarray
    sigma2: float
    p: np.ndarray
    z: np.ndarray           # one-hot over components
    u: np.ndarray
    nu_t: float
    nu_s: float
    gamma: float

    @property
    def active_kind(self) -> ModelKind:
        return self.components[int(np.argmax(self.z))]

    def active_nu(self) -> float:
        kind = self.active_kind
        if kind is ModelKind.STUDENT_T:
            return self.nu_t
        if kind is ModelKind.SLASH:
            return self.nu_s
        return float("nan")

    def check_invariants(self, n: int):
        assert abs(self.p.sum() - 1.0) < 1e-8 and np.all(self.p > 0)
        assert self.z.sum() == 1 and set(np.unique(self.z)) <= {0, 1}
        assert self.u.shape == (n,) and np.all(self.u > 0)
        kind = self.active_kind
        if kind is ModelKind.NORMAL:
            assert np.all(self.u == 1.0)
        elif kind is ModelKind.SLASH:
            assert np.all(self.u <= 1.0)
        assert np.isclose(self.gamma,
                          variance_correction(kind, self.active_nu()
                                              if kind is not ModelKind.NORMAL
                                              else None))


@dataclass
class WarmupResult:
    nu_t_start: float
    nu_s_start: float
    tau_t: float
    tau_s: float
    accept_t: float | None = None
    accept_s: float | None = None
    geweke_t: float | None = None
    geweke_s: float | None = None
    messages: list = field(default_factory=list)


@dataclass
class ChainOutput:
    """Stored post-burn-in draws and chain-level estimates."""

    components: tuple
    beta: np.ndarray          # (M, q)
    sigma2: np.ndarray        # (M,)
    z_index: np.ndarray       # (M,) values in {1, 2, 3}
    nu_t: np.ndarray          # (M,)
    nu_s: np.ndarray          # (M,)
    p: np.ndarray             # (M, K)
    gamma: np.ndarray         # (M,)
    rho_hat: np.ndarray       # canonical length-3
    accept_rate_t: float
    accept_rate_s: float
    seed: int
    censored_draws: np.ndarray | None = None   # (M, C)
    censored_indices: np.ndarray | None = None
    warmup: WarmupResult | None = None
    messages: list = field(default_factory=list)

    @property
    def n_draws(self) -> int:
        return self.sigma2.shape[0]

    @property
    def q(self) -> int:
        return self.beta.shape[1]

    @property
    def nu_t_draws_given_z2(self) -> np.ndarray:
        return self.nu_t[self.z_index == ModelKind.STUDENT_T.value]

    @property
    def nu_s_draws_given_z3(self) -> np.ndarray:
        return self.nu_s[self.z_index == ModelKind.SLASH.value]

    def selected_model(self) -> ModelKind:
        """argmax of rho_hat; ties break toward the simpler model."""
        best = int(np.argmax(self.rho_hat))  # argmax takes the first maximum
        return KINDS[best]

    def model_draw_indices(self, kind: ModelKind) -> np.ndarray:
        return np.flatnonzero(self.z_index == kind.value)


# ---------------------------------------------------------------------------
# Gibbs blocks
# ---------------------------------------------------------------------------

def _residuals(state: ChainState, data: Dataset, y=None) -> np.ndarray:
    y = data.y if y is None else y
    return y - data.X @ state.beta


def gibbs_beta(state: ChainState, data: Dataset, prior: RegressionPrior,
               rng: np.random.Generator, y=None) -> np.ndarray:
    """Draw beta from its Gaussian full conditional."""
    y = data.y if y is None else y
    X, u = data.X, state.u
    scale = state.gamma * state.sigma2
    q = data.q
    prec = np.eye(q) / prior.tau0_sq + (X.T @ (X * u[:, None])) / scale
    rhs = prior.mu0_vector(q) / prior.tau0_sq + (X.T @ (u * y)) / scale
    try:
        chol = cho_factor(prec, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - tau0_sq > 0
        raise NumericalError(f"beta precision not positive definite: {exc}")
    mean = cho_solve(chol, rhs)
    noise = solve_triangular(chol[0], rng.standard_normal(q), lower=True,
                             trans="T")
    return mean + noise


def gibbs_sigma2(state: ChainState, data: Dataset, prior: RegressionPrior,
                 rng: np.random.Generator, y=None) -> float:
    """Draw sigma2 from its inverse-gamma full conditional."""
    resid = _residuals(state, data, y)
    shape = prior.a0 + 0.5 * data.n
    rate = prior.b0 + float(state.u @ (resid * resid)) / (2.0 * state.gamma)
    return 1.0 / rng.gamma(shape, 1.0 / rate)


def log_model_weights(state: ChainState, data: Dataset, y=None):
    """Total log r_j for the three laws, common Gaussian constant dropped."""
    resid = _residuals(state, data, y)
    lw1, lw2, lw3 = kernels.model_log_weights(resid * resid, state.sigma2,
                                              state.nu_t, state.nu_s)
    return float(lw1.sum()), float(lw2.sum()), float(lw3.sum())


def _draw_u(kind: ModelKind, yt2: np.ndarray, sigma2: float, nu: float,
            rng: np.random.Generator) -> np.ndarray:
    """Draw the latent scales from their full conditional under one law."""
    if kind is ModelKind.NORMAL:
        return np.ones(yt2.shape[0])
    g = variance_correction(kind, nu)
    rate = yt2 / (2.0 * g * sigma2)
    if kind is ModelKind.STUDENT_T:
        return rng.gamma(0.5 * (nu + 1.0), 1.0 / (rate + 0.5 * nu))
    return sample_truncated_gamma_01(nu + 0.5, rate, rng)


def sample_p_z_given_weights(lw: np.ndarray, alpha: np.ndarray,
                             rng: np.random.Generator):
    """Draw (p, z slot) given total log-weights, by rejection sampling.

    p is proposed from the Dirichlet prior and accepted with probability
    w / max_j r_j (computed as exp(logsumexp(lw + log p) - max lw), so only
    weight differences matter); z is then multinomial on the normalized
    r_j p_j.  Exact-zero Dirichlet proposals are floored at 1e-300.
    """
    lw = np.asarray(lw, dtype=np.float64)
    lw_max = lw.max()
    if not np.isfinite(lw_max):
        raise NumericalError(f"all model log-weights are degenerate: {lw}")
    for _ in range(MAX_REJECTION_PROPOSALS):
        p = np.maximum(rng.dirichlet(alpha), DIRICHLET_FLOOR)
        log_w = logsumexp(lw + np.log(p))
        if rng.random() < np.exp(log_w - lw_max):
            break
    else:
        raise NumericalError(
            "rejection sampler for p exceeded "
            f"{MAX_REJECTION_PROPOSALS} proposals (log-weights {lw!r})")
    probs = np.exp(lw + np.log(p) - log_w)
    slot = int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum()))
    return p, min(slot, lw.shape[0] - 1)


def sample_p_z_u(state: ChainState, data: Dataset, prior: DirichletPrior,
                 rng: np.random.Generator, y=None):
    """Joint draw of (p, Z, U) from its full conditional.

    p comes from rejection sampling with the Dirichlet prior as proposal and
    acceptance probability w / max_j r_j; Z is multinomial on the normalized
    r_j p_j; U follows the Z-selected conditional law.
    """
    resid = _residuals(state, data, y)
    yt2 = resid * resid
    all_lw = kernels.model_log_weights(yt2, state.sigma2, state.nu_t,
                                       state.nu_s)
    lw = np.array([float(all_lw[k.slot].sum()) for k in state.components])
    p, slot = sample_p_z_given_weights(lw, np.asarray(prior.alpha), rng)
    z = np.zeros(len(state.components), dtype=np.int8)
    z[slot] = 1
    kind = state.components[slot]
    nu = state.nu_t if kind is ModelKind.STUDENT_T else state.nu_s
    u = _draw_u(kind, yt2, state.sigma2, nu, rng)
    return p, z, u


@dataclass(frozen=True)
class _DfStats:
    """Sufficient statistics of the df full conditional."""

    n: int
    sum_u: float
    sum_log_u: float
    sum_u_resid2: float
    sigma2: float

    @classmethod
    def from_state(cls, state: "ChainState", data: "Dataset", y=None):
        resid = _residuals(state, data, y)
        return cls(n=data.n, sum_u=float(state.u.sum()),
                   sum_log_u=float(np.log(state.u).sum()),
                   sum_u_resid2=float(state.u @ (resid * resid)),
                   sigma2=state.sigma2)


def _df_log_target(kind: ModelKind, nu: float, stats: _DfStats,
                   pc: PcPrior) -> float:
    """Exact df full conditional, up to constants:
    log pi(y | u, gamma(nu)) + log pi(u | Z, nu) + log pi(nu).

    The y term enters because gamma_j is a function of nu_j, so the
    conditional variance sigma2 * gamma_j / u_i moves with the df.
    """
    lp = pc.log_prior(nu)
    if not np.isfinite(lp):
        return -np.inf
    g = variance_correction(kind, nu)
    like_y = (-0.5 * stats.n * np.log(g)
              - stats.sum_u_resid2 / (2.0 * stats.sigma2 * g))
    if kind is ModelKind.STUDENT_T:
        half = 0.5 * nu
        like_u = (stats.n * (half * np.log(half) - float(gammaln(half)))
                  + (half - 1.0) * stats.sum_log_u - half * stats.sum_u)
    else:
        like_u = stats.n * np.log(nu) + (nu - 1.0) * stats.sum_log_u
    return like_y + like_u + lp


def _df_mh_move(kind: ModelKind, nu: float, tau: float, stats: _DfStats,
                pc: PcPrior, rng: np.random.Generator):
    prop = nu + tau * rng.standard_normal()
    cur_lt = _df_log_target(kind, nu, stats, pc)
    prop_lt = _df_log_target(kind, prop, stats, pc)
    if prop_lt - cur_lt > np.log(1.0 - rng.random()):
        return float(prop), True
    return float(nu), False


def mh_df_step(state: ChainState, data: Dataset, priors,
               config: SamplerConfig, rng: np.random.Generator, y=None):
    """One MH update of the df parameters.

    Only the df of the currently active heavy-tailed model moves; the other
    one (and both, under the Normal) is carried unchanged with acceptance 1.
    Returns (nu_t, nu_s, accepted).
    """
    pc_t, pc_s = priors
    kind = state.active_kind
    if kind is ModelKind.NORMAL:
        return state.nu_t, state.nu_s, True
    stats = _DfStats.from_state(state, data, y)
    if kind is ModelKind.STUDENT_T:
        nu_t, accepted = _df_mh_move(kind, state.nu_t, config.tau_t, stats,
                                     pc_t, rng)
        return nu_t, state.nu_s, accepted
    nu_s, accepted = _df_mh_move(kind, state.nu_s, config.tau_s, stats,
                                 pc_s, rng)
    return state.nu_t, nu_s, accepted


def impute_censored(state: ChainState, data: Dataset,
                    rng: np.random.Generator) -> np.ndarray:
    """Redraw the latent censored responses from their truncated normals."""
    idx = data.censored_indices
    if idx.size == 0:
        return np.empty(0)
    mean = data.X[idx] @ state.beta
    var = state.sigma2 * state.gamma / state.u[idx]
    return sample_truncated_normal_upper(mean, var, data.kappa[idx], rng)


# ---------------------------------------------------------------------------
# Warm-up
# ---------------------------------------------------------------------------

def _init_regression(data: Dataset):
    if data.n == 0:
        return np.zeros(data.q), 1.0
    beta, *_ = np.linalg.lstsq(data.X, data.y, rcond=None)
    resid = data.y - data.X @ beta
    sigma2 = float(max(np.var(resid), 1e-8))
    return beta, sigma2


def _pinned_df_chain(kind: ModelKind, data: Dataset, mixture: MixtureConfig,
                     config: SamplerConfig, nu0: float, tau0: float,
                     rng: np.random.Generator):
    """Single-model chain used to initialize the df and tune its proposal.

    The proposal scale adapts in batches of 50 toward a 0.44 acceptance
    rate: full-speed multiplicative updates until the batch rate first lands
    near the target, then decaying-gain refinements for the rest of the
    warm-up (the main chain never adapts).  The reported acceptance rate and
    the df mean come from the final 30%, where the gain is already small.
    """
    from .criteria import geweke_z  # local import to avoid a module cycle

    pc = mixture.pc_prior(kind)
    n = data.n
    iters = config.warmup_iters
    measure_from = int(0.7 * iters)
    batch = 50
    coarse = True
    in_window_streak = 0
    fine_batches = 0
    beta, sigma2 = _init_regression(data)
    state = ChainState(components=(kind,), beta=beta, sigma2=sigma2,
                       p=np.ones(1), z=np.ones(1, dtype=np.int8),
                       u=np.ones(n), nu_t=nu0, nu_s=nu0, gamma=1.0)
    nu, tau = float(nu0), float(tau0)
    y_work = data.y.copy()
    cidx = data.censored_indices

    accepted_batch = 0
    accepted_meas = 0
    measured = 0
    kept_nu = []
    for it in range(iters):
        state.gamma = variance_correction(kind, nu)
        if kind is ModelKind.STUDENT_T:
            state.nu_t = nu
        else:
            state.nu_s = nu
        resid = y_work - data.X @ state.beta
        state.u = _draw_u(kind, resid * resid, state.sigma2, nu, rng)
        if cidx.size:
            y_work[cidx] = impute_censored(state, data, rng)
        state.beta = gibbs_beta(state, data, mixture.regression, rng, y=y_work)
        state.sigma2 = gibbs_sigma2(state, data, mixture.regression, rng,
                                    y=y_work)
        stats = _DfStats.from_state(state, data, y=y_work)
        nu, acc = _df_mh_move(kind, nu, tau, stats, pc, rng)
        accepted_batch += acc
        if (it + 1) % batch == 0:
            rate = accepted_batch / batch
            if coarse:
                in_window_streak = in_window_streak + 1 if 0.35 <= rate <= 0.53 else 0
                if in_window_streak >= 2:
                    coarse = False
                gain = 1.0
            else:
                fine_batches += 1
                gain = 1.0 / np.sqrt(fine_batches + 1.0)
            tau = float(np.clip(tau * np.exp((rate - 0.44) * gain),
                                1e-3, 50.0))
            accepted_batch = 0
        if it >= measure_from:
            accepted_meas += acc
            measured += 1
            kept_nu.append(nu)

    kept_nu = np.asarray(kept_nu)
    acc_rate = accepted_meas / max(measured, 1)
    gz = None
    thinned = kept_nu[:: max(1, kept_nu.size // 200)]
    if thinned.size >= 100 and np.ptp(thinned) > 0:
        gz = float(geweke_z(thinned))
    return float(kept_nu.mean()) if kept_nu.size else nu, tau, acc_rate, gz


def warm_up(data: Dataset, mixture: MixtureConfig, config: SamplerConfig,
            rng: np.random.Generator) -> WarmupResult:
    """Run the pinned single-model chains for the heavy-tailed components.

    Returns df starting values (posterior means of the pinned chains) and
    the tuned proposal scales.  With warmup_iters == 0 the user-supplied
    starting values and scales pass through unchanged.
    """
    result = WarmupResult(nu_t_start=config.nu_t_start,
                          nu_s_start=config.nu_s_start,
                          tau_t=config.tau_t, tau_s=config.tau_s)
    if config.warmup_iters == 0:
        return result
    if ModelKind.STUDENT_T in mixture.components:
        nu, tau, acc, gz = _pinned_df_chain(ModelKind.STUDENT_T, data, mixture,
                                            config, config.nu_t_start,
                                            config.tau_t, rng)
        result.nu_t_start, result.tau_t = nu, tau
        result.accept_t, result.geweke_t = acc, gz
        if gz is not None and abs(gz) > 4.0:
            msg = f"student-t warm-up df chain failed Geweke (|z| = {abs(gz):.2f})"
            warnings.warn(msg)
            result.messages.append(msg)
    if ModelKind.SLASH in mixture.components:
        nu, tau, acc, gz = _pinned_df_chain(ModelKind.SLASH, data, mixture,
                                            config, config.nu_s_start,
                                            config.tau_s, rng)
        result.nu_s_start, result.tau_s = nu, tau
        result.accept_s, result.geweke_s = acc, gz
        if gz is not None and abs(gz) > 4.0:
            msg = f"slash warm-up df chain failed Geweke (|z| = {abs(gz):.2f})"
            warnings.warn(msg)
            result.messages.append(msg)
    return result


# ---------------------------------------------------------------------------
# Main chain
# ---------------------------------------------------------------------------

def run_chain(data: Dataset, mixture: MixtureConfig,
              config: SamplerConfig) -> ChainOutput:
    """Warm up, then run the full Gibbs cycle and collect posterior draws."""
    mixture = mixture.resolved()
    comps = mixture.components
    ss = np.random.SeedSequence(config.seed)
    warm_seed, main_seed = ss.spawn(2)
    warm = warm_up(data, mixture, config, np.random.default_rng(warm_seed))
    rng = np.random.default_rng(main_seed)
    tuned = replace(config, tau_t=warm.tau_t, tau_s=warm.tau_s)

    n, q = data.n, data.q
    beta, sigma2 = _init_regression(data)
    first = comps[0]
    nu_t = warm.nu_t_start
    nu_s = warm.nu_s_start
    z0 = np.zeros(len(comps), dtype=np.int8)
    z0[0] = 1
    state = ChainState(
        components=comps, beta=beta, sigma2=sigma2,
        p=np.full(len(comps), 1.0 / len(comps)), z=z0,
        u=np.ones(n), nu_t=nu_t, nu_s=nu_s,
        gamma=variance_correction(first, nu_t if first is ModelKind.STUDENT_T
                                  else nu_s if first is ModelKind.SLASH else None))

    y_work = data.y.copy()
    cidx = data.censored_indices
    n_kept = (config.iterations - config.burn_in + config.thin - 1) // config.thin
    store_beta = np.empty((n_kept, q))
    store_sigma2 = np.empty(n_kept)
    store_z = np.empty(n_kept, dtype=np.int64)
    store_nu_t = np.empty(n_kept)
    store_nu_s = np.empty(n_kept)
    store_p = np.empty((n_kept, len(comps)))
    store_gamma = np.empty(n_kept)
    store_cens = np.empty((n_kept, cidx.size)) if cidx.size else None

    pc_pair = (mixture.pc_student_t, mixture.pc_slash)
    attempts = {ModelKind.STUDENT_T: 0, ModelKind.SLASH: 0}
    accepts = {ModelKind.STUDENT_T: 0, ModelKind.SLASH: 0}
    kept = 0
    for it in range(config.iterations):
        state.p, state.z, state.u = sample_p_z_u(state, data, mixture.dirichlet,
                                                 rng, y=y_work)
        kind = state.active_kind
        state.gamma = variance_correction(
            kind, state.active_nu() if kind is not ModelKind.NORMAL else None)
        if cidx.size:
            y_work[cidx] = impute_censored(state, data, rng)
        state.beta = gibbs_beta(state, data, mixture.regression, rng, y=y_work)
        state.sigma2 = gibbs_sigma2(state, data, mixture.regression, rng,
                                    y=y_work)
        state.nu_t, state.nu_s, accepted = mh_df_step(state, data, pc_pair,
                                                      tuned, rng, y=y_work)
        if kind is not ModelKind.NORMAL:
            attempts[kind] += 1
            accepts[kind] += accepted
            state.gamma = variance_correction(kind, state.active_nu())
        if __debug__:
            state.check_invariants(n)
        if it >= config.burn_in and (it - config.burn_in) % config.thin == 0:
            store_beta[kept] = state.beta
            store_sigma2[kept] = state.sigma2
            store_z[kept] = kind.value
            store_nu_t[kept] = state.nu_t
            store_nu_s[kept] = state.nu_s
            store_p[kept] = state.p
            store_gamma[kept] = state.gamma
            if store_cens is not None:
                store_cens[kept] = y_work[cidx]
            kept += 1

    rho = np.zeros(3)
    for k in comps:
        rho[k.slot] = np.mean(store_z == k.value)
    out = ChainOutput(
        components=comps, beta=store_beta, sigma2=store_sigma2,
        z_index=store_z, nu_t=store_nu_t, nu_s=store_nu_s, p=store_p,
        gamma=store_gamma, rho_hat=rho,
        accept_rate_t=accepts[ModelKind.STUDENT_T] / max(attempts[ModelKind.STUDENT_T], 1),
        accept_rate_s=accepts[ModelKind.SLASH] / max(attempts[ModelKind.SLASH], 1),
        seed=config.seed, censored_draws=store_cens,
        censored_indices=cidx if cidx.size else None,
        warmup=warm, messages=list(warm.messages))
    return out


def predict(chain: ChainOutput, x_new, rng: np.random.Generator,
            kind: ModelKind | None = None) -> np.ndarray:
    """Posterior predictive draws of a new response at covariates ``x_new``.

    One predictive draw per stored iteration: the latent scale is sampled
    from the mixing law selected by that iteration's model indicator, then
    the response from its conditional normal.  Passing ``kind`` restricts to
    the draws that visited one model (the model-conditional predictive).
    """
    if chain.n_draws == 0:
        raise DataError("chain holds no draws")
    x_new = np.asarray(x_new, dtype=np.float64).ravel()
    if x_new.shape[0] != chain.q:
        raise DataError(f"x_new has length {x_new.shape[0]}, expected {chain.q}")
    sel = np.arange(chain.n_draws)
    if kind is not None:
        sel = chain.model_draw_indices(kind)
        if sel.size == 0:
            raise DataError(f"model {kind.label!r} was never visited")
    mean = chain.beta[sel] @ x_new
    u = np.ones(sel.size)
    for k in (ModelKind.STUDENT_T, ModelKind.SLASH):
        mask = chain.z_index[sel] == k.value
        if not np.any(mask):
            continue
        nus = (chain.nu_t if k is ModelKind.STUDENT_T else chain.nu_s)[sel][mask]
        if k is ModelKind.STUDENT_T:
            u[mask] = rng.gamma(nus / 2.0, 2.0 / nus)
        else:
            u[mask] = rng.beta(nus, 1.0)
    var = chain.sigma2[sel] * chain.gamma[sel] / u
    return mean + np.sqrt(var) * rng.standard_normal(sel.size)
