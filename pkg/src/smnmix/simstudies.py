"""Synthetic-data generators and the replication harness for the three
simulation studies, plus the KL matching of Slash to Student-t tail weight.

All generators draw errors with unit variance (each component is scaled by
its own variance correction), so sigma2 = 1 holds by construction for every
error law and for the mixture of Study III.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import priors
from .errors import DomainError
from .families import (
    KINDS,
    MixingLaw,
    ModelKind,
    check_df,
    sample_mixing,
    variance_correction,
)
from .sampler import Dataset, MixtureConfig, SamplerConfig, run_chain

STUDY1_BETA = np.array([1.0, 2.0, -2.0])
STUDY2_BETA = np.array([1.0, 2.0, -2.0, 1.0])
STUDY2_NU_T = 3.0
STUDY3_WEIGHTS = np.array([0.1, 0.6, 0.3])
STUDY3_NU = {ModelKind.STUDENT_T: 4.0, ModelKind.SLASH: 1.15}


@dataclass(frozen=True)
class StudySpec:
    """One cell of the simulation grid."""

    study: str
    n: int
    seed: int
    kind: ModelKind | None = None
    nu: float | None = None
    replications: int = 10

    def __post_init__(self):
        if self.study not in ("I", "II", "III"):
            raise DomainError(f"study must be I, II or III, got {self.study!r}")
        if self.n <= 0:
            raise DomainError("n must be positive")
        if self.replications < 1:
            raise DomainError("replications must be >= 1")
        if self.study == "I":
            if self.kind is None:
                raise DomainError("study I needs a generating kind")
            if self.kind is not ModelKind.NORMAL:
                check_df(self.kind, self.nu)


@dataclass
class ReplicationScore:
    mse_beta: np.ndarray
    mse_sigma2: float
    mse_nu: float | None
    mse_rho: float
    pct_correct: float
    n_completed: int
    pct_correct_by_criterion: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)


def _unit_variance_errors(kind: ModelKind, nu, n, rng):
    gamma = variance_correction(kind, nu if kind is not ModelKind.NORMAL else None)
    u = np.asarray(sample_mixing(MixingLaw(kind, nu), rng, size=n), dtype=float)
    return np.sqrt(gamma / u) * rng.standard_normal(n)


def gen_study1(kind: ModelKind, nu, n: int, seed):
    """Study I: intercept + standard normal + Bernoulli(0.5) covariates,
    beta = (1, 2, -2), unit-variance errors from one chosen law."""
    if kind is not ModelKind.NORMAL:
        nu = check_df(kind, nu)
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.standard_normal(n),
                         (rng.random(n) < 0.5).astype(float)])
    e = _unit_variance_errors(kind, nu, n, rng)
    truth = {"study": "I", "beta": STUDY1_BETA.tolist(), "sigma2": 1.0,
             "kind": kind.label, "nu": None if kind is ModelKind.NORMAL else nu}
    return Dataset(y=X @ STUDY1_BETA + e, X=X), truth


def gen_study2(n: int, seed):
    """Study II: correlated Gaussian covariates (x3 = 2 x2 + N(0, 0.5)),
    beta = (1, 2, -2, 1), Student-t(3) unit-variance errors."""
    if n <= 1:
        raise DomainError("study II needs n > 1")
    rng = np.random.default_rng(seed)
    x1 = rng.standard_normal(n)
    x2 = rng.standard_normal(n)
    x3 = 2.0 * x2 + rng.normal(0.0, np.sqrt(0.5), n)
    X = np.column_stack([np.ones(n), x1, x2, x3])
    e = _unit_variance_errors(ModelKind.STUDENT_T, STUDY2_NU_T, n, rng)
    truth = {"study": "II", "beta": STUDY2_BETA.tolist(), "sigma2": 1.0,
             "kind": ModelKind.STUDENT_T.label, "nu": STUDY2_NU_T}
    return Dataset(y=X @ STUDY2_BETA + e, X=X), truth


def gen_study3(n: int, seed):
    """Study III: Study I covariates, errors from the 0.1/0.6/0.3 mixture of
    Normal, Student-t(4) and Slash(1.15), each variance-standardized."""
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.standard_normal(n),
                         (rng.random(n) < 0.5).astype(float)])
    comp = rng.choice(3, size=n, p=STUDY3_WEIGHTS)
    e = np.empty(n)
    for slot, kind in enumerate(KINDS):
        mask = comp == slot
        if not np.any(mask):
            continue
        nu = STUDY3_NU.get(kind)
        e[mask] = _unit_variance_errors(kind, nu, int(mask.sum()), rng)
    truth = {"study": "III", "beta": STUDY1_BETA.tolist(), "sigma2": 1.0,
             "kind": None, "mixture_weights": STUDY3_WEIGHTS.tolist(),
             "nu": {"student-t": STUDY3_NU[ModelKind.STUDENT_T],
                    "slash": STUDY3_NU[ModelKind.SLASH]}}
    return Dataset(y=X @ STUDY1_BETA + e, X=X), truth


def generate(spec: StudySpec, seed=None):
    seed = spec.seed if seed is None else seed
    if spec.study == "I":
        return gen_study1(spec.kind, spec.nu, spec.n, seed)
    if spec.study == "II":
        return gen_study2(spec.n, seed)
    return gen_study3(spec.n, seed)


def kl_match_slash_df(nu_t) -> float:
    """Slash df whose standardized density is KL-closest to Student-t(nu_t)."""
    return priors.match_slash_df(nu_t)


# ---------------------------------------------------------------------------
# Replication harness
# ---------------------------------------------------------------------------

CRITERIA_DIRECTIONS = {"waic": -1, "dic": -1, "eaic": -1, "ebic": -1,
                       "lpml": +1}


def _criteria_winners(out, data):
    """Which model each comparison criterion picks, over conditional draws.

    Models visited fewer than 100 times are left out of the race, mirroring
    the reporting rule for their df estimates.
    """
    from .criteria import model_conditional_criteria

    values = {}
    for kind in out.components:
        if out.model_draw_indices(kind).size < 100:
            continue
        rep = model_conditional_criteria(out, data, kind, max_draws=2000)
        if rep is not None:
            values[kind.label] = rep
    winners = {}
    for crit, sign in CRITERIA_DIRECTIONS.items():
        if not values:
            winners[f"selected_{crit}"] = None
            continue
        winners[f"selected_{crit}"] = max(
            values, key=lambda lbl: sign * getattr(values[lbl], crit))
    return winners


def _run_one_rep(args):
    spec, mixture, config, rep, data_entropy, chain_entropy = args
    data, truth = generate(spec, seed=data_entropy)
    rep_config = SamplerConfig(
        seed=chain_entropy, iterations=config.iterations,
        burn_in=config.burn_in, warmup_iters=config.warmup_iters,
        tau_t=config.tau_t, tau_s=config.tau_s,
        nu_t_start=config.nu_t_start, nu_s_start=config.nu_s_start,
        thin=config.thin)
    out = run_chain(data, mixture, rep_config)
    selected = out.selected_model()
    row = {
        "rep": rep,
        "data_seed": data_entropy,
        "chain_seed": chain_entropy,
        "rho_normal": float(out.rho_hat[0]),
        "rho_student_t": float(out.rho_hat[1]),
        "rho_slash": float(out.rho_hat[2]),
        "selected": selected.label,
        "beta_mean": out.beta.mean(axis=0).tolist(),
        "sigma2_mean": float(out.sigma2.mean()),
        "nu_t_mean": (float(out.nu_t_draws_given_z2.mean())
                      if out.nu_t_draws_given_z2.size else None),
        "nu_s_mean": (float(out.nu_s_draws_given_z3.mean())
                      if out.nu_s_draws_given_z3.size else None),
        "truth_kind": truth["kind"],
        "truth_nu": truth["nu"] if isinstance(truth["nu"], (float, int)) else None,
        "truth_beta": truth["beta"],
    }
    row.update(_criteria_winners(out, data))
    return row


def replicate_and_score(spec: StudySpec, mixture: MixtureConfig,
                        config: SamplerConfig, n_jobs: int = 1) -> ReplicationScore:
    """Run independent replications and aggregate the study's error metrics.

    Seeds are split with numpy's SeedSequence: child 2r feeds replication
    r's data generator and child 2r+1 its chain, so streams never overlap
    and the result is independent of the parallelism degree.  The df MSE is
    computed only over replications that selected the true model; per-rep
    failures are recorded and skipped.
    """
    mixture = mixture.resolved()
    children = np.random.SeedSequence(spec.seed).spawn(2 * spec.replications)
    derived = [int(c.generate_state(1, np.uint64)[0]) for c in children]
    jobs = [(spec, mixture, config, r, derived[2 * r], derived[2 * r + 1])
            for r in range(spec.replications)]

    rows, failures = [], []
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            futures = [pool.submit(_run_one_rep, job) for job in jobs]
            for job, fut in zip(jobs, futures):
                try:
                    rows.append(fut.result())
                except Exception as exc:  # noqa: BLE001 - per-rep isolation
                    failures.append({"rep": job[3], "error": repr(exc)})
    else:
        for job in jobs:
            try:
                rows.append(_run_one_rep(job))
            except Exception as exc:  # noqa: BLE001 - per-rep isolation
                failures.append({"rep": job[3], "error": repr(exc)})

    if not rows:
        return ReplicationScore(mse_beta=np.full(0, np.nan), mse_sigma2=np.nan,
                                mse_nu=None, mse_rho=np.nan, pct_correct=0.0,
                                n_completed=0, rows=rows, failures=failures,
                                pct_correct_by_criterion={})

    truth_beta = np.asarray(rows[0]["truth_beta"])
    truth_kind = rows[0]["truth_kind"]
    truth_nu = rows[0]["truth_nu"]
    beta_err = np.array([np.asarray(r["beta_mean"]) - truth_beta for r in rows])
    mse_beta = (beta_err ** 2).mean(axis=0)
    mse_sigma2 = float(np.mean([(r["sigma2_mean"] - 1.0) ** 2 for r in rows]))

    rho_key = {None: None, "normal": "rho_normal", "student-t": "rho_student_t",
               "slash": "rho_slash"}[truth_kind]
    pct_by_crit = {}
    if rho_key is None:
        mse_rho, pct = np.nan, np.nan
        correct = []
    else:
        mse_rho = float(np.mean([(r[rho_key] - 1.0) ** 2 for r in rows]))
        correct = [r for r in rows if r["selected"] == truth_kind]
        pct = len(correct) / len(rows)
        for crit in CRITERIA_DIRECTIONS:
            key = f"selected_{crit}"
            pct_by_crit[crit] = float(np.mean(
                [r.get(key) == truth_kind for r in rows]))

    mse_nu = None
    if truth_nu is not None and truth_kind in ("student-t", "slash"):
        key = "nu_t_mean" if truth_kind == "student-t" else "nu_s_mean"
        vals = [r[key] for r in correct if r[key] is not None]
        if vals:
            mse_nu = float(np.mean([(v - truth_nu) ** 2 for v in vals]))

    return ReplicationScore(mse_beta=mse_beta, mse_sigma2=mse_sigma2,
                            mse_nu=mse_nu, mse_rho=mse_rho, pct_correct=pct,
                            n_completed=len(rows), rows=rows, failures=failures,
                            pct_correct_by_criterion=pct_by_crit)
