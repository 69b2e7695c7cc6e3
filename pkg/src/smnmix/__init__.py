"""smnmix: Bayesian model selection for heavy-tailed linear regression.

A linear model whose error law is a finite mixture over Normal, Student-t
and Slash scale-mixture-of-normal distributions sharing one location and one
variance.  A blocked Gibbs sampler with Metropolis steps for the degrees of
freedom fits all candidate laws simultaneously; the posterior of the mixture
indicator gives the model probabilities.  Left-censored responses, posterior
prediction and the usual comparison criteria (DIC, EAIC, EBIC, WAIC,
CPO/LPML) are included.
"""

from ._backend import BACKEND
from .criteria import (
    CriteriaReport,
    build_report,
    cpo_lpml,
    dic,
    eaic_ebic,
    geweke_z,
    posterior_summary,
    waic,
)
from .errors import DataError, DomainError, NumericalError
from .families import (
    KINDS,
    MixingLaw,
    ModelKind,
    SmnParams,
    excess_kurtosis,
    log_gamma_cdf,
    marginal_logdensity,
    moment_k,
    sample_mixing,
    sample_truncated_gamma_01,
    sample_truncated_normal_upper,
    variance_correction,
)
from .priors import (
    DirichletPrior,
    PcPrior,
    RegressionPrior,
    calibrate_lambda,
    kld_distance,
    pc_log_prior,
    posterior_mean_bounds,
)
from .sampler import (
    ChainOutput,
    ChainState,
    Dataset,
    MixtureConfig,
    SamplerConfig,
    gibbs_beta,
    gibbs_sigma2,
    impute_censored,
    log_model_weights,
    mh_df_step,
    predict,
    run_chain,
    sample_p_z_u,
    warm_up,
)
from .simstudies import (
    ReplicationScore,
    StudySpec,
    gen_study1,
    gen_study2,
    gen_study3,
    kl_match_slash_df,
    replicate_and_score,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ChainOutput",
    "ChainState",
    "CriteriaReport",
    "DataError",
    "Dataset",
    "DirichletPrior",
    "DomainError",
    "KINDS",
    "MixingLaw",
    "MixtureConfig",
    "ModelKind",
    "NumericalError",
    "PcPrior",
    "RegressionPrior",
    "ReplicationScore",
    "SamplerConfig",
    "SmnParams",
    "StudySpec",
    "build_report",
    "calibrate_lambda",
    "cpo_lpml",
    "dic",
    "eaic_ebic",
    "excess_kurtosis",
    "gen_study1",
    "gen_study2",
    "gen_study3",
    "geweke_z",
    "gibbs_beta",
    "gibbs_sigma2",
    "impute_censored",
    "kl_match_slash_df",
    "kld_distance",
    "log_gamma_cdf",
    "log_model_weights",
    "marginal_logdensity",
    "mh_df_step",
    "moment_k",
    "pc_log_prior",
    "posterior_mean_bounds",
    "posterior_summary",
    "predict",
    "replicate_and_score",
    "run_chain",
    "sample_mixing",
    "sample_p_z_u",
    "sample_truncated_gamma_01",
    "sample_truncated_normal_upper",
    "variance_correction",
    "waic",
    "warm_up",
]
