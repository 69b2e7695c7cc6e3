import numpy as np
import pytest

from smnmix import (
    MixtureConfig,
    ModelKind,
    PcPrior,
    SamplerConfig,
    gen_study1,
    run_chain,
)


@pytest.fixture(scope="session")
def pc_t():
    return PcPrior.build(ModelKind.STUDENT_T)


@pytest.fixture(scope="session")
def pc_s():
    return PcPrior.build(ModelKind.SLASH)


@pytest.fixture(scope="session")
def default_mixture(pc_t, pc_s):
    return MixtureConfig(pc_student_t=pc_t, pc_slash=pc_s).resolved()


@pytest.fixture(scope="session")
def small_t_fit(default_mixture):
    """A short full fit on Student-t(3) data, shared by report/predict tests."""
    data, truth = gen_study1(ModelKind.STUDENT_T, 3.0, 300, seed=11)
    config = SamplerConfig(seed=42, iterations=2500, burn_in=500,
                           warmup_iters=600)
    return data, truth, run_chain(data, default_mixture, config)


def rng_of(seed):
    return np.random.default_rng(seed)
