import numpy as np
import pytest
from scipy import integrate, special, stats

from smnmix import (
    DataError,
    Dataset,
    DirichletPrior,
    MixtureConfig,
    ModelKind,
    RegressionPrior,
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
from smnmix.families import KINDS, variance_correction
from smnmix.sampler import ChainOutput, ChainState, sample_p_z_given_weights

N, T, S = ModelKind.NORMAL, ModelKind.STUDENT_T, ModelKind.SLASH


def make_state(n=20, q=2, seed=0, sigma2=1.0, nu_t=4.0, nu_s=2.0,
               kind=N, components=KINDS):
    rng = np.random.default_rng(seed)
    beta = rng.standard_normal(q)
    z = np.zeros(len(components), dtype=np.int8)
    z[components.index(kind)] = 1
    nu = nu_t if kind is T else nu_s if kind is S else None
    return ChainState(components=components, beta=beta, sigma2=sigma2,
                      p=np.full(len(components), 1.0 / len(components)),
                      z=z, u=np.ones(n), nu_t=nu_t, nu_s=nu_s,
                      gamma=variance_correction(kind, nu))


def make_data(n=20, q=2, seed=1):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n)] + [rng.standard_normal(n)
                                        for _ in range(q - 1)])
    y = X @ np.arange(1, q + 1) + rng.standard_normal(n)
    return Dataset(y=y, X=X)


class TestDataset:
    def test_censoring_consistency(self):
        y = np.array([0.0, 1.0, 2.0])
        X = np.ones((3, 1))
        with pytest.raises(DataError):
            Dataset(y=y, X=X, censored=[1, 0, 0], kappa=[0.5, 0.0, 0.0])
        d = Dataset(y=y, X=X, censored=[1, 0, 0], kappa=[0.0, -1.0, -1.0])
        assert list(d.censored_indices) == [0]

    def test_rank_deficiency_warns(self):
        X = np.column_stack([np.ones(5), np.ones(5)])
        with pytest.warns(UserWarning, match="rank deficient"):
            Dataset(y=np.zeros(5), X=X)

    def test_flags_without_limits(self):
        with pytest.raises(DataError):
            Dataset(y=np.zeros(3), X=np.ones((3, 1)), censored=[0, 0, 1])


class TestGibbsBeta:
    def test_prior_dominant_limit(self):
        data = make_data(n=30)
        state = make_state(n=30)
        prior = RegressionPrior(mu0=np.array([3.0, -1.0]), tau0_sq=1e-10)
        rng = np.random.default_rng(2)
        draws = np.array([gibbs_beta(state, data, prior, rng)
                          for _ in range(10_000)])
        assert np.max(np.abs(draws.mean(axis=0) - [3.0, -1.0])) < 1e-3

    def test_flat_prior_matches_ols(self):
        data = make_data(n=200, seed=3)
        state = make_state(n=200, seed=3)
        prior = RegressionPrior(tau0_sq=1e8)
        rng = np.random.default_rng(4)
        draws = np.array([gibbs_beta(state, data, prior, rng)
                          for _ in range(20_000)])
        ols = np.linalg.lstsq(data.X, data.y, rcond=None)[0]
        se = draws.std(axis=0) / np.sqrt(draws.shape[0])
        assert np.all(np.abs(draws.mean(axis=0) - ols) < 4 * se)

    def test_against_dense_quadrature_oracle(self):
        # n=4, q=2 toy: with everything else fixed the beta posterior is a
        # density we can integrate numerically and compare moments against
        X = np.array([[1.0, 0.5], [1.0, -1.0], [1.0, 2.0], [1.0, 0.0]])
        y = np.array([1.2, -0.3, 2.5, 0.7])
        data = Dataset(y=y, X=X)
        state = make_state(n=4, sigma2=0.8, kind=T, nu_t=5.0)
        state.u = np.array([0.5, 1.5, 0.9, 2.0])
        prior = RegressionPrior(mu0=0.0, tau0_sq=4.0)

        def log_post(b0, b1):
            ll = -0.5 * (b0 ** 2 + b1 ** 2) / prior.tau0_sq
            for i in range(4):
                resid = y[i] - X[i, 0] * b0 - X[i, 1] * b1
                ll = ll - 0.5 * state.u[i] * resid ** 2 / (state.gamma * state.sigma2)
            return ll

        grid = np.linspace(-4, 6, 401)
        b0g, b1g = np.meshgrid(grid, grid, indexing="ij")
        dens = np.exp(log_post(b0g, b1g))
        dens /= dens.sum()
        mean0 = (b0g * dens).sum()
        mean1 = (b1g * dens).sum()
        var0 = ((b0g - mean0) ** 2 * dens).sum()
        var1 = ((b1g - mean1) ** 2 * dens).sum()

        rng = np.random.default_rng(5)
        draws = np.array([gibbs_beta(state, data, prior, rng)
                          for _ in range(20_000)])
        m = draws.shape[0]
        for j, (mu, var) in enumerate([(mean0, var0), (mean1, var1)]):
            se_mean = np.sqrt(var / m)
            assert abs(draws[:, j].mean() - mu) < 3 * se_mean
            assert abs(draws[:, j].var(ddof=1) - var) < 4 * var * np.sqrt(2 / m)


class TestGibbsSigma2:
    def test_empty_data_draws_from_prior(self):
        data = Dataset(y=np.empty(0), X=np.empty((0, 1)))
        state = make_state(n=0, q=1)
        prior = RegressionPrior(a0=3.0, b0=2.0)
        rng = np.random.default_rng(6)
        draws = np.array([gibbs_sigma2(state, data, prior, rng)
                          for _ in range(50_000)])
        # IG(3, 2) has mean 1 and variance 1
        assert abs(draws.mean() - 1.0) < 3 * draws.std(ddof=1) / np.sqrt(50_000)

    def test_zero_residuals(self):
        n = 40
        X = np.column_stack([np.ones(n), np.arange(n, dtype=float)])
        beta = np.array([0.5, -0.2])
        data = Dataset(y=X @ beta, X=X)
        state = make_state(n=n)
        state.beta = beta
        prior = RegressionPrior(a0=2.5, b0=1.5)
        rng = np.random.default_rng(7)
        draws = np.array([gibbs_sigma2(state, data, prior, rng)
                          for _ in range(50_000)])
        shape, rate = prior.a0 + n / 2, prior.b0
        expected_mean = rate / (shape - 1)
        expected_sd = expected_mean / np.sqrt(shape - 2)
        assert abs(draws.mean() - expected_mean) < 3 * expected_sd / np.sqrt(50_000)

    def test_analytic_mean_on_toy(self):
        data = make_data(n=25, seed=8)
        state = make_state(n=25, seed=8, kind=S, nu_s=3.0)
        state.u = np.random.default_rng(9).uniform(0.2, 1.0, 25)
        prior = RegressionPrior(a0=4.0, b0=2.0)
        resid = data.y - data.X @ state.beta
        rate = prior.b0 + state.u @ resid ** 2 / (2 * state.gamma)
        shape = prior.a0 + 12.5
        rng = np.random.default_rng(10)
        draws = np.array([gibbs_sigma2(state, data, prior, rng)
                          for _ in range(50_000)])
        mean = rate / (shape - 1)
        sd = mean / np.sqrt(shape - 2)
        assert abs(draws.mean() - mean) < 3 * sd / np.sqrt(50_000)


class TestLogModelWeights:
    def test_empty_data(self):
        data = Dataset(y=np.empty(0), X=np.empty((0, 2)))
        state = make_state(n=0)
        assert log_model_weights(state, data) == (0.0, 0.0, 0.0)

    def test_per_observation_quadrature_identity(self):
        # exp(log r_j) * (2 pi sigma2)^(-1/2) equals the marginal of the
        # component integrand for every law
        sigma2, nu_t, nu_s = 1.7, 3.4, 1.6
        ytilde = 1.9
        X = np.zeros((1, 1))
        data = Dataset(y=np.array([ytilde]), X=X)
        state = make_state(n=1, q=1, sigma2=sigma2, nu_t=nu_t, nu_s=nu_s)
        state.beta = np.zeros(1)
        lw = log_model_weights(state, data)
        const = -0.5 * np.log(2 * np.pi * sigma2)

        def mixture_marginal(kind, nu):
            g = variance_correction(kind, nu)
            if kind is N:
                return stats.norm.pdf(ytilde, 0, np.sqrt(sigma2))
            if kind is T:
                f = lambda u: (stats.norm.pdf(ytilde, 0, np.sqrt(g * sigma2 / u))
                               * stats.gamma.pdf(u, nu / 2, scale=2 / nu))
                return integrate.quad(f, 0, np.inf, epsabs=1e-14)[0]
            f = lambda u: (stats.norm.pdf(ytilde, 0, np.sqrt(g * sigma2 / u))
                           * nu * u ** (nu - 1))
            return integrate.quad(f, 0, 1, epsabs=1e-14)[0]

        for j, (kind, nu) in enumerate([(N, None), (T, nu_t), (S, nu_s)]):
            expected = mixture_marginal(kind, nu)
            assert np.exp(lw[j] + const) == pytest.approx(expected, rel=1e-8)

    def test_student_t_limit_matches_normal(self):
        rng = np.random.default_rng(11)
        n = 50
        X = np.ones((n, 1))
        y = 0.3 + rng.standard_normal(n)
        data = Dataset(y=y, X=X)
        state = make_state(n=n, q=1, nu_t=1e4, nu_s=2.0)
        state.beta = np.array([0.3])
        lw = log_model_weights(state, data)
        assert abs(lw[1] - lw[0]) < 1e-2


class TestSamplePZ:
    def test_degenerate_weights(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            p, slot = sample_p_z_given_weights(
                np.array([0.0, -np.inf, -np.inf]), np.ones(3), rng)
            assert slot == 0

    def test_symmetric_weights(self):
        rng = np.random.default_rng(13)
        slots = [sample_p_z_given_weights(np.zeros(3), np.ones(3), rng)[1]
                 for _ in range(9000)]
        counts = np.bincount(slots, minlength=3) / 9000
        assert np.max(np.abs(counts - 1 / 3)) < 0.02

    def test_translation_invariance(self):
        lw = np.array([2.0, -1.0, 0.5])
        alpha = np.array([0.4, 1.1, 0.7])
        out1, out2 = [], []
        for shift, store in ((0.0, out1), (123.4, out2)):
            rng = np.random.default_rng(14)
            for _ in range(200):
                store.append(sample_p_z_given_weights(lw + shift, alpha, rng))
        for (p1, s1), (p2, s2) in zip(out1, out2):
            assert s1 == s2
            assert np.array_equal(p1, p2)

    def test_z_probabilities_closed_form(self):
        # marginal P(z=j) integrates p out exactly: r_j a_j / sum r_k a_k
        lw = np.array([0.3, -0.4, 1.1])
        alpha = np.array([2.0, 1.0, 0.5])
        expected = np.exp(lw) * alpha
        expected /= expected.sum()
        rng = np.random.default_rng(15)
        slots = [sample_p_z_given_weights(lw, alpha, rng)[1]
                 for _ in range(40_000)]
        counts = np.bincount(slots, minlength=3) / 40_000
        se = np.sqrt(expected * (1 - expected) / 40_000)
        assert np.all(np.abs(counts - expected) < 4 * se)

    def test_accepted_p_moments_closed_form(self):
        # E*[p_j] under pi*(p) ∝ (sum_k r_k p_k) Dir(p; alpha), via Dirichlet
        # cross moments E[p_j p_k] = a_j (a_k + 1[j=k]) / (a0 (a0 + 1))
        lw = np.array([0.0, 0.9, -0.7])
        alpha = np.array([1.5, 0.8, 2.2])
        r = np.exp(lw)
        a0 = alpha.sum()
        cross = np.outer(alpha, alpha) + np.diag(alpha)
        cross /= a0 * (a0 + 1)
        expected = (cross @ r) / (r @ (alpha / a0))
        rng = np.random.default_rng(16)
        ps = np.array([sample_p_z_given_weights(lw, alpha, rng)[0]
                       for _ in range(30_000)])
        se = ps.std(axis=0) / np.sqrt(ps.shape[0])
        assert np.all(np.abs(ps.mean(axis=0) - expected) < 4 * se)


class TestSamplePZU:
    def test_normal_gives_unit_u(self):
        data = make_data(n=15)
        state = make_state(n=15, components=(N,))
        rng = np.random.default_rng(17)
        p, z, u = sample_p_z_u(state, data, DirichletPrior.sparse(1), rng)
        assert z[0] == 1 and np.all(u == 1.0)

    def test_joint_z_u_against_grid_oracle(self):
        # z-marginal is closed form; u | z has a known conditional CDF.
        # Bin (z, u_1) into conditional-quantile cells and compare the joint
        # empirical frequencies with the exact probabilities (TV < 0.02).
        n_obs = 3
        X = np.ones((n_obs, 1))
        y = np.array([0.4, -1.1, 0.9])
        data = Dataset(y=y, X=X)
        state = make_state(n=n_obs, q=1, sigma2=1.2, nu_t=4.0, nu_s=1.8)
        state.beta = np.zeros(1)
        alpha = np.ones(3)
        prior = DirichletPrior(alpha=tuple(alpha))

        lw = np.array(log_model_weights(state, data))
        pz = np.exp(lw - lw.max()) * alpha
        pz /= pz.sum()

        g2 = variance_correction(T, state.nu_t)
        g3 = variance_correction(S, state.nu_s)
        b_t = y[0] ** 2 / (2 * g2 * state.sigma2) + state.nu_t / 2
        a_t = (state.nu_t + 1) / 2
        b_s = y[0] ** 2 / (2 * g3 * state.sigma2)
        a_s = state.nu_s + 0.5

        nbins = 15
        qs = np.arange(1, nbins) / nbins
        edges_t = stats.gamma.ppf(qs, a_t, scale=1 / b_t)
        edges_s = special.gammaincinv(a_s, qs * special.gammainc(a_s, b_s)) / b_s

        rng = np.random.default_rng(18)
        m = 50_000
        cells_emp = np.zeros(1 + 2 * nbins)
        for _ in range(m):
            p, z, u = sample_p_z_u(state, data, prior, rng)
            slot = int(np.argmax(z))
            if slot == 0:
                cells_emp[0] += 1
            elif slot == 1:
                cells_emp[1 + np.searchsorted(edges_t, u[0])] += 1
            else:
                cells_emp[1 + nbins + np.searchsorted(edges_s, u[0])] += 1
        cells_emp /= m
        cells_exact = np.concatenate([[pz[0]],
                                      np.full(nbins, pz[1] / nbins),
                                      np.full(nbins, pz[2] / nbins)])
        tv = 0.5 * np.abs(cells_emp - cells_exact).sum()
        assert tv < 0.02


class TestMhDfStep:
    def test_normal_state_passthrough(self, default_mixture):
        data = make_data(n=10)
        state = make_state(n=10, kind=N)
        config = SamplerConfig(seed=0, iterations=10, burn_in=1, warmup_iters=0)
        rng = np.random.default_rng(19)
        nu_t, nu_s, accepted = mh_df_step(
            state, data, (default_mixture.pc_student_t,
                          default_mixture.pc_slash), config, rng)
        assert (nu_t, nu_s, accepted) == (state.nu_t, state.nu_s, True)

    def test_support_is_respected(self, default_mixture):
        data = make_data(n=10)
        state = make_state(n=10, kind=T, nu_t=2.3)
        state.u = np.random.default_rng(20).gamma(2.0, 0.5, 10)
        config = SamplerConfig(seed=0, iterations=10, burn_in=1,
                               warmup_iters=0, tau_t=0.8)
        rng = np.random.default_rng(21)
        for _ in range(500):
            nu_t, nu_s, _ = mh_df_step(
                state, data, (default_mixture.pc_student_t,
                              default_mixture.pc_slash), config, rng)
            assert nu_t > 2.0
            state.nu_t = nu_t
            state.gamma = variance_correction(T, nu_t)


class TestImputeCensored:
    def test_no_censoring_is_noop(self):
        data = make_data(n=10)
        state = make_state(n=10)
        rng = np.random.default_rng(22)
        assert impute_censored(state, data, rng).size == 0

    def test_bounds_and_mean(self):
        n = 2000
        X = np.ones((n, 1))
        kappa = np.zeros(n)
        data = Dataset(y=np.zeros(n), X=X, censored=np.ones(n, bool),
                       kappa=kappa)
        state = make_state(n=n, q=1, sigma2=1.5, kind=T, nu_t=6.0)
        state.beta = np.array([0.7])
        state.u = np.random.default_rng(23).gamma(3.0, 1 / 3, n)
        rng = np.random.default_rng(24)
        draws = np.column_stack([impute_censored(state, data, rng)
                                 for _ in range(30)])
        assert np.all(draws <= 0.0)
        sd = np.sqrt(state.sigma2 * state.gamma / state.u)
        alpha = (0.0 - 0.7) / sd
        tn_mean = 0.7 - sd * stats.norm.pdf(alpha) / stats.norm.cdf(alpha)
        err = draws.mean(axis=1) - tn_mean
        assert abs(err.mean()) < 4 * err.std(ddof=1) / np.sqrt(n)


class TestWarmup:
    def test_zero_iters_passthrough(self, default_mixture):
        data = make_data(n=30)
        config = SamplerConfig(seed=1, iterations=100, burn_in=10,
                               warmup_iters=0, nu_t_start=7.7, nu_s_start=3.3,
                               tau_t=0.9, tau_s=0.4)
        res = warm_up(data, default_mixture, config, np.random.default_rng(0))
        assert (res.nu_t_start, res.nu_s_start) == (7.7, 3.3)
        assert (res.tau_t, res.tau_s) == (0.9, 0.4)

    def test_t_data_start_value(self, default_mixture):
        from smnmix import gen_study1
        data, _ = gen_study1(T, 3.0, 1000, seed=35)
        config = SamplerConfig(seed=13, iterations=100, burn_in=10,
                               warmup_iters=1500)
        res = warm_up(data, default_mixture, config, np.random.default_rng(36))
        assert 2.2 < res.nu_t_start < 4.5


class TestRunChain:
    def test_normal_only_mixture(self, default_mixture):
        from smnmix import gen_study1
        data, _ = gen_study1(N, None, 120, seed=30)
        mixture = MixtureConfig(components=(N,),
                                regression=default_mixture.regression)
        config = SamplerConfig(seed=5, iterations=600, burn_in=100,
                               warmup_iters=0)
        out = run_chain(data, mixture, config)
        assert np.array_equal(out.rho_hat, [1.0, 0.0, 0.0])
        assert np.all(out.gamma == 1.0)

    def test_seed_determinism(self, default_mixture):
        from smnmix import gen_study1
        data, _ = gen_study1(T, 3.0, 150, seed=31)
        config = SamplerConfig(seed=9, iterations=800, burn_in=200,
                               warmup_iters=300)
        out1 = run_chain(data, default_mixture, config)
        out2 = run_chain(data, default_mixture, config)
        assert np.array_equal(out1.beta, out2.beta)
        assert np.array_equal(out1.sigma2, out2.sigma2)
        assert np.array_equal(out1.z_index, out2.z_index)
        assert np.array_equal(out1.p, out2.p)

    def test_censored_run_keeps_imputations_below_limit(self, default_mixture):
        from smnmix import gen_study1
        data0, _ = gen_study1(N, None, 150, seed=32)
        cut = np.quantile(data0.y, 0.4)
        y = data0.y - cut
        censored = y <= 0
        y_obs = np.where(censored, 0.0, y)
        data = Dataset(y=y_obs, X=data0.X, censored=censored,
                       kappa=np.zeros(150))
        config = SamplerConfig(seed=10, iterations=800, burn_in=200,
                               warmup_iters=200)
        out = run_chain(data, default_mixture, config)
        assert out.censored_draws is not None
        assert np.all(out.censored_draws <= 0.0)

    def test_thinning(self, default_mixture):
        from smnmix import gen_study1
        data, _ = gen_study1(N, None, 80, seed=33)
        config = SamplerConfig(seed=11, iterations=500, burn_in=100,
                               warmup_iters=0, thin=4)
        out = run_chain(data, default_mixture, config)
        assert out.n_draws == 100

    def test_two_component_restriction(self, default_mixture):
        from smnmix import gen_study1
        data, _ = gen_study1(T, 3.0, 200, seed=34)
        mixture = MixtureConfig(components=(N, T),
                                regression=default_mixture.regression,
                                pc_student_t=default_mixture.pc_student_t)
        config = SamplerConfig(seed=12, iterations=800, burn_in=200,
                               warmup_iters=300)
        out = run_chain(data, mixture, config)
        assert out.rho_hat[S.slot] == 0.0
        assert out.rho_hat.sum() == pytest.approx(1.0, abs=1e-12)
        assert out.p.shape[1] == 2


class TestPredict:
    @staticmethod
    def constant_chain(beta, sigma2, m=4000):
        q = len(beta)
        return ChainOutput(
            components=KINDS,
            beta=np.tile(beta, (m, 1)),
            sigma2=np.full(m, sigma2),
            z_index=np.full(m, 1, dtype=np.int64),
            nu_t=np.full(m, 5.0), nu_s=np.full(m, 2.0),
            p=np.tile([1.0, 0.0, 0.0], (m, 1)),
            gamma=np.ones(m),
            rho_hat=np.array([1.0, 0.0, 0.0]),
            accept_rate_t=np.nan, accept_rate_s=np.nan, seed=0)

    def test_normal_chain_predictive_law(self):
        chain = self.constant_chain(np.array([1.0, -2.0]), 2.25)
        x = np.array([1.0, 0.5])
        rng = np.random.default_rng(25)
        draws = predict(chain, x, rng)
        assert stats.kstest(draws, "norm", args=(0.0, 1.5)).pvalue > 0.01

    def test_predictive_mean_tracks_beta(self, small_t_fit):
        data, truth, out = small_t_fit
        rng = np.random.default_rng(26)
        x = np.array([1.0, 0.3, 1.0])
        draws = predict(out, x, rng)
        se = draws.std(ddof=1) / np.sqrt(draws.size)
        assert abs(draws.mean() - x @ out.beta.mean(axis=0)) < 4 * se

    def test_zero_design_row(self):
        chain = self.constant_chain(np.array([1.0, -2.0]), 1.0)
        rng = np.random.default_rng(27)
        draws = predict(chain, np.zeros(2), rng)
        se = draws.std(ddof=1) / np.sqrt(draws.size)
        assert abs(draws.mean()) < 4 * se

    def test_model_conditional_subset(self, small_t_fit):
        _, _, out = small_t_fit
        rng = np.random.default_rng(28)
        visited = ModelKind(int(out.z_index[0]))
        draws = predict(out, np.array([1.0, 0.0, 0.0]), rng, kind=visited)
        assert draws.size == out.model_draw_indices(visited).size
        never = [k for k in KINDS
                 if out.model_draw_indices(k).size == 0]
        for k in never:
            with pytest.raises(DataError):
                predict(out, np.array([1.0, 0.0, 0.0]), rng, kind=k)
