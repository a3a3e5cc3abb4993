import numpy as np
import pytest

from bqrsavs.data import Dataset
from bqrsavs.gibbs import (
    ChainConfig,
    GibbsState,
    _fast_draw_core,
    beta_posterior_direct,
    draw_beta_direct,
    draw_beta_fast,
    draw_sigma,
    draw_z,
    run_gibbs,
    sigma_params,
    z_params,
)
from bqrsavs.priors import PriorConfig, init_prior_state
from bqrsavs.quantile import quantile_constants


def _gibbs_state(beta, sigma, z, k=None):
    beta = np.asarray(beta, dtype=float)
    return GibbsState(beta=beta, sigma=float(sigma),
                      z=np.asarray(z, dtype=float),
                      prior=init_prior_state(k or len(beta)))


def _residual_dataset(residuals):
    """Dataset with X = 0 so that y - X beta equals the residual vector."""
    r = np.asarray(residuals, dtype=float)
    return Dataset(r, np.zeros((len(r), 1)))


class TestDrawZ:
    def test_rate_at_median(self):
        q = quantile_constants(0.5)
        d = _residual_dataset([1.0])
        _, d_bar = z_params(d, np.zeros(1), 1.0, q)
        assert d_bar == pytest.approx(2.0)  # (0 + 16) / (1 * 8)

    def test_mean_matches_expectation_formula(self):
        # E[z_t] = |r|/sqrt(xi^2+2tau^2) + sigma tau^2/(xi^2+2tau^2)
        rng = np.random.default_rng(0)
        n = 1_000_000
        for p, r, sigma in ((0.5, 4.0, 1.0), (0.1, 0.7, 2.5)):
            q = quantile_constants(p)
            d = _residual_dataset(np.full(n, r))
            st = _gibbs_state(np.zeros(1), sigma, np.ones(n), k=1)
            z = draw_z(st, d, q, rng)
            denom = q.xi ** 2 + 2.0 * q.tau_sq
            expected = abs(r) / np.sqrt(denom) + sigma * q.tau_sq / denom
            assert z.mean() == pytest.approx(expected, rel=0.005)

    def test_strictly_positive(self):
        rng = np.random.default_rng(1)
        n = 1_000_000
        d = _residual_dataset(rng.standard_normal(n) * 3.0)
        st = _gibbs_state(np.zeros(1), 0.5, np.ones(n), k=1)
        z = draw_z(st, d, quantile_constants(0.25), rng)
        assert np.all(z > 0.0)

    def test_zero_residual_clamped(self):
        rng = np.random.default_rng(2)
        d = _residual_dataset([0.0, 0.0])
        st = _gibbs_state(np.zeros(1), 1.0, np.ones(2), k=1)
        z = draw_z(st, d, quantile_constants(0.5), rng)
        assert np.all(np.isfinite(z)) and np.all(z > 0.0)


class TestDrawSigma:
    def test_shape_only_depends_on_t(self):
        q = quantile_constants(0.3)
        cfg = PriorConfig()
        d = _residual_dataset(np.arange(1.0, 11.0))
        a_bar, _ = sigma_params(d, np.zeros(1), np.ones(10), q, cfg)
        assert a_bar == pytest.approx(15.1)  # 0.1 + 30/2
        a_bar2, _ = sigma_params(d, np.zeros(1), np.full(10, 9.0), q, cfg)
        assert a_bar2 == a_bar

    def test_perfect_fit_rate(self):
        # y_t = x_t'beta + xi z_t with z = 1 makes the residual sum vanish
        q = quantile_constants(0.2)
        t = 7
        X = np.ones((t, 1))
        beta = np.asarray([0.4])
        y = X @ beta + q.xi * np.ones(t)
        d = Dataset(y, X)
        _, b_bar = sigma_params(d, beta, np.ones(t), q, PriorConfig())
        assert b_bar == pytest.approx(0.1 + t)

    def test_inverse_gamma_mean(self):
        rng = np.random.default_rng(3)
        q = quantile_constants(0.5)
        cfg = PriorConfig()
        d = _residual_dataset([1.0, -2.0, 0.5])
        st = _gibbs_state(np.zeros(1), 1.0, np.asarray([0.5, 1.0, 2.0]), k=1)
        a_bar, b_bar = sigma_params(d, st.beta, st.z, q, cfg)
        draws = np.asarray([draw_sigma(st, d, q, cfg, rng) for _ in range(100_000)])
        assert draws.mean() == pytest.approx(b_bar / (a_bar - 1.0), rel=0.02)


def _random_instance(rng, t, k, lam_scale=1.0):
    X = rng.standard_normal((t, k))
    y = rng.standard_normal(t)
    d = Dataset(y, X)
    st = _gibbs_state(np.zeros(k), float(rng.uniform(0.5, 2.0)),
                      rng.uniform(0.2, 3.0, t))
    lam = rng.uniform(0.1, 2.0, k) * lam_scale
    return d, st, lam


class TestDrawBetaDirect:
    def test_matches_dense_inverse_oracle(self):
        rng = np.random.default_rng(4)
        q = quantile_constants(0.3)
        d, st, lam = _random_instance(rng, 5, 2)
        mean, _ = beta_posterior_direct(d, st, lam, q)
        w = 1.0 / (q.tau_sq * st.z * st.sigma)
        prec = d.X.T @ (d.X * w[:, None]) + np.diag(1.0 / lam)
        oracle = np.linalg.inv(prec) @ (d.X * w[:, None]).T @ (d.y - q.xi * st.z)
        np.testing.assert_allclose(mean, oracle, atol=1e-10)

    def test_flat_prior_limit_is_wls(self):
        rng = np.random.default_rng(5)
        q = quantile_constants(0.7)
        d, st, _ = _random_instance(rng, 40, 3)
        lam = np.full(3, 1e12)
        mean, _ = beta_posterior_direct(d, st, lam, q)
        w = 1.0 / (q.tau_sq * st.z * st.sigma)
        xw = d.X * w[:, None]
        wls = np.linalg.solve(d.X.T @ xw, xw.T @ (d.y - q.xi * st.z))
        np.testing.assert_allclose(mean, wls, atol=1e-6)

    def test_tight_prior_limit_is_zero(self):
        rng = np.random.default_rng(6)
        q = quantile_constants(0.5)
        d, st, _ = _random_instance(rng, 30, 4)
        mean, _ = beta_posterior_direct(d, st, np.full(4, 1e-14), q)
        np.testing.assert_allclose(mean, np.zeros(4), atol=1e-8)

    def test_draws_have_posterior_moments(self):
        rng = np.random.default_rng(7)
        q = quantile_constants(0.4)
        d, st, lam = _random_instance(rng, 25, 3)
        mean, chol = beta_posterior_direct(d, st, lam, q)
        cov = np.linalg.inv(chol.T @ chol)
        draws = np.asarray([draw_beta_direct(d, st, lam, q, rng) for _ in range(40_000)])
        np.testing.assert_allclose(draws.mean(axis=0), mean, atol=0.02)
        np.testing.assert_allclose(np.cov(draws.T), cov, atol=0.02)


class TestDrawBetaFast:
    def test_zero_noise_equals_direct_mean(self):
        rng = np.random.default_rng(8)
        q = quantile_constants(0.25)
        d, st, lam = _random_instance(rng, 20, 50)
        mean, _ = beta_posterior_direct(d, st, lam, q)
        fast = _fast_draw_core(d, st, lam, q, np.zeros(50), np.zeros(20))
        np.testing.assert_allclose(fast, mean, atol=1e-10)

    def test_zero_design_returns_prior_draw(self):
        rng = np.random.default_rng(9)
        q = quantile_constants(0.5)
        t, k = 6, 4
        d = Dataset(rng.standard_normal(t), np.zeros((t, k)))
        st = _gibbs_state(np.zeros(k), 1.0, np.ones(t))
        u = rng.standard_normal(k)
        out = _fast_draw_core(d, st, np.ones(k), q, u, rng.standard_normal(t))
        np.testing.assert_allclose(out, u, atol=1e-12)

    def test_moments_match_direct_sampler(self):
        rng = np.random.default_rng(10)
        q = quantile_constants(0.4)
        d, st, lam = _random_instance(rng, 30, 100)
        n = 20_000
        fast = np.asarray([draw_beta_fast(d, st, lam, q, rng) for _ in range(n)])
        direct = np.asarray([draw_beta_direct(d, st, lam, q, rng) for _ in range(n)])
        mean, chol = beta_posterior_direct(d, st, lam, q)
        cov = np.linalg.inv(chol.T @ chol)
        # 4-sigma Monte Carlo bands derived from the analytic covariance
        mean_tol = 4.0 * np.sqrt(np.trace(cov) / n)
        cov_tol = 4.0 * np.trace(cov) / (np.sqrt(n) * np.linalg.norm(cov))
        for draws in (fast, direct):
            assert np.linalg.norm(draws.mean(axis=0) - mean) < mean_tol
            rel = np.linalg.norm(np.cov(draws.T) - cov) / np.linalg.norm(cov)
            assert rel < cov_tol


class TestRunGibbs:
    def test_null_model_median_oracle(self):
        rng = np.random.default_rng(11)
        y = rng.standard_normal(500)
        d = Dataset(y, np.ones((500, 1)), has_intercept=True)
        chain = run_gibbs(d, quantile_constants(0.5), PriorConfig(),
                          ChainConfig(burn_in=500, retained=1000, seed=1))
        assert chain.beta_draws.mean() == pytest.approx(np.median(y), abs=0.08)

    def test_recovers_two_coefficients(self):
        from scipy.optimize import minimize

        rng = np.random.default_rng(12)
        X = rng.standard_normal((300, 2))
        y = X @ np.asarray([1.0, 0.5]) + rng.standard_normal(300)
        d = Dataset(y, X)
        chain = run_gibbs(d, quantile_constants(0.5), PriorConfig(),
                          ChainConfig(burn_in=500, retained=1000, seed=2))
        post_mean = chain.beta_draws.mean(axis=0)
        # frequentist median-regression oracle on the same sample
        lad = minimize(lambda b: np.sum((0.5 - (y - X @ b < 0)) * (y - X @ b)),
                       np.zeros(2), method="Powell").x
        np.testing.assert_allclose(post_mean, lad, atol=0.05)
        # and within ~3 standard errors of the generating coefficients
        np.testing.assert_allclose(post_mean, [1.0, 0.5], atol=0.2)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(13)
        X = rng.standard_normal((40, 3))
        y = X[:, 0] + rng.standard_normal(40)
        d = Dataset(y, X)
        for sampler in ("direct", "fast"):
            cc = ChainConfig(burn_in=20, retained=30, seed=7, beta_sampler=sampler)
            a = run_gibbs(d, quantile_constants(0.3), PriorConfig(), cc)
            b = run_gibbs(d, quantile_constants(0.3), PriorConfig(), cc)
            np.testing.assert_array_equal(a.beta_draws, b.beta_draws)
            np.testing.assert_array_equal(a.sigma_draws, b.sigma_draws)

    def test_retained_draws_positive(self):
        rng = np.random.default_rng(14)
        X = rng.standard_normal((50, 2))
        y = X[:, 0] + rng.standard_normal(50)
        chain = run_gibbs(Dataset(y, X), quantile_constants(0.1), PriorConfig(family="lasso"),
                          ChainConfig(burn_in=50, retained=100, seed=3))
        assert np.all(chain.sigma_draws > 0.0)
        assert chain.S == 100

    def test_auto_picks_fast_when_wide(self):
        rng = np.random.default_rng(15)
        X = rng.standard_normal((20, 40))
        y = rng.standard_normal(20)
        chain = run_gibbs(Dataset(y, X), quantile_constants(0.5), PriorConfig(),
                          ChainConfig(burn_in=10, retained=10, seed=4))
        assert chain.meta["beta_sampler"] == "fast"
        chain = run_gibbs(Dataset(y[:15], X[:15, :5]), quantile_constants(0.5),
                          PriorConfig(), ChainConfig(burn_in=10, retained=10, seed=4))
        assert chain.meta["beta_sampler"] == "direct"

    def test_median_sign_symmetry(self):
        rng = np.random.default_rng(16)
        X = rng.standard_normal((200, 3))
        y = X @ np.asarray([1.0, -0.5, 0.0]) + rng.standard_normal(200)
        cc = ChainConfig(burn_in=400, retained=800, seed=5)
        q = quantile_constants(0.5)
        pos = run_gibbs(Dataset(y, X), q, PriorConfig(), cc)
        neg = run_gibbs(Dataset(-y, X), q, PriorConfig(), cc)
        np.testing.assert_allclose(pos.beta_draws.mean(axis=0),
                                   -neg.beta_draws.mean(axis=0), atol=0.08)

    def test_ssvs_chain_tracks_model_size(self):
        rng = np.random.default_rng(17)
        X = rng.standard_normal((100, 10))
        y = X[:, 0] * 2.0 + rng.standard_normal(100)
        chain = run_gibbs(Dataset(y, X), quantile_constants(0.5),
                          PriorConfig(family="ssvs"),
                          ChainConfig(burn_in=100, retained=200, seed=6))
        assert chain.model_size_draws is not None
        assert chain.model_size_draws.shape == (200,)
        assert np.all(chain.model_size_draws >= 0)
        assert "gamma_freq" in chain.meta
        assert chain.meta["gamma_freq"][0] > 0.9

    def test_thinning_counts(self):
        rng = np.random.default_rng(18)
        X = rng.standard_normal((30, 2))
        y = rng.standard_normal(30)
        chain = run_gibbs(Dataset(y, X), quantile_constants(0.5), PriorConfig(),
                          ChainConfig(burn_in=10, retained=25, thin=3, seed=8))
        assert chain.S == 25

    def test_failures_carry_iteration_index(self, monkeypatch):
        import bqrsavs.gibbs as gibbs_mod
        from bqrsavs.gibbs import NumericalError

        calls = {"n": 0}

        def explode(*args, **kwargs):
            calls["n"] += 1
            if calls["n"] > 3:
                raise np.linalg.LinAlgError("synthetic failure")
            return np.ones(5)

        monkeypatch.setattr(gibbs_mod, "draw_z", explode)
        rng = np.random.default_rng(19)
        d = Dataset(rng.standard_normal(5), rng.standard_normal((5, 2)))
        with pytest.raises(NumericalError, match="iteration 3"):
            run_gibbs(d, quantile_constants(0.5), PriorConfig(),
                      ChainConfig(burn_in=2, retained=5, seed=9))
