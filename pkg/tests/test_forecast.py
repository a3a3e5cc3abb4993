import numpy as np
import pytest
from scipy import stats

from bqrsavs.data import Dataset
from bqrsavs.forecast import (
    WindowConfig,
    combine_density,
    direct_forecast,
    gaussian_kde_density,
    kde_log_density_at,
    run_expanding_window,
)
from bqrsavs.gibbs import ChainConfig
from bqrsavs.priors import PriorConfig
from bqrsavs.quantile import quantile_constants
from bqrsavs.scoring import QUANTILE_GRID_19, cumulative_from_density, score_lpds
from bqrsavs.sparsify import SparsifyConfig


class TestCombineDensity:
    def test_gaussian_oracle(self):
        rng = np.random.default_rng(0)
        draws = {p: rng.standard_normal(5000) for p in QUANTILE_GRID_19}
        grid, dens = combine_density(draws)
        cdf = cumulative_from_density(grid, dens)
        ks = np.max(np.abs(cdf - stats.norm.cdf(grid)))
        assert ks < 0.02

    def test_integrates_to_one(self):
        rng = np.random.default_rng(1)
        draws = {p: rng.standard_normal(200) * 2 + 1 for p in (0.25, 0.5, 0.75)}
        grid, dens = combine_density(draws)
        assert np.all(dens >= 0.0)
        assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-6)

    def test_location_shift_equivariance(self):
        rng = np.random.default_rng(2)
        base = {p: rng.standard_normal(500) for p in (0.2, 0.5, 0.8)}
        shift = 3.7
        grid0, dens0 = combine_density(base)
        grid1, dens1 = combine_density({p: d + shift for p, d in base.items()})
        np.testing.assert_allclose(grid1, grid0 + shift, atol=1e-9)
        np.testing.assert_allclose(dens1, dens0, atol=1e-9)

    def test_monotone_cdf(self):
        rng = np.random.default_rng(3)
        draws = {p: rng.standard_normal(300) + 5 * p for p in QUANTILE_GRID_19}
        grid, dens = combine_density(draws)
        cdf = cumulative_from_density(grid, dens)
        assert np.all(np.diff(cdf) >= 0.0)

    def test_degenerate_stack_warns(self):
        draws = {0.5: np.full(100, 2.0), 0.9: np.full(50, 2.0)}
        with pytest.warns(UserWarning, match="degenerate"):
            grid, dens = combine_density(draws)
        assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-6)

    def test_grid_density_matches_exact_kernel_sum(self):
        rng = np.random.default_rng(4)
        values = rng.standard_normal(5000)
        grid, dens = gaussian_kde_density(values)
        for x in (-1.0, 0.0, 0.5):
            on_grid = float(np.log(np.interp(x, grid, dens)))
            exact = kde_log_density_at(values, x)
            assert on_grid == pytest.approx(exact, rel=0.01)

    def test_lpds_from_grid_close_to_exact_kernel(self):
        rng = np.random.default_rng(5)
        values = rng.standard_normal(20_000)
        grid, dens = gaussian_kde_density(values)
        a = score_lpds(grid, dens, 0.4)
        b = kde_log_density_at(values, 0.4)
        assert a == pytest.approx(b, rel=0.05)


class TestDirectForecast:
    def test_constant_model_centres_on_median(self):
        rng = np.random.default_rng(6)
        y = rng.standard_normal(150)
        d = Dataset(y, np.ones((150, 1)), has_intercept=True)
        draws = direct_forecast(d, 1, quantile_constants(0.5), PriorConfig(),
                                ChainConfig(burn_in=300, retained=500, seed=1))
        assert draws.mean() == pytest.approx(np.median(y[1:]), abs=0.1)

    def test_two_seeds_agree_within_mc_error(self):
        rng = np.random.default_rng(7)
        X = np.column_stack([np.ones(120), rng.standard_normal(120)])
        y = X @ np.asarray([0.3, 1.0]) + rng.standard_normal(120)
        d = Dataset(y, X, has_intercept=True)
        q = quantile_constants(0.5)
        m = [direct_forecast(d, 1, q, PriorConfig(),
                             ChainConfig(burn_in=300, retained=500, seed=s)).mean()
             for s in (1, 2)]
        assert m[0] == pytest.approx(m[1], abs=0.1)

    def test_sparsified_variant_runs(self):
        rng = np.random.default_rng(8)
        X = np.column_stack([np.ones(100), rng.standard_normal((100, 3))])
        y = X @ np.asarray([0.0, 1.0, 0.0, 0.0]) + rng.standard_normal(100)
        d = Dataset(y, X, has_intercept=True)
        draws = direct_forecast(d, 2, quantile_constants(0.25), PriorConfig(),
                                ChainConfig(burn_in=100, retained=200, seed=2),
                                sparsify=SparsifyConfig())
        assert draws.shape == (200,)
        assert np.all(np.isfinite(draws))

    def test_window_too_short(self):
        d = Dataset(np.ones(3), np.ones((3, 1)))
        with pytest.raises(ValueError):
            direct_forecast(d, 4, quantile_constants(0.5), PriorConfig(),
                            ChainConfig(burn_in=10, retained=10))


def _tiny_series(t=70, seed=9):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(t)
    y = 0.5 + x + rng.standard_normal(t)
    return Dataset(y, np.column_stack([np.ones(t), x]), has_intercept=True)


_TINY_CHAIN = ChainConfig(burn_in=40, retained=60)


class TestExpandingWindow:
    def test_window_arithmetic(self):
        d = _tiny_series(t=120)
        cfg = WindowConfig(initial_window=50, chain=ChainConfig(burn_in=10, retained=15),
                           quantile_levels=np.asarray([0.25, 0.5, 0.75]), seed=3)
        reports = run_expanding_window(d, [1], ["hsbqr"], cfg)
        assert len(reports) == 1
        assert len(reports[0].records) == 70  # 120 - 50 - 1 + 1

    def test_perfect_foresight_msfe_zero(self):
        d = _tiny_series(t=64)
        cfg = WindowConfig(initial_window=60, chain=ChainConfig(burn_in=5, retained=20),
                           quantile_levels=np.asarray([0.25, 0.5, 0.75]), seed=4)
        reports = run_expanding_window(d, [1], ["debug_perfect"], cfg)
        assert reports[0].msfe == pytest.approx(0.0, abs=1e-20)

    def test_one_report_per_estimator_and_horizon(self):
        d = _tiny_series(t=68)
        cfg = WindowConfig(initial_window=62, chain=ChainConfig(burn_in=10, retained=20),
                           quantile_levels=np.asarray([0.25, 0.5, 0.75]), seed=5)
        reports = run_expanding_window(d, [1, 2], ["hsbqr", "hsbqr_bic"], cfg)
        keys = {(r.estimator, r.horizon) for r in reports}
        assert keys == {("hsbqr", 1), ("hsbqr", 2), ("hsbqr_bic", 1), ("hsbqr_bic", 2)}
        for r in reports:
            for f in ("msfe", "lpds", "crps", "qwcrps"):
                assert np.isfinite(getattr(r, f))
            assert np.all((r.pits >= 0.0) & (r.pits <= 1.0))

    def test_threaded_runs_match_sequential(self):
        d = _tiny_series(t=66)
        base = dict(initial_window=60, chain=ChainConfig(burn_in=10, retained=20),
                    quantile_levels=np.asarray([0.3, 0.5, 0.7]), seed=6)
        seq = run_expanding_window(d, [1], ["hsbqr"], WindowConfig(**base, threads=1))
        par = run_expanding_window(d, [1], ["hsbqr"], WindowConfig(**base, threads=3))
        np.testing.assert_array_equal(seq[0].pits, par[0].pits)
        assert seq[0].crps == par[0].crps
        assert seq[0].qwcrps == par[0].qwcrps

    def test_sparsified_estimator_collects_inclusion(self):
        d = _tiny_series(t=66)
        cfg = WindowConfig(initial_window=62, chain=ChainConfig(burn_in=10, retained=20),
                           quantile_levels=np.asarray([0.25, 0.5, 0.75]), seed=7)
        reports = run_expanding_window(d, [1], ["hsbqr_bic"], cfg)
        rec = reports[0].records[0]
        assert rec.inclusion is not None
        assert rec.inclusion.shape == (3, 2)
        assert np.all((rec.inclusion >= 0.0) & (rec.inclusion <= 1.0))

    def test_series_too_short_raises(self):
        d = _tiny_series(t=30)
        cfg = WindowConfig(initial_window=50, seed=8)
        with pytest.raises(ValueError, match="too short"):
            run_expanding_window(d, [1], ["hsbqr"], cfg)
