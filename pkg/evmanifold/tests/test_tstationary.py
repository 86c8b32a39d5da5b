"""
Transformed-stationary decomposition and the time-varying GEV
"""

import numpy as np
import pytest

from evmanifold.app.core.manifold_exceptions import DataError, ValidationError
from evmanifold.app.core.margins import GevParams, gev_quantile
from evmanifold.app.core.tstationary import (
    TsConfig, TsDecomposition, destationarize_gev, restore_series, running_mean, running_std,
    running_trend, smooth_profile, stationarize, std_seasonality, trend_seasonality, window_counts
)

NO_SEASON = TsConfig(season_enabled=False)


def _slope(t, v):
    return np.polyfit(t, v, 1)[0]


class TestTsConfig:
    def test_defaults(self):
        cfg = TsConfig()
        assert (cfg.w, cfg.wsn, cfg.l) == (5.0, 31.0, 2)

    @pytest.mark.parametrize("kwargs", [{"w": 1.5}, {"wsn": 120.0}, {"l": 0}, {"w": 2.0, "l": 30}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            TsConfig(**kwargs)


class TestRunningTrend:
    def test_unit_window(self):
        out = running_mean(np.arange(5.0), np.array([1.0, 2.0, 3.0, 4.0, 5.0]), 1.0)
        assert out[2] == pytest.approx(3.0)
        # truncated window at the edge
        assert out[0] == pytest.approx(1.5)

    def test_constant(self, make_series):
        trend = running_trend(make_series(np.full(600, 4.2), freq="7D"), TsConfig())
        np.testing.assert_allclose(trend, 4.2, atol=1e-12)

    def test_linear_interior(self, make_series):
        series = make_series(0.01 * np.arange(4000.0))
        cfg = TsConfig()
        trend = running_trend(series, cfg)
        interior = (series.days >= cfg.w_days / 2) & (series.days <= series.days[-1] - cfg.w_days / 2)
        np.testing.assert_allclose(trend[interior], series.values[interior], atol=1e-9)

    def test_window_longer_than_series(self, make_series):
        with pytest.raises(DataError, match="exceeds the series span"):
            running_trend(make_series(np.arange(300.0)), TsConfig())

    def test_stationary_input_stays_near_mean(self, make_series, rng):
        series = make_series(rng.normal(size=7300))
        cfg = TsConfig()
        trend = running_trend(series, cfg)
        counts = window_counts(series.days, cfg.w_days / 2)
        bound = 4.0 * series.values.std() / np.sqrt(counts)
        assert np.all(np.abs(trend - series.values.mean()) < bound)


class TestSeasonality:
    def test_zero_detrended(self, make_series):
        series = make_series(np.linspace(0.0, 3.0, 1200))
        np.testing.assert_allclose(trend_seasonality(series, series.values), 0.0, atol=1e-15)

    def test_january_bump(self, make_series):
        base = make_series(np.zeros(1461))
        bumped = base.with_values((base.months == 1).astype(float))
        season = trend_seasonality(bumped, np.zeros(len(bumped)))
        assert season[0] == pytest.approx(1.0)
        np.testing.assert_allclose(season[1:], 0.0, atol=1e-15)

    def test_annual_sinusoid(self, make_series):
        series = make_series(np.zeros(730))
        wave = np.sin(2 * np.pi * series.days / 365.25)
        season = trend_seasonality(series.with_values(wave), np.zeros(len(series)))
        for month in range(12):
            chosen = series.months == month + 1
            assert season[month] == pytest.approx(wave[chosen].mean(), abs=0.02)

    def test_missing_month(self, make_series):
        series = make_series(np.arange(100.0), start="2001-01-01")
        with pytest.raises(DataError, match="no observations"):
            trend_seasonality(series, np.zeros(len(series)))

    def test_homoskedastic_std_season(self, make_series, rng):
        series = make_series(rng.normal(size=7305))
        cfg = TsConfig()
        std = running_std(series, np.zeros(len(series)), cfg)
        season = std_seasonality(series, std, cfg)
        assert np.all((season > 0.85) & (season < 1.15))

    def test_july_noise_doubles(self, make_series, rng):
        series = make_series(np.zeros(7305))
        noise = rng.normal(size=len(series)) * np.where(series.months == 7, 2.0, 1.0)
        series = series.with_values(noise)
        cfg = TsConfig()
        season = std_seasonality(series, running_std(series, np.zeros(len(series)), cfg), cfg)
        baseline = np.median(season[[0, 1, 2, 3, 9, 10, 11]])
        assert 1.6 <= season[6] / baseline <= 2.2


class TestRunningStd:
    def test_unit_noise(self, make_series, rng):
        series = make_series(rng.normal(size=5000))
        cfg = TsConfig()
        std = running_std(series, np.zeros(len(series)), cfg)
        interior = (series.days >= cfg.w_days / 2) & (series.days <= series.days[-1] - cfg.w_days / 2)
        assert np.all((std[interior] > 0.9) & (std[interior] < 1.1))

    def test_constant_has_zero_variance(self, make_series):
        series = make_series(np.full(3000, 2.0))
        with pytest.raises(DataError, match="zero variance"):
            running_std(series, np.full(3000, 2.0), TsConfig())

    def test_smoothing_keeps_constant_profile(self):
        t = np.arange(0.0, 3000.0, 7.0)
        np.testing.assert_allclose(smooth_profile(t, np.full(t.size, 1.7), 400.0), 1.7, rtol=1e-14)


class TestStationarize:
    def test_round_trip(self, make_series, rng):
        t = np.arange(5000.0)
        series = make_series(0.001 * t + np.sin(2 * np.pi * t / 365.25) + rng.gumbel(size=t.size))
        x, decomposition = stationarize(series, TsConfig())
        back = restore_series(x, decomposition)
        np.testing.assert_allclose(back.values, series.values, rtol=0, atol=1e-10)

    def test_stationary_input(self, make_series, rng):
        x, decomposition = stationarize(make_series(rng.normal(size=5000)), TsConfig())
        assert decomposition.season_enabled
        assert abs(x.values.mean()) < 0.05
        assert 0.9 <= x.values.std() <= 1.1

    def test_linear_trend_removed(self, make_series, rng):
        series = make_series(np.zeros(5218), freq="7D")
        years = series.days / 365.25
        series = series.with_values(years + rng.normal(size=len(series)))
        x, _ = stationarize(series, NO_SEASON)
        assert abs(_slope(years, x.values)) < 0.01 * _slope(years, series.values)

    def test_without_seasonality_is_plain_standardisation(self, make_series, rng):
        series = make_series(rng.normal(size=3000) + 5.0)
        x, d = stationarize(series, NO_SEASON)
        np.testing.assert_array_equal(d.trend_season, np.zeros(12))
        np.testing.assert_array_equal(d.std_season, np.ones(12))
        np.testing.assert_allclose(x.values, (series.values - d.trend) / d.std, atol=1e-12)

    def test_yearly_series_disables_seasonality(self, make_series, rng):
        _, d = stationarize(make_series(rng.normal(size=40), start="1980-01-01", freq="YS"), TsConfig())
        assert not d.season_enabled

    def test_restore_rejects_misaligned(self, make_series, rng):
        x, d = stationarize(make_series(rng.normal(size=3000)), TsConfig())
        with pytest.raises(DataError):
            restore_series(make_series(np.zeros(10)), d)

    def test_restore_of_zero_is_location(self, make_series, rng):
        x, d = stationarize(make_series(rng.normal(size=3000)), TsConfig())
        np.testing.assert_allclose(restore_series(x.with_values(np.zeros(len(x))), d).values, d.location)

    def test_decomposition_frame_columns(self, make_series, rng):
        _, d = stationarize(make_series(rng.normal(size=3000)), TsConfig())
        assert list(d.to_frame().columns) == [
            "date", "value", "trend", "trend_season", "std", "std_season", "stationarized"
        ]


class TestDestationarizeGev:
    @pytest.fixture
    def decomposition(self, make_series):
        series = make_series(np.zeros(24), freq="MS")
        return TsDecomposition(
            times=series.times, values=series.values,
            trend=np.linspace(0.0, 1.0, 24), trend_season=np.linspace(-0.5, 0.5, 12),
            std=np.full(24, 2.0), std_season=np.full(12, 1.5), season_enabled=True,
        )

    def test_scale(self, decomposition):
        tv = destationarize_gev(GevParams(0.3, 1.0, 0.2), decomposition)
        np.testing.assert_allclose(tv.sigma_t, 3.0)

    def test_location(self, decomposition):
        tv = destationarize_gev(GevParams(0.0, 1.0, 0.2), decomposition)
        np.testing.assert_allclose(tv.mu_t, decomposition.location)

    def test_shape_constant(self, decomposition):
        tv = destationarize_gev(GevParams(0.0, 1.0, 0.2), decomposition)
        assert tv.xi == 0.2
        assert (tv.to_frame()["xi"] == 0.2).all()

    def test_quantiles_are_affine(self, decomposition):
        p = GevParams(0.4, 0.8, -0.1)
        tv = destationarize_gev(p, decomposition)
        for q in (0.1, 0.5, 0.99):
            expected = decomposition.scale * gev_quantile(q, p) + decomposition.location
            np.testing.assert_allclose(tv.quantile(q), expected, rtol=1e-12)
