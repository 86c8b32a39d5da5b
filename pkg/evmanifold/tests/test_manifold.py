"""
Conditional-quantile solving, regression manifolds, the closed-form logistic
approximation, the original-scale mapping and quantile tables
"""

import numpy as np
import pytest

from evmanifold.app.core.evmodels import ColesTawn, EvModel, HuslerReiss, Logistic, ModelKind, SemiparamLn
from evmanifold.app.core.manifold import (
    RegressionManifold, ScaleTag, SolverConfig, approx_frame, build_manifold, conditional_quantile,
    covariate_levels_from_probs, logistic_approx_line, manifold_to_original_scale, posterior_mean_manifold,
    predict_quantile_table, solve_conditional_quantiles
)
from evmanifold.app.core.manifold_exceptions import DataError, DomainError, SolverError, ValidationError

Q_GRID = [0.05, 0.25, 0.5, 0.75, 0.95]
X_GRID = [0.5, 1.0, 5.0, 20.0, 100.0]


class _StubModel(EvModel):
    """Frechet conditional with hooks for pathological behaviour"""
    kind = ModelKind.LOGISTIC

    def exponent(self, x, y):
        return 1.0 / np.asarray(x) + 1.0 / np.asarray(y)

    def _conditional(self, y, x):
        return np.exp(-1.0 / y)

    def _log_conditional(self, y, x):
        with np.errstate(divide="ignore"):
            return np.log(self._conditional(y, x))

    def _log_density(self, x, y):
        return -2 * np.log(x) - 1 / x - 2 * np.log(y) - 1 / y

    def params(self):
        return {"alpha": 1.0}


class _FlatModel(_StubModel):
    def _conditional(self, y, x):
        return np.full(np.shape(y), 0.5)


class _DipModel(_StubModel):
    def _conditional(self, y, x):
        base = np.exp(-1.0 / y)
        return np.where((x > 1.5) & (y > 1.5) & (y < 2.5), 0.0, base)


class TestConditionalQuantile:
    @pytest.mark.parametrize("x", [0.5, 3.0, 80.0])
    def test_independence_median(self, x):
        assert conditional_quantile(Logistic(1.0), 0.5, x) == pytest.approx(1.0 / np.log(2.0), rel=1e-8)

    def test_independence_at_exp_minus_one(self):
        assert conditional_quantile(Logistic(1.0), np.exp(-1.0), 4.0) == pytest.approx(1.0, rel=1e-8)

    def test_strong_hr_dependence_tracks_x(self):
        assert conditional_quantile(HuslerReiss(0.01), 0.5, 10.0) == pytest.approx(10.0, rel=0.05)

    @pytest.mark.parametrize("model", [Logistic(0.6), HuslerReiss(0.3), ColesTawn(0.5, 2.0),
                                       SemiparamLn.with_sigma(0.8)], ids=["logistic", "hr", "ct", "semiparam"])
    def test_solution_hits_level(self, model):
        q = np.linspace(0.06, 0.94, 9)
        qq, xx = np.meshgrid(q, np.geomspace(0.5, 50.0, 7), indexing="ij")
        y = solve_conditional_quantiles(model, qq, xx, SolverConfig())
        reached = model.conditional_cdf(y, xx)
        assert np.all(reached >= qq - 1e-12)
        assert np.all(reached - qq <= 1e-8)

    def test_level_outside_unit_interval(self):
        with pytest.raises(DomainError):
            conditional_quantile(Logistic(0.5), 1.0, 2.0)

    def test_solver_config_validation(self):
        with pytest.raises(ValidationError):
            SolverConfig(rel_tol=0.0)
        with pytest.raises(ValidationError):
            SolverConfig(bracket_growth=1.0)


class TestBuildManifold:
    def test_independence_rows_are_flat(self):
        m = build_manifold(Logistic(1.0), Q_GRID, X_GRID)
        assert np.all(np.ptp(m.y, axis=1) < 1e-8)
        np.testing.assert_allclose(m.line(0.5), 1.0 / np.log(2.0), rtol=1e-8)

    def test_ct_increases_with_q(self):
        m = build_manifold(ColesTawn(0.5, 2.0), Q_GRID, X_GRID)
        assert np.all(np.diff(m.y, axis=0) > 0)

    def test_hr_median_has_unit_slope(self):
        x = np.linspace(1.0, 50.0, 25)
        m = build_manifold(HuslerReiss(0.05), [0.5], x)
        slope = np.polyfit(x, m.line(0.5), 1)[0]
        assert 0.9 <= slope <= 1.1

    def test_frame_and_metadata(self):
        m = build_manifold(HuslerReiss(0.4), [0.25, 0.75], [1.0, 2.0, 3.0])
        frame = m.to_frame()
        assert list(frame.columns) == ["q", "x", "y", "scale"]
        assert len(frame) == 6
        assert set(frame["scale"]) == {"frechet"}
        meta = m.metadata(SolverConfig())
        assert meta["model"] == "hr"
        assert meta["params"] == {"lambda": 0.4}
        assert meta["solver"]["rel_tol"] == 1e-10

    @pytest.mark.parametrize("q_grid", [[], [0.5, 0.3], [0.0, 0.5], [0.5, 1.0]])
    def test_bad_q_grid(self, q_grid):
        with pytest.raises(ValidationError):
            build_manifold(Logistic(0.5), q_grid, X_GRID)

    def test_line_off_grid(self):
        with pytest.raises(ValidationError):
            build_manifold(Logistic(0.5), [0.5], [1.0]).line(0.6)

    def test_upper_bracket_failure(self):
        with pytest.raises(SolverError, match="upper bracket") as info:
            build_manifold(_FlatModel(), [0.9], [1.0], SolverConfig(max_iter=20))
        assert info.value.cell == (0, 0)

    def test_lower_bracket_failure(self):
        with pytest.raises(SolverError, match="lower bracket"):
            build_manifold(_FlatModel(), [0.3], [1.0], SolverConfig(max_iter=20))

    def test_non_monotone_conditional_reports_cell(self):
        with pytest.raises(SolverError, match="non-monotone") as info:
            build_manifold(_DipModel(), [0.5], [1.0, 2.0])
        assert info.value.cell == (0, 1)
        assert info.value.point == (0.5, 2.0)
        assert info.value.stage == "build_manifold"


class TestPosteriorMeanManifold:
    def test_constant_draws_give_plugin(self):
        plugin = build_manifold(SemiparamLn.with_sigma(1.0), [0.25, 0.75], [1.0, 4.0])
        averaged = posterior_mean_manifold(np.full(10, 1.0), [0.25, 0.75], [1.0, 4.0])
        np.testing.assert_allclose(averaged.y, plugin.y, rtol=1e-12)
        assert averaged.params == {"sigma": 1.0}

    def test_between_extreme_draws(self):
        grid = ([0.5], [2.0, 8.0])
        low = build_manifold(SemiparamLn.with_sigma(0.5), *grid).y
        high = build_manifold(SemiparamLn.with_sigma(2.0), *grid).y
        mean = posterior_mean_manifold(np.array([0.5, 2.0]), *grid).y
        assert np.all((mean >= np.minimum(low, high)) & (mean <= np.maximum(low, high)))

    def test_no_draws(self):
        with pytest.raises(DataError):
            posterior_mean_manifold(np.array([]), [0.5], [1.0])


class TestLogisticApproximation:
    def test_slope(self):
        line = logistic_approx_line(0.9, 0.5, np.array([100.0, 101.0, 200.0]))
        assert line[1] - line[0] == pytest.approx(1023.0 ** -0.9, rel=1e-9)
        assert (line[2] - line[0]) / 100.0 == pytest.approx(1023.0 ** -0.9, rel=1e-9)

    def test_scalar_in_scalar_out(self):
        assert isinstance(logistic_approx_line(0.9, 0.5, 100.0), float)

    def test_converges_to_exact_quantile(self):
        exact = {x: conditional_quantile(Logistic(0.5), 0.5, x) for x in (100.0, 1e4)}
        error = {x: abs(logistic_approx_line(0.5, 0.5, x) - exact[x]) / exact[x] for x in exact}
        assert error[1e4] < 1e-3
        assert error[1e4] < error[100.0]

    @pytest.mark.parametrize("alpha", [0.0, 1.0])
    def test_alpha_must_be_inside(self, alpha):
        with pytest.raises(DomainError):
            logistic_approx_line(alpha, 0.5, 50.0)

    def test_frame(self):
        frame = approx_frame(build_manifold(Logistic(0.9), [0.5, 0.9], [20.0, 50.0]), 0.9)
        assert list(frame.columns) == ["q", "x", "y_exact", "y_approx", "scale"]
        assert len(frame) == 4


class TestOriginalScale:
    @pytest.fixture
    def median_cell(self):
        z = 1.0 / np.log(2.0)
        return RegressionManifold(np.array([0.5]), np.array([z]), np.array([[z]]), model="logistic")

    def test_frechet_median_maps_to_data_median(self, median_cell):
        mapped = manifold_to_original_scale(median_cell, np.arange(1.0, 10.0), np.arange(11.0, 20.0))
        assert mapped.x_grid[0] == 5.0
        assert mapped.y[0, 0] == 15.0
        assert mapped.scale_tag == ScaleTag.ORIGINAL

    def test_already_original(self, median_cell):
        mapped = manifold_to_original_scale(median_cell, np.arange(1.0, 10.0), np.arange(1.0, 10.0))
        with pytest.raises(ValidationError):
            manifold_to_original_scale(mapped, np.arange(1.0, 10.0), np.arange(1.0, 10.0))

    def test_empty_data(self, median_cell):
        with pytest.raises(DataError):
            manifold_to_original_scale(median_cell, np.array([]), np.arange(1.0, 10.0))

    def test_values_come_from_data(self, rng):
        x_data, y_data = rng.gumbel(size=80), rng.normal(size=80)
        m = build_manifold(HuslerReiss(0.5), Q_GRID, [0.5, 2.0, 10.0])
        mapped = manifold_to_original_scale(m, x_data, y_data)
        assert set(mapped.y.ravel()) <= set(y_data)
        assert np.all(np.diff(mapped.y, axis=0) >= 0)
        assert set(mapped.to_frame()["scale"]) == {"original"}


class TestQuantileTable:
    def test_frechet_table(self):
        table = predict_quantile_table(HuslerReiss(0.3), [2.0, 5.0, 10.0], [0.75, 0.9, 0.95])
        assert table.values.shape == (3, 3)
        assert np.all(np.diff(table.values, axis=0) > 0)
        assert table.scale_tag == ScaleTag.FRECHET
        assert not table.has_intervals

    def test_independence_columns_identical(self):
        table = predict_quantile_table(Logistic(1.0), [2.0, 5.0, 10.0], [0.75, 0.9, 0.95])
        for row in table.values:
            np.testing.assert_allclose(row, row[0], rtol=1e-9)

    def test_render(self):
        text = predict_quantile_table(Logistic(0.5), [2.0, 5.0], [0.75, 0.9]).render()
        assert "75%" in text
        assert "90%" in text

    def test_original_scale(self, rng):
        x_data, y_data = rng.gumbel(size=200), rng.gumbel(size=200)
        levels = covariate_levels_from_probs([0.9, 0.95, 0.98], x_data)
        table = predict_quantile_table(HuslerReiss(0.3), levels, [0.75, 0.9, 0.95], x_data=x_data, y_data=y_data)
        assert table.scale_tag == ScaleTag.ORIGINAL
        assert set(table.values.ravel()) <= set(y_data)
        frame = table.to_frame()
        assert list(frame.columns) == ["q", "covariate", "value", "scale"]
        assert len(frame) == 9

    def test_intervals_from_draws(self):
        table = predict_quantile_table(SemiparamLn.with_sigma(1.0), [2.0, 5.0], [0.5, 0.9],
                                       draws=np.array([0.8, 1.0, 1.2]), n_draws=3)
        assert table.has_intervals
        assert np.all(table.lo <= table.hi)
        assert "lo" in table.to_frame().columns

    def test_non_positive_frechet_level(self):
        with pytest.raises(DomainError):
            predict_quantile_table(Logistic(0.5), [0.0, 2.0], [0.5])

    def test_empty_levels(self):
        with pytest.raises(ValidationError):
            predict_quantile_table(Logistic(0.5), [], [0.5])
