import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gridtrace import learners
from gridtrace.errors import GridtraceError, NumericalError
from gridtrace.learners import (EnsembleModel, FeatureMatrix, LearnerSpec,
                                LossKind, cross_validate, fit, fit_arma_css,
                                fit_mlp, fit_ridge, grid_search, init_mlp,
                                load_model, mlp_loss_and_grad, pinball,
                                save_model)
from gridtrace.regress import ols_matrix

from synthetic import enumeration_oracle, simulate_arma


class TestPinball:
    def test_values(self):
        assert pinball(10, 8, 0.9) == pytest.approx(1.8)
        assert pinball(8, 10, 0.9) == pytest.approx(0.2)

    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20),
           st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20))
    def test_median_is_half_abs(self, a, b):
        n = min(len(a), len(b))
        y, yhat = np.array(a[:n]), np.array(b[:n])
        assert np.allclose(pinball(y, yhat, 0.5), 0.5 * np.abs(y - yhat))
        assert np.all(pinball(y, yhat, 0.3) >= 0)

    def test_bad_level(self):
        with pytest.raises(GridtraceError):
            LossKind.pinball(1.0)


class TestRidge:
    def test_exact_linear(self, rng):
        X = rng.normal(size=(50, 3))
        y = X @ [1.5, -2.0, 0.25] + 4.0
        m = fit_ridge(X, y)
        assert np.allclose(m.coef, [1.5, -2.0, 0.25], atol=1e-8) and m.intercept == pytest.approx(4.0)

    def test_huge_penalty_shrinks_slopes(self, rng):
        X = rng.normal(size=(50, 2))
        m = fit_ridge(X, X @ [3.0, 1.0] + 2, lam=1e12)
        assert np.all(np.abs(m.coef) < 1e-8)

    def test_singular(self):
        X = np.column_stack([np.arange(10.0), 2 * np.arange(10.0)])
        with pytest.raises(NumericalError, match="singular"):
            fit_ridge(X, np.arange(10.0))

    def test_matches_ols(self, rng):
        X = rng.normal(size=(80, 4))
        y = X @ rng.normal(size=4) + rng.normal(size=80)
        m = fit_ridge(X, y)
        rep = ols_matrix(np.column_stack([X, np.ones(80)]), y)
        assert np.allclose(m.coef, rep.coef[:4], atol=1e-10)
        assert m.intercept == pytest.approx(rep.coef[4], abs=1e-10)

    @pytest.mark.parametrize("seed", range(10))
    def test_median_regression_enumeration_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(8, 51))
        x = rng.uniform(0, 10, n)
        y = 1 + 0.5 * x + rng.standard_t(2, n)
        for q in (0.5, 0.1, 0.9):
            m = fit_ridge(x[:, None], y, loss=LossKind.pinball(q))
            got = pinball(y, m.predict(x[:, None]), q).sum()
            assert got <= enumeration_oracle(x, y, q) + 1e-6

    @pytest.mark.parametrize("q", [0.1, 0.25, 0.5, 0.75, 0.9])
    def test_quantile_fraction_below(self, q):
        rng = np.random.default_rng(7)
        n = 4000
        X = rng.normal(size=(n, 2))
        y = X @ [1.0, -1.0] + rng.normal(size=n) * (1 + 0.5 * np.abs(X[:, 0]))
        m = fit_ridge(X, y, loss=LossKind.pinball(q))
        below = np.mean(y - m.predict(X) < 0)
        assert abs(below - q) <= 2 / np.sqrt(n)


class TestMLP:
    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        Z = rng.normal(size=(20, 3))
        y = rng.normal(size=20)
        spec = LearnerSpec("mlp", hidden=(4, 3))
        for trial in range(10):
            weights, biases, _ = init_mlp(LearnerSpec("mlp", hidden=(4, 3), seed=trial), 3)
            _, dW, db = mlp_loss_and_grad(weights, biases, Z, y)
            h = 1e-6
            fd_all, an_all = [], []
            for params, grads in ((weights, dW), (biases, db)):
                for P, G in zip(params, grads):
                    for idx in np.ndindex(P.shape):
                        old = P[idx]
                        P[idx] = old + h
                        up = mlp_loss_and_grad(weights, biases, Z, y)[0]
                        P[idx] = old - h
                        down = mlp_loss_and_grad(weights, biases, Z, y)[0]
                        P[idx] = old
                        fd_all.append((up - down) / (2 * h))
                        an_all.append(G[idx])
            fd_all, an_all = np.array(fd_all), np.array(an_all)
            worst = np.linalg.norm(fd_all - an_all) / max(np.linalg.norm(fd_all), np.linalg.norm(an_all))
            assert worst <= 1e-4

    def test_one_hidden_unit_close_to_ridge(self, rng):
        X = rng.normal(size=(600, 2))
        y = X @ [0.3, -0.2] + rng.normal(0, 0.1, 600)
        tr, te = slice(0, 400), slice(400, None)
        net = fit_mlp(X[tr], y[tr], LearnerSpec("mlp", hidden=(1,), epochs=150))
        lin = fit_ridge(X[tr], y[tr])
        rmse = lambda m: np.sqrt(np.mean((m.predict(X[te]) - y[te]) ** 2))
        assert rmse(net) <= 2 * rmse(lin)

    def test_zero_epochs_is_initialization(self, rng):
        X = rng.normal(size=(30, 2))
        y = rng.normal(size=30)
        spec = LearnerSpec("mlp", hidden=(5,), epochs=0, seed=9)
        a, b = fit_mlp(X, y, spec), fit_mlp(X, y, spec)
        w0, _, _ = init_mlp(spec, 2)
        assert all(np.array_equal(u, v) for u, v in zip(a.weights, w0))
        assert np.array_equal(a.predict(X), b.predict(X))

    def test_deterministic_given_seed(self, rng):
        X = rng.normal(size=(100, 3))
        y = np.sin(X[:, 0])
        spec = LearnerSpec("mlp", hidden=(8,), epochs=5, seed=3)
        assert np.array_equal(fit_mlp(X, y, spec).predict(X), fit_mlp(X, y, spec).predict(X))

    def test_loss_decreases_first_epochs(self, rng):
        X = rng.normal(size=(500, 2))
        m = fit_mlp(X, X @ [1.0, 2.0], LearnerSpec("mlp", hidden=(8,), epochs=10))
        assert m.history[-1] < 0.1 * m.history[0]
        assert np.mean(m.history[5:]) < np.mean(m.history[:5])

    def test_pinball_net_quantile(self, rng):
        X = rng.uniform(-1, 1, size=(3000, 1))
        y = X[:, 0] + rng.normal(size=3000)
        m = fit_mlp(X, y, LearnerSpec("mlp", hidden=(4,), epochs=60, loss=LossKind.pinball(0.9)))
        assert abs(np.mean(y < m.predict(X)) - 0.9) < 0.03

    def test_diverged(self, rng):
        X = rng.normal(size=(50, 2))
        y = rng.normal(size=50)
        with pytest.raises(NumericalError, match="diverged"):
            fit_mlp(X, y, LearnerSpec("mlp", epochs=2, learning_rate=1e300))


class TestARMA:
    def test_white_noise_mean(self, rng):
        x = rng.normal(5, 1, 300)
        m = fit_arma_css(x, (0, 0, 0))
        assert np.allclose(m.fitted_values(), x.mean())
        assert np.allclose(m.forecast(4), x.mean())

    def test_random_walk_forecast(self, rng):
        x = np.cumsum(rng.normal(size=200))
        assert np.allclose(fit_arma_css(x, (0, 1, 0)).forecast(5), x[-1])

    def test_ar1_recovery(self):
        x = simulate_arma([0.6], [], 5000, seed=1)
        assert abs(fit_arma_css(x, (1, 0, 0)).phi[0] - 0.6) <= 0.05

    @pytest.mark.parametrize("phi,theta", [((0.6, -0.3), (0.5,)), ((0.5, 0.2), (-0.4,))])
    def test_arma21_recovery(self, phi, theta):
        for seed in range(3):
            m = fit_arma_css(simulate_arma(phi, theta, 5000, seed), (2, 0, 1))
            assert np.all(np.abs(m.phi - phi) <= 0.1) and abs(m.theta[0] - theta[0]) <= 0.1

    @pytest.mark.xfail(reason="AR and MA roots nearly cancel, so CSS is flat along a ridge",
                       strict=False)
    def test_arma21_near_cancelling_parameters(self):
        for seed in range(5):
            m = fit_arma_css(simulate_arma((0.5, 0.2), (0.3,), 5000, seed), (2, 0, 1))
            assert np.all(np.abs(m.phi - (0.5, 0.2)) <= 0.1) and abs(m.theta[0] - 0.3) <= 0.1

    def test_trace_monotone(self):
        m = fit_arma_css(simulate_arma((0.6, -0.3), (0.5,), 2000, 4), (2, 0, 1))
        assert len(m.trace) > 2
        assert all(b <= a + 1e-9 for a, b in zip(m.trace, m.trace[1:]))

    def test_unstable(self):
        x = np.cumsum(np.cumsum(np.random.default_rng(0).normal(size=400)))
        with pytest.raises(NumericalError, match="unstable"):
            fit_arma_css(x, (1, 0, 0))

    def test_short_series_warns_then_errors(self, rng):
        with pytest.warns(RuntimeWarning):
            fit_arma_css(rng.normal(size=36), (2, 0, 1))
        with pytest.raises(GridtraceError, match="short-series"):
            fit_arma_css(rng.normal(size=5), (2, 0, 1))

    def test_forecast_with_differencing(self, rng):
        trend = 3.0 * np.arange(300) + rng.normal(0, 0.01, 300)
        f = fit_arma_css(trend, (0, 2, 0)).forecast(3)
        assert np.allclose(f, trend[-1] + (trend[-1] - trend[-2]) * np.arange(1, 4))


class TestSelection:
    def test_singleton_grid(self):
        spec = LearnerSpec("ridge", lam=3.0)
        assert grid_search([spec], None, None) is spec

    def test_tie_goes_first(self, rng):
        X = rng.normal(size=(40, 2))
        y = X @ [1.0, 1.0]
        a, b = LearnerSpec("ridge", lam=0.0), LearnerSpec("ridge", lam=0.0, seed=1)
        assert grid_search([a, b], X, y, 4) is a

    @pytest.mark.slow
    def test_true_penalty_selected(self):
        hits = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            n, p, lam = 40, 20, 10.0
            X = rng.normal(size=(n, p))
            beta = rng.normal(0, 1 / np.sqrt(lam), p)
            y = X @ beta + rng.normal(size=n)
            grid = [LearnerSpec("ridge", lam=v) for v in (0.0, lam, 1e6)]
            hits += grid_search(grid, X, y, 5).lam == lam
        assert hits >= 90

    def test_arma_grid(self):
        x = simulate_arma((0.7,), (), 400, 2)
        grid = [LearnerSpec("arma", order=(0, 0, 0)), LearnerSpec("arma", order=(1, 0, 0))]
        assert grid_search(grid, None, x, 4).order == (1, 0, 0)
        assert cross_validate(grid[1], None, x, 4) > 0

    def test_grid_skips_unfittable_candidates(self, rng):
        x = rng.normal(size=60)
        X = np.column_stack([x, 2 * x])
        y = x + rng.normal(size=60)
        grid = [LearnerSpec("ridge", lam=0.0), LearnerSpec("ridge", lam=1.0)]
        assert grid_search(grid, X, y, 3).lam == 1.0
        with pytest.raises(NumericalError):
            grid_search(grid[:1] * 2, X, y, 3)

    def test_ensemble(self, rng):
        X = rng.normal(size=(30, 2))
        members = [fit_ridge(X, X @ rng.normal(size=2) + rng.normal(size=30), lam=1.0) for _ in range(5)]
        ens = EnsembleModel(members)
        oracle = sum(m.predict(X) for m in members) / 5
        assert np.allclose(ens.predict(X), oracle, atol=1e-12)
        with pytest.raises(GridtraceError, match="empty-ensemble"):
            EnsembleModel([])


class TestSerialization:
    @pytest.mark.parametrize("spec", [LearnerSpec("ridge", lam=0.5),
                                      LearnerSpec("ridge", loss=LossKind.pinball(0.25)),
                                      LearnerSpec("mlp", hidden=(4, 2), epochs=3),
                                      LearnerSpec("arma", order=(1, 0, 1))])
    def test_round_trip(self, spec, tmp_path, rng):
        X = rng.normal(size=(120, 2))
        y = X @ [1.0, 0.5] + rng.normal(size=120)
        model = fit(spec, X, y)
        back = load_model(save_model(model, tmp_path / "m.json"))
        assert np.allclose(back.predict(X), model.predict(X), atol=1e-12, rtol=0)

    def test_ensemble_round_trip(self, tmp_path, rng):
        X = rng.normal(size=(50, 2))
        ens = EnsembleModel([fit_ridge(X, X[:, 0]), fit_ridge(X, X[:, 1])])
        back = load_model(save_model(ens, tmp_path / "e.json"))
        assert np.array_equal(back.predict(X), ens.predict(X))

    def test_feature_matrix_validation(self):
        with pytest.raises(GridtraceError):
            FeatureMatrix(np.array([[1.0, np.nan]]))
        with pytest.raises(GridtraceError):
            FeatureMatrix(np.ones((2, 2)), ("a", "a"))
