import cvxpy as cp
import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

import lbdn.train as tr
from helpers import relative_fd_error, trained
from lbdn import autodiff as ad
from lbdn.certify import check_certificate
from lbdn.estimator import LBDNRegressor
from lbdn.exceptions import DivergenceError, DomainError
from lbdn.sandwich import extract_weights, forward, random_params, realize
from lbdn.train import (
    AdamState,
    TrainConfig,
    fit,
    lr_at,
    mse_grad,
    param_arrays,
    square_wave,
    square_wave_data,
    tape_forward,
    tape_realize,
    train,
)


def best_lipschitz_fit_mse(x, y, L=1.0):
    """Least-squares fit by any L-Lipschitz function of a scalar input (a convex QP)."""
    order = np.argsort(x)
    xs, ys = x[order], y[order]
    f = cp.Variable(len(xs))
    gaps = np.diff(xs)
    prob = cp.Problem(cp.Minimize(cp.sum_squares(f - ys) / len(xs)), [cp.abs(cp.diff(f)) <= L * gaps])
    prob.solve()
    return float(prob.value)


class TestSchedule:
    def test_examples(self):
        config = TrainConfig(epochs=200)
        assert lr_at(0, config) == 0.0
        assert lr_at(100, config) == pytest.approx(0.01)
        assert lr_at(199, config) == pytest.approx(2 * 0.01 / 200)

    def test_fractional_epochs_are_piecewise_linear(self):
        config = TrainConfig(epochs=10, max_lr=1.0)
        assert lr_at(2.5, config) == pytest.approx(0.5)
        assert lr_at(7.5, config) == pytest.approx(0.5)
        assert lr_at(10, config) == 0.0

    def test_knee_is_configurable(self):
        config = TrainConfig(epochs=10, warmup_frac=0.2)
        assert lr_at(2, config) == pytest.approx(config.max_lr)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(gamma=0.0)
        with pytest.raises(ValueError):
            TrainConfig(epochs=-1)
        with pytest.raises(ValueError):
            TrainConfig(warmup_frac=1.0)


class TestSquareWave:
    @pytest.mark.parametrize("x, y", [(0.5, 1.0), (-0.5, 0.0), (2.0, 0.0), (-2.0, 1.0), (-1.0, 0.0), (1.0, 0.0), (0.0, 1.0)])
    def test_examples(self, x, y):
        assert square_wave(x) == y

    def test_vectorized(self):
        np.testing.assert_array_equal(square_wave(np.array([-1.5, -0.5, 0.5, 1.5])), [1.0, 0.0, 1.0, 0.0])

    @pytest.mark.parametrize("x", [2.01, -3.0, np.nan])
    def test_outside_domain(self, x):
        with pytest.raises(DomainError):
            square_wave(x)

    def test_data_is_seeded(self):
        a, b = square_wave_data(TrainConfig(seed=3)), square_wave_data(TrainConfig(seed=3))
        for u, v in zip(a, b):
            np.testing.assert_array_equal(u, v)
        assert a[0].shape == (300, 1) and a[2].shape == (200, 1)
        assert np.all(np.abs(a[0]) <= 2.0)


class TestGradients:
    def setup_method(self):
        rng = np.random.default_rng(0)
        self.X = rng.uniform(-2, 2, size=(7, 2))
        self.y = rng.standard_normal((7, 1))

    def test_tanh_matches_finite_differences(self):
        params = random_params([2, 4, 4, 1], gamma=2.0, seed=1, scale=0.5, activation="tanh")
        assert relative_fd_error(params, self.X, self.y) < 1e-5

    def test_relu_matches_finite_differences(self):
        params = random_params([2, 4, 4, 1], gamma=2.0, seed=2, scale=0.5, activation="relu")
        assert relative_fd_error(params, self.X, self.y) < 1e-4

    def test_every_parameter_class_gets_a_gradient(self):
        # a 1x1 output X has no skew part, so use two outputs
        params = random_params([2, 3, 2], seed=3)
        _, grads = mse_grad(params, self.X, np.hstack([self.y, -self.y]))
        assert {name for _, name, _ in grads} == {"X", "Y", "b", "g", "h", "d"}
        assert all(np.any(g != 0) for _, _, g in grads)

    def test_input_gradient_of_linear_network(self):
        params = random_params([3, 4, 5, 2], gamma=3.0, seed=4, activation="identity")
        weights = extract_weights(realize(params))
        product = weights.W[2] @ weights.W[1] @ weights.W[0]
        tape = ad.Tape()
        layers, _ = tape_realize(tape, params)
        x = tape.var(np.zeros((1, 3)))
        out = tape_forward(layers, x, params.gamma, "identity")
        for i in range(2):
            seed = np.zeros((1, 2))
            seed[0, i] = 1.0
            adj = tape.backward(out, seed)
            np.testing.assert_allclose(adj[x.index][0], product[i], atol=1e-12)


class TestAdam:
    def test_first_step_is_signed_lr(self):
        state = AdamState.zeros_like([np.zeros(3)])
        (out,) = state.update([np.zeros(3)], [np.array([2.0, -0.1, 0.0])], lr=0.1)
        np.testing.assert_allclose(out, [-0.1, 0.1, 0.0], atol=1e-7)
        assert state.step == 1


class TestTrain:
    def test_zero_epochs_is_identity(self):
        config = TrainConfig(epochs=0, depth=1, width=4, n_train=20, n_test=10)
        params = tr.init_params(config.widths, seed=config.seed)
        result = fit(config)
        for (_, _, a), (_, _, b) in zip(param_arrays(params), param_arrays(result.params)):
            np.testing.assert_array_equal(a, b)
        assert result.metrics == []

    def test_small_rate_descends(self):
        config = TrainConfig(gamma=2.0, depth=2, width=8, epochs=8, batch_size=60, max_lr=1e-4, n_train=60,
                             n_test=10, final_tightness=False)
        losses = [row["train_mse"] for row in fit(config).metrics]
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))

    def test_certified_every_epoch(self):
        seen = []

        def check(epoch, params, row):
            seen.append(check_certificate(realize(params)).psd)

        fit(TrainConfig(gamma=5.0, depth=3, width=12, epochs=6, max_lr=0.05, final_tightness=False), callback=check)
        assert seen == [True] * 6

    def test_metrics_rows(self):
        result = fit(TrainConfig(depth=1, width=4, epochs=2, n_train=40, n_test=20,
                                 lipest={"restarts": 2, "iters": 5}))
        assert [row["epoch"] for row in result.metrics] == [0, 1]
        assert set(result.metrics[0]) == {"epoch", "lr", "train_mse", "test_mse", "tightness"}
        assert np.isnan(result.metrics[0]["tightness"]) and 0.0 <= result.metrics[-1]["tightness"] <= 1.0

    def test_divergence_reports_epoch(self, monkeypatch):
        real = tr.mse_grad
        calls = []

        def poisoned(params, X, y):
            calls.append(1)
            loss, grads = real(params, X, y)
            return (float("nan") if len(calls) > 6 else loss), grads

        monkeypatch.setattr(tr, "mse_grad", poisoned)
        with pytest.raises(DivergenceError) as info:
            fit(TrainConfig(depth=1, width=4, epochs=5, final_tightness=False))
        assert info.value.epoch == 1

    def test_deterministic(self):
        config = TrainConfig(depth=1, width=4, epochs=3, n_train=50, final_tightness=False)
        a, b = fit(config), fit(config)
        for (_, _, u), (_, _, v) in zip(param_arrays(a.params), param_arrays(b.params)):
            np.testing.assert_array_equal(u, v)

    def test_train_accepts_flat_targets(self):
        params = random_params([1, 4, 1], seed=0)
        X = np.linspace(-1, 1, 20)[:, None]
        result = train(params, X, X[:, 0] ** 2, TrainConfig(epochs=1, final_tightness=False))
        assert len(result.metrics) == 1 and np.isnan(result.metrics[0]["test_mse"])


class TestSquareWaveFits:
    def test_unit_bound_slope_and_error_floor(self):
        result = trained(1.0)
        model = result.model
        grid = np.linspace(-2.0, 2.0, 4001)[:, None]
        out = forward(model, grid)[:, 0]
        assert np.max(np.abs(np.diff(out)) / np.diff(grid[:, 0])) <= 1.0 + 1e-9
        x, y, _, _ = square_wave_data(TrainConfig(seed=0))
        floor = best_lipschitz_fit_mse(x[:, 0], y[:, 0])
        assert floor > 0.0
        assert result.metrics[-1]["train_mse"] >= floor - 1e-6

    def test_large_bound_fits_well(self):
        result = trained(10.0)
        assert result.metrics[-1]["test_mse"] < 0.05
        assert check_certificate(result.model).psd


class TestEstimator:
    def test_fit_predict(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(-1, 1, size=(120, 2))
        y = np.sin(2 * X[:, 0]) + 0.5 * X[:, 1]
        est = LBDNRegressor(gamma=3.0, depth=2, width=16, epochs=40, random_state=1).fit(X, y)
        assert est.predict(X).shape == (120,)
        assert est.score(X, y) > 0.8
        assert est.certificate().psd
        assert len(est.history_) == 40

    def test_multi_output_and_clone(self):
        X = np.linspace(-1, 1, 30)[:, None]
        Y = np.hstack([X, -X])
        est = LBDNRegressor(depth=1, width=4, epochs=2)
        assert clone(est).get_params() == est.get_params()
        assert est.fit(X, Y).predict(X).shape == (30, 2)

    def test_unfitted_and_wrong_width(self):
        with pytest.raises(NotFittedError):
            LBDNRegressor().predict(np.zeros((1, 1)))
        est = LBDNRegressor(depth=1, width=4, epochs=1).fit(np.zeros((5, 2)), np.zeros(5))
        with pytest.raises(ValueError):
            est.predict(np.zeros((2, 3)))
