"""A scikit-learn regressor backed by a Lipschitz-bounded deep network."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .certify import check_certificate
from .sandwich import forward, init_params, realize
from .train import TrainConfig, train


class LBDNRegressor(RegressorMixin, BaseEstimator):
    """Least-squares regression with a certified Lipschitz bound ``gamma``.

    The fitted function satisfies ``||f(x1) - f(x2)|| <= gamma ||x1 - x2||``
    for every pair of inputs, whatever the data or the optimizer do.

    Parameters
    ----------
    gamma : float
        Prescribed Lipschitz bound.
    depth, width : int
        Number and width of hidden sandwich layers.
    epochs, batch_size, max_lr, warmup_frac :
        Adam with a triangular learning-rate schedule.
    activation : {"relu", "tanh", "identity"}
    random_state : int
        Seeds both the initialization and the minibatch order.

    Attributes
    ----------
    params_ : DirectParams
    model_ : RealizedModel
    history_ : list of dict
        Per-epoch ``epoch, lr, train_mse``.
    """

    def __init__(self, gamma=1.0, depth=2, width=32, epochs=100, batch_size=50, max_lr=0.01,
                 warmup_frac=0.5, activation="relu", random_state=0):
        self.gamma = gamma
        self.depth = depth
        self.width = width
        self.epochs = epochs
        self.batch_size = batch_size
        self.max_lr = max_lr
        self.warmup_frac = warmup_frac
        self.activation = activation
        self.random_state = random_state

    def _config(self):
        return TrainConfig(
            gamma=float(self.gamma), depth=int(self.depth), width=int(self.width), epochs=int(self.epochs),
            batch_size=int(self.batch_size), max_lr=float(self.max_lr), seed=int(self.random_state),
            warmup_frac=float(self.warmup_frac), activation=self.activation, final_tightness=False,
        )

    def fit(self, X, y):
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True, dtype=np.float64)
        self._y_1d = y.ndim == 1
        Y = y.reshape(len(y), -1)
        config = self._config()
        widths = [X.shape[1]] + [config.width] * config.depth + [Y.shape[1]]
        params = init_params(widths, config.gamma, seed=config.seed, activation=config.activation)
        result = train(params, X, Y, config)
        self.params_ = result.params
        self.model_ = realize(result.params)
        self.history_ = [{k: row[k] for k in ("epoch", "lr", "train_mse")} for row in result.metrics]
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        out = forward(self.model_, X)
        return out[:, 0] if self._y_1d else out

    def certificate(self):
        """Independent LMI check of the fitted network."""
        check_is_fitted(self, "model_")
        return check_certificate(self.model_)
