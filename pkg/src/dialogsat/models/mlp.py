"""Feed-forward rectified-linear regressor trained with mini-batch SGD + momentum.

Forward/backward passes live in module-level functions so tests can check the
analytic gradients against finite differences on the exact same code path.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..errors import ConfigError


class DivergenceError(RuntimeError):
    """Raised when training loss blows up; lower the learning rate."""


def init_params(
    rng: np.random.Generator, n_inputs: int, hidden_layers: int, hidden_size: int
) -> list[tuple[np.ndarray, np.ndarray]]:
    """He-style initialization: weights scaled by sqrt(2 / fan_in), zero biases."""
    sizes = [n_inputs] + [hidden_size] * hidden_layers + [1]
    params = []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        weight = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        params.append((weight, np.zeros(fan_out)))
    return params


def forward(params: list[tuple[np.ndarray, np.ndarray]], X: np.ndarray) -> np.ndarray:
    h = X
    last = len(params) - 1
    for layer, (weight, bias) in enumerate(params):
        z = h @ weight + bias
        h = np.maximum(z, 0.0) if layer < last else z
    return h[:, 0]


def loss_and_gradients(
    params: list[tuple[np.ndarray, np.ndarray]], X: np.ndarray, y: np.ndarray
) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
    """Half mean squared error and its gradient w.r.t. every weight and bias."""
    last = len(params) - 1
    h = X
    inputs = []       # layer inputs
    pre_acts = []     # pre-activation of hidden layers
    for layer, (weight, bias) in enumerate(params):
        inputs.append(h)
        z = h @ weight + bias
        if layer < last:
            pre_acts.append(z)
            h = np.maximum(z, 0.0)
        else:
            h = z
    pred = h[:, 0]
    m = y.shape[0]
    diff = pred - y
    loss = 0.5 * float(diff @ diff) / m

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(params)
    delta = (diff / m)[:, None]  # dL/dz at the output layer
    for layer in range(last, -1, -1):
        weight, _ = params[layer]
        grads[layer] = (inputs[layer].T @ delta, delta.sum(axis=0))
        if layer > 0:
            delta = (delta @ weight.T) * (pre_acts[layer - 1] > 0.0)
    return loss, grads


class MLPRegressor(BaseEstimator, RegressorMixin):
    """hidden_layers x hidden_size rectified-linear net with a linear output.

    Deterministic for a given random_state: initialization and per-epoch
    shuffling both draw from the same seeded generator.
    """

    def __init__(
        self,
        hidden_layers=3,
        hidden_size=100,
        batch_size=128,
        learning_rate=0.01,
        momentum=0.9,
        epochs=200,
        random_state=0,
    ):
        self.hidden_layers = hidden_layers
        self.hidden_size = hidden_size
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.epochs = epochs
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if self.hidden_layers < 1 or self.hidden_size < 1 or self.batch_size < 1:
            raise ConfigError("hidden_layers, hidden_size and batch_size must be >= 1")
        if self.learning_rate < 0 or not (0.0 <= self.momentum < 1.0):
            raise ConfigError("require learning_rate >= 0 and momentum in [0, 1)")
        n = X.shape[0]
        self.n_features_in_ = X.shape[1]
        rng = np.random.default_rng(self.random_state)
        params = init_params(rng, X.shape[1], self.hidden_layers, self.hidden_size)
        velocity = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]

        initial_loss, _ = loss_and_gradients(params, X, y)
        loss_path = [initial_loss]
        diverged_streak = 0
        for _ in range(self.epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                batch = order[start : start + self.batch_size]
                _, grads = loss_and_gradients(params, X[batch], y[batch])
                for layer, ((gw, gb), (vw, vb)) in enumerate(zip(grads, velocity)):
                    vw = self.momentum * vw - self.learning_rate * gw
                    vb = self.momentum * vb - self.learning_rate * gb
                    weight, bias = params[layer]
                    params[layer] = (weight + vw, bias + vb)
                    velocity[layer] = (vw, vb)
            epoch_loss, _ = loss_and_gradients(params, X, y)
            loss_path.append(epoch_loss)
            if not np.isfinite(epoch_loss) or epoch_loss > 10.0 * max(initial_loss, 1e-12):
                diverged_streak += 1
                if diverged_streak >= 5:
                    raise DivergenceError(
                        "training loss exceeded 10x its initial value for 5 consecutive "
                        "epochs; lower the learning rate"
                    )
            else:
                diverged_streak = 0

        self.coefs_ = [w for w, _ in params]
        self.intercepts_ = [b for _, b in params]
        self.loss_path_ = tuple(loss_path)
        return self

    def _params(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return list(zip(self.coefs_, self.intercepts_))

    def predict(self, X):
        check_is_fitted(self, "coefs_")
        X = check_array(X)
        return forward(self._params(), X)
