"""Tree ensembles: bootstrap random forest and stagewise gradient boosting."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..errors import ConfigError
from .tree import DecisionTreeRegressor


class RandomForestRegressor(BaseEstimator, RegressorMixin):
    """Average of trees fit on bootstrap resamples with per-split feature subsetting.

    Per-tree seeds are spawned from the master seed, so the forest is
    reproducible and independent of any execution schedule.
    """

    def __init__(
        self,
        n_trees=100,
        max_depth=49,
        min_samples_leaf=11,
        min_samples_split=27,
        bootstrap=True,
        max_features="sqrt",
        random_state=0,
    ):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.min_samples_split = min_samples_split
        self.bootstrap = bootstrap
        self.max_features = max_features
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if self.n_trees < 1:
            raise ConfigError(f"n_trees must be >= 1, got {self.n_trees}")
        n, p = X.shape
        self.n_features_in_ = p
        self.estimators_ = []
        for seq in np.random.SeedSequence(self.random_state).spawn(self.n_trees):
            rng = np.random.default_rng(seq)
            idx = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            tree = DecisionTreeRegressor(
                max_depth=self.max_depth,
                min_samples_leaf=self.min_samples_leaf,
                min_samples_split=self.min_samples_split,
                max_features=self.max_features,
                random_state=rng,
            )
            tree.fit(X[idx], y[idx])
            self.estimators_.append(tree)
        gains = np.sum([t.split_gain_totals_ for t in self.estimators_], axis=0)
        total = gains.sum()
        self.feature_importances_ = gains / total if total > 0 else np.zeros(p)
        return self

    def predict(self, X):
        check_is_fitted(self, "estimators_")
        X = check_array(X)
        predictions = np.zeros(X.shape[0])
        for tree in self.estimators_:
            predictions += tree.predict(X)
        return predictions / len(self.estimators_)


class GradientBoostingRegressor(BaseEstimator, RegressorMixin):
    """Stagewise least-squares boosting of depth-constrained regression trees.

    Starts from the target mean and repeatedly fits a tree to the current
    residuals, adding it with shrinkage. Because every leaf predicts the mean
    residual of its samples, each stage can only lower the training MSE;
    train_mse_path_ records the value after every stage.
    """

    def __init__(
        self,
        n_stages=100,
        learning_rate=0.1,
        max_depth=23,
        min_samples_leaf=17,
        min_samples_split=59,
        random_state=0,
    ):
        self.n_stages = n_stages
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.min_samples_split = min_samples_split
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if self.n_stages < 0:
            raise ConfigError(f"n_stages must be >= 0, got {self.n_stages}")
        if not (0.0 < self.learning_rate <= 1.0):
            raise ConfigError(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        self.n_features_in_ = X.shape[1]
        self.base_value_ = float(y.mean())
        current = np.full(y.shape[0], self.base_value_)
        self.estimators_ = []
        mse_path = [float(np.mean((y - current) ** 2))]
        for _ in range(self.n_stages):
            residuals = y - current
            tree = DecisionTreeRegressor(
                max_depth=self.max_depth,
                min_samples_leaf=self.min_samples_leaf,
                min_samples_split=self.min_samples_split,
            )
            tree.fit(X, residuals)
            current = current + self.learning_rate * tree.predict(X)
            self.estimators_.append(tree)
            mse_path.append(float(np.mean((y - current) ** 2)))
        self.train_mse_path_ = tuple(mse_path)
        p = X.shape[1]
        if self.estimators_:
            gains = np.sum([t.split_gain_totals_ for t in self.estimators_], axis=0)
            total = gains.sum()
            self.feature_importances_ = gains / total if total > 0 else np.zeros(p)
        else:
            self.feature_importances_ = np.zeros(p)
        return self

    def predict(self, X):
        check_is_fitted(self, "base_value_")
        X = check_array(X)
        predictions = np.full(X.shape[0], self.base_value_)
        for tree in self.estimators_:
            predictions += self.learning_rate * tree.predict(X)
        return predictions
