import numpy as np
import pytest

from dialogsat.models import (
    DecisionTreeRegressor,
    GradientBoostingRegressor,
    RandomForestRegressor,
)


@pytest.fixture
def regression_data():
    rng = np.random.default_rng(17)
    X = rng.normal(size=(150, 4))
    y = 1.5 * X[:, 0] - X[:, 2] ** 2 + 0.2 * rng.normal(size=150)
    return X, y


class TestForest:
    def test_degenerate_forest_equals_tree(self, regression_data):
        X, y = regression_data
        forest = RandomForestRegressor(
            n_trees=1, bootstrap=False, max_features=None,
            max_depth=5, min_samples_leaf=3, min_samples_split=6, random_state=0,
        ).fit(X, y)
        tree = DecisionTreeRegressor(
            max_depth=5, min_samples_leaf=3, min_samples_split=6
        ).fit(X, y)
        assert np.array_equal(forest.predict(X), tree.predict(X))

    def test_prediction_is_mean_of_trees(self, regression_data):
        X, y = regression_data
        forest = RandomForestRegressor(
            n_trees=7, max_depth=4, min_samples_leaf=2, min_samples_split=4, random_state=1
        ).fit(X, y)
        points = X[:10]
        manual = np.mean([t.predict(points) for t in forest.estimators_], axis=0)
        assert np.allclose(forest.predict(points), manual)

    def test_same_seed_identical_forests(self, regression_data):
        X, y = regression_data
        kwargs = dict(n_trees=5, max_depth=4, min_samples_leaf=2,
                      min_samples_split=4, random_state=11)
        f1 = RandomForestRegressor(**kwargs).fit(X, y)
        f2 = RandomForestRegressor(**kwargs).fit(X, y)
        assert np.array_equal(f1.predict(X), f2.predict(X))
        for t1, t2 in zip(f1.estimators_, f2.estimators_):
            assert np.array_equal(t1.threshold_, t2.threshold_)

    def test_different_seed_differs(self, regression_data):
        X, y = regression_data
        f1 = RandomForestRegressor(n_trees=5, random_state=0,
                                   max_depth=4, min_samples_leaf=2, min_samples_split=4).fit(X, y)
        f2 = RandomForestRegressor(n_trees=5, random_state=1,
                                   max_depth=4, min_samples_leaf=2, min_samples_split=4).fit(X, y)
        assert not np.array_equal(f1.predict(X), f2.predict(X))


class TestGradientBoosting:
    def test_zero_stages_predicts_mean(self, regression_data):
        X, y = regression_data
        model = GradientBoostingRegressor(n_stages=0).fit(X, y)
        assert np.allclose(model.predict(X), y.mean())

    def test_training_mse_non_increasing(self, regression_data):
        X, y = regression_data
        model = GradientBoostingRegressor(
            n_stages=40, max_depth=3, min_samples_leaf=2, min_samples_split=4
        ).fit(X, y)
        path = np.array(model.train_mse_path_)
        assert len(path) == 41
        assert np.all(np.diff(path) <= 1e-12)

    def test_mse_non_increasing_on_random_targets(self):
        rng = np.random.default_rng(3)
        for _ in range(3):
            X = rng.normal(size=(60, 3))
            y = rng.normal(size=60)
            model = GradientBoostingRegressor(
                n_stages=15, max_depth=2, min_samples_leaf=1, min_samples_split=2
            ).fit(X, y)
            assert np.all(np.diff(model.train_mse_path_) <= 1e-12)

    def test_boosting_improves_over_base(self, regression_data):
        X, y = regression_data
        model = GradientBoostingRegressor(
            n_stages=50, max_depth=3, min_samples_leaf=2, min_samples_split=4
        ).fit(X, y)
        assert model.train_mse_path_[-1] < 0.5 * model.train_mse_path_[0]

    def test_determinism(self, regression_data):
        X, y = regression_data
        kwargs = dict(n_stages=10, max_depth=3, min_samples_leaf=2, min_samples_split=4)
        m1 = GradientBoostingRegressor(**kwargs).fit(X, y)
        m2 = GradientBoostingRegressor(**kwargs).fit(X, y)
        assert np.array_equal(m1.predict(X), m2.predict(X))
