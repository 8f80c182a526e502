import numpy as np
import pytest

from dialogsat.errors import ConfigError, SchemaMismatchError
from dialogsat.features import FeatureField, FeatureSchema, default_schema
from dialogsat.models import (
    DEFAULT_HYPERPARAMETERS,
    MODEL_KINDS,
    DecisionTreeRegressor,
    ModelSpec,
    clip_ratings,
    feature_importance,
    train_model,
)
from dialogsat.pipeline import load_pipeline, save_pipeline, train_from_corpus
from dialogsat.synth import GeneratorConfig, generate_corpus


def _toy_schema(p):
    return FeatureSchema(tuple(FeatureField(f"f{i}", "cohesion") for i in range(p)))


def _toy_data(n=80, p=3, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    y = np.clip(3.0 + X[:, 0], 1.0, 5.0)
    return X, y


class TestModelSpec:
    def test_published_defaults(self):
        assert DEFAULT_HYPERPARAMETERS["lasso"] == {"alpha": 0.001}
        assert DEFAULT_HYPERPARAMETERS["tree"] == {
            "max_depth": 33, "min_samples_leaf": 31, "min_samples_split": 23,
        }
        assert DEFAULT_HYPERPARAMETERS["forest"] == {
            "max_depth": 49, "min_samples_leaf": 11, "min_samples_split": 27,
        }
        assert DEFAULT_HYPERPARAMETERS["gbrt"] == {
            "max_depth": 23, "min_samples_leaf": 17, "min_samples_split": 59,
        }
        assert DEFAULT_HYPERPARAMETERS["svr"] == {"C": 2.0, "gamma": 0.024}
        assert DEFAULT_HYPERPARAMETERS["mlp"] == {
            "hidden_layers": 3, "hidden_size": 100, "batch_size": 128,
        }

    def test_defaults_reach_estimators(self):
        estimator = ModelSpec("gbrt").build()
        assert estimator.max_depth == 23
        assert estimator.min_samples_leaf == 17
        assert estimator.min_samples_split == 59
        mlp = ModelSpec("mlp").build()
        assert mlp.hidden_layers == 3 and mlp.hidden_size == 100 and mlp.batch_size == 128

    def test_unknown_kind(self):
        with pytest.raises(ConfigError, match="unknown model kind"):
            ModelSpec("boosted_ferns")

    def test_unknown_hyperparameter(self):
        with pytest.raises(ConfigError, match="unknown hyperparameters"):
            ModelSpec("lasso", {"depth": 3})

    def test_seed_feeds_random_state(self):
        assert ModelSpec("forest", seed=42).build().random_state == 42
        assert ModelSpec("mlp", seed=7).build().random_state == 7

    def test_override_wins(self):
        assert ModelSpec("gbrt", {"max_depth": 3}).build().max_depth == 3


class TestPredictContract:
    def test_clip_bounds(self):
        assert clip_ratings(np.array([5.7]))[0] == 5.0
        assert clip_ratings(np.array([0.2]))[0] == 1.0

    def test_predictions_always_in_range(self):
        X, y = _toy_data()
        schema = _toy_schema(X.shape[1])
        for kind in ("lasso", "tree", "gbrt"):
            spec = ModelSpec(kind, {"min_samples_leaf": 2, "min_samples_split": 4}
                             if kind != "lasso" else {})
            model = train_model(X, y * 2, spec, schema)
            pred = model.predict(X, schema)
            assert np.all(pred >= 1.0) and np.all(pred <= 5.0)

    def test_schema_fingerprint_guard(self):
        X, y = _toy_data()
        schema = _toy_schema(X.shape[1])
        model = train_model(X, y, ModelSpec("lasso"), schema)
        other = FeatureSchema(tuple(FeatureField(f"g{i}", "lengths") for i in range(X.shape[1])))
        with pytest.raises(SchemaMismatchError):
            model.predict(X, other)


class TestImportance:
    def test_single_leaf_tree_all_zero(self):
        X, y = _toy_data()
        schema = _toy_schema(X.shape[1])
        spec = ModelSpec("tree", {"min_samples_leaf": len(y)})
        model = train_model(X, y, spec, schema)
        report = feature_importance(model, X, y)
        assert all(score == 0.0 for _, score in report.entries)
        assert report.method == "impurity"

    def test_impurity_importances_sum_to_one(self):
        X, y = _toy_data()
        schema = _toy_schema(X.shape[1])
        spec = ModelSpec("tree", {"max_depth": 4, "min_samples_leaf": 2, "min_samples_split": 4})
        model = train_model(X, y, spec, schema)
        report = feature_importance(model, X, y)
        assert sum(score for _, score in report.entries) == pytest.approx(1.0)

    def test_lasso_uses_coefficients(self):
        X, y = _toy_data()
        schema = _toy_schema(X.shape[1])
        model = train_model(X, y, ModelSpec("lasso"), schema)
        report = feature_importance(model, X, y)
        assert report.method == "coefficient_magnitude"
        assert report.entries[0][0] == "f0"

    def test_permutation_importance_for_svr(self):
        X, y = _toy_data(n=50)
        schema = _toy_schema(X.shape[1])
        model = train_model(X, y, ModelSpec("svr", {"gamma": 0.3}), schema)
        report = feature_importance(model, X, y, seed=0)
        assert report.method == "permutation"
        assert all(score >= 0.0 for _, score in report.entries)
        assert report.entries[0][0] == "f0"

    def test_permutation_deterministic(self):
        X, y = _toy_data(n=40)
        schema = _toy_schema(X.shape[1])
        model = train_model(X, y, ModelSpec("svr", {"gamma": 0.3}), schema)
        r1 = feature_importance(model, X, y, seed=3)
        r2 = feature_importance(model, X, y, seed=3)
        assert r1 == r2


class TestArtifact:
    def test_round_trip_bit_identical(self, tmp_path):
        corpus, _ = generate_corpus(GeneratorConfig(n_dialogues=60, seed=5))
        spec = ModelSpec("forest", {"n_trees": 4, "max_depth": 4,
                                    "min_samples_leaf": 2, "min_samples_split": 4}, seed=2)
        pipeline, _ = train_from_corpus(corpus, spec, split_seed=1)
        path = tmp_path / "model.pkl"
        save_pipeline(pipeline, path)
        loaded = load_pipeline(path)
        table = pipeline.popularity_table
        from dialogsat.features import featurize_corpus, stack
        X, _ = stack(featurize_corpus(corpus, table, pipeline.schema))
        before = pipeline.model.predict(X, pipeline.schema)
        after = loaded.model.predict(X, loaded.schema)
        assert np.array_equal(before, after)

    def test_bad_artifact_rejected(self, tmp_path):
        path = tmp_path / "junk.pkl"
        path.write_bytes(b"definitely not a pickle")
        from dialogsat.errors import DataError
        with pytest.raises(DataError):
            load_pipeline(path)

    def test_missing_artifact(self, tmp_path):
        from dialogsat.errors import DataError
        with pytest.raises(DataError, match="not found"):
            load_pipeline(tmp_path / "absent.pkl")
