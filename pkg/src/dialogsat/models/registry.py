"""Model catalogue: specs with defaults, the trained-model wrapper, importances.

The six kinds share one train/predict surface. Predictions are clipped to the
1-5 rating scale at predict time only, never during training, and every
trained model refuses feature matrices whose schema fingerprint differs from
the one it was trained on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from sklearn.utils.validation import check_array

from ..corpus import RATING_MAX, RATING_MIN
from ..errors import ConfigError, SchemaMismatchError
from ..features import FeatureSchema, FeatureStandardizer
from .ensemble import GradientBoostingRegressor, RandomForestRegressor
from .linear import LassoRegressor
from .mlp import MLPRegressor
from .svr import SupportVectorRegressor
from .tree import DecisionTreeRegressor

MODEL_KINDS = ("lasso", "tree", "forest", "gbrt", "svr", "mlp")

_FACTORIES = {
    "lasso": LassoRegressor,
    "tree": DecisionTreeRegressor,
    "forest": RandomForestRegressor,
    "gbrt": GradientBoostingRegressor,
    "svr": SupportVectorRegressor,
    "mlp": MLPRegressor,
}

# Published tuning for each model; everything else keeps the estimator default.
DEFAULT_HYPERPARAMETERS: dict[str, dict[str, object]] = {
    "lasso": {"alpha": 0.001},
    "tree": {"max_depth": 33, "min_samples_leaf": 31, "min_samples_split": 23},
    "forest": {"max_depth": 49, "min_samples_leaf": 11, "min_samples_split": 27},
    "gbrt": {"max_depth": 23, "min_samples_leaf": 17, "min_samples_split": 59},
    "svr": {"C": 2.0, "gamma": 0.024},
    "mlp": {"hidden_layers": 3, "hidden_size": 100, "batch_size": 128},
}

IMPORTANCE_METHODS = {
    "lasso": "coefficient_magnitude",
    "tree": "impurity",
    "forest": "impurity",
    "gbrt": "impurity",
    "svr": "permutation",
    "mlp": "permutation",
}


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    hyperparams: Mapping[str, object] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}; choose from {MODEL_KINDS}")
        object.__setattr__(self, "hyperparams", dict(self.hyperparams))
        allowed = set(_FACTORIES[self.kind]().get_params())
        unknown = set(self.hyperparams) - allowed
        if unknown:
            raise ConfigError(
                f"unknown hyperparameters for {self.kind}: {sorted(unknown)}; "
                f"allowed: {sorted(allowed)}"
            )

    def resolved_hyperparams(self) -> dict[str, object]:
        """Defaults overlaid with explicit overrides; what training actually uses."""
        params = dict(DEFAULT_HYPERPARAMETERS[self.kind])
        params.update(self.hyperparams)
        probe = _FACTORIES[self.kind]()
        if "random_state" in probe.get_params() and "random_state" not in params:
            params["random_state"] = self.seed
        return params

    def build(self):
        return _FACTORIES[self.kind](**self.resolved_hyperparams())


def clip_ratings(values: np.ndarray) -> np.ndarray:
    return np.clip(values, float(RATING_MIN), float(RATING_MAX))


@dataclass
class SatisfactionModel:
    """A fitted estimator bound to the feature schema it was trained on."""

    spec: ModelSpec
    estimator: object
    schema: FeatureSchema
    standardizer: FeatureStandardizer | None = None

    @property
    def kind(self) -> str:
        return self.spec.kind

    @property
    def schema_fingerprint(self) -> str:
        return self.schema.fingerprint()

    def predict(self, X, schema: FeatureSchema) -> np.ndarray:
        """Clipped 1-5 predictions; rejects vectors from a different schema."""
        if schema.fingerprint() != self.schema_fingerprint:
            raise SchemaMismatchError(
                "feature schema fingerprint does not match the model's training schema"
            )
        X = check_array(X)
        if self.standardizer is not None:
            X = self.standardizer.transform(X)
        return clip_ratings(np.asarray(self.estimator.predict(X), dtype=np.float64))


def train_model(
    X: np.ndarray,
    y: np.ndarray,
    spec: ModelSpec,
    schema: FeatureSchema,
    standardize: bool = True,
) -> SatisfactionModel:
    """Fit one model kind on a feature matrix aligned to schema."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    standardizer = None
    if standardize:
        standardizer = FeatureStandardizer(binary_mask=schema.binary_mask).fit(X)
        X = standardizer.transform(X)
    estimator = spec.build()
    estimator.fit(X, y)
    return SatisfactionModel(
        spec=spec, estimator=estimator, schema=schema, standardizer=standardizer
    )


@dataclass(frozen=True)
class ImportanceReport:
    entries: tuple[tuple[str, float], ...]  # (feature_name, score), descending
    method: str

    def top(self, k: int) -> tuple[tuple[str, float], ...]:
        return self.entries[:k]


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    denom = np.sqrt((da @ da) * (db @ db))
    if denom == 0:
        return 0.0
    return float((da @ db) / denom)


def feature_importance(
    model: SatisfactionModel,
    X_val: np.ndarray,
    y_val: np.ndarray,
    n_shuffles: int = 5,
    seed: int = 0,
) -> ImportanceReport:
    """Rank features: impurity for trees, |coefficient| for lasso, permutation otherwise.

    Permutation importance is the mean drop in Pearson r over n_shuffles seeded
    column shuffles, floored at 0 so scores stay non-negative.
    """
    names = model.schema.names
    method = IMPORTANCE_METHODS[model.kind]
    if method == "impurity":
        scores = np.asarray(model.estimator.feature_importances_, dtype=np.float64)
    elif method == "coefficient_magnitude":
        scores = np.abs(model.estimator.coef_)
    else:
        X_val = np.asarray(X_val, dtype=np.float64)
        y_val = np.asarray(y_val, dtype=np.float64)
        rng = np.random.default_rng(seed)
        base = _pearson(model.predict(X_val, model.schema), y_val)
        scores = np.zeros(len(names))
        for col in range(len(names)):
            drops = []
            for _ in range(n_shuffles):
                shuffled = X_val.copy()
                shuffled[:, col] = shuffled[rng.permutation(X_val.shape[0]), col]
                drops.append(base - _pearson(model.predict(shuffled, model.schema), y_val))
            scores[col] = max(0.0, float(np.mean(drops)))
    order = np.argsort(-scores, kind="stable")
    entries = tuple((names[i], float(scores[i])) for i in order)
    return ImportanceReport(entries=entries, method=method)
