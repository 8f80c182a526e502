"""Six regression models behind one spec/train/predict surface."""

from .ensemble import GradientBoostingRegressor, RandomForestRegressor
from .linear import LassoRegressor
from .mlp import DivergenceError, MLPRegressor
from .registry import (
    DEFAULT_HYPERPARAMETERS,
    MODEL_KINDS,
    ImportanceReport,
    ModelSpec,
    SatisfactionModel,
    clip_ratings,
    feature_importance,
    train_model,
)
from .svr import SupportVectorRegressor
from .tree import DecisionTreeRegressor

__all__ = [
    "DEFAULT_HYPERPARAMETERS",
    "MODEL_KINDS",
    "DecisionTreeRegressor",
    "DivergenceError",
    "GradientBoostingRegressor",
    "ImportanceReport",
    "LassoRegressor",
    "MLPRegressor",
    "ModelSpec",
    "RandomForestRegressor",
    "SatisfactionModel",
    "SupportVectorRegressor",
    "clip_ratings",
    "feature_importance",
    "train_model",
]
