"""Self-contained random forest and MLP baselines."""

from ._backend import BACKEND
from .forest import (
    ForestConfig,
    ForestModel,
    Tree,
    fit_forest,
    forest_to_json,
    predict_forest,
    resolve_features_per_split,
)
from .mlp import (
    MlpConfig,
    MlpModel,
    fit_mlp,
    loss_and_gradient,
    mlp_to_json,
    predict_mlp,
)

__all__ = [
    "BACKEND",
    "ForestConfig",
    "ForestModel",
    "Tree",
    "fit_forest",
    "forest_to_json",
    "predict_forest",
    "resolve_features_per_split",
    "MlpConfig",
    "MlpModel",
    "fit_mlp",
    "loss_and_gradient",
    "mlp_to_json",
    "predict_mlp",
]
