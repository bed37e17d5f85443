"""The five regressors behind one ``fit``/``predict`` contract."""

from __future__ import annotations

import json

from .base import TrainedModel
from .config import (
    CONFIG_CLASSES,
    MODEL_KINDS,
    GbtConfig,
    KnnConfig,
    MlpConfig,
    ModelConfig,
    RfConfig,
    SvrConfig,
    config_from_dict,
    config_to_dict,
    default_config,
    with_seed,
)
from .forest import ForestModel, fit_forest
from .gbt import GbtModel, fit_gbt, gbt_split_gain, leaf_weight
from .knn import KnnModel, fit_knn
from .mlp import AdamState, MlpModel, fit_mlp, loss_and_grads, mlp_backprop_step
from .svr import SvrModel, fit_svr, rbf_kernel, svr_solve

MODEL_CLASSES = {"knn": KnnModel, "rf": ForestModel, "gbt": GbtModel, "mlp": MlpModel,
                 "svr": SvrModel}


def fit(config: ModelConfig, features, target, seed=None, columns=None,
        n_jobs: int = 1) -> TrainedModel:
    """Fit the model described by ``config``.

    ``seed`` overrides the config's seed when given. ``columns`` names the
    feature columns; predict later rejects any other schema. ``n_jobs`` only
    affects the random forest, whose trees are independent.
    """
    config = with_seed(config, seed)
    if columns is None:
        columns = [f"x{j}" for j in range(len(features[0]))]
    kind = config.kind
    if kind == "knn":
        return fit_knn(config, features, target, columns)
    if kind == "rf":
        return fit_forest(config, features, target, columns, n_jobs=n_jobs)
    if kind == "gbt":
        return fit_gbt(config, features, target, columns)
    if kind == "mlp":
        return fit_mlp(config, features, target, columns)
    if kind == "svr":
        return fit_svr(config, features, target, columns)
    raise ValueError(f"unknown model kind {kind!r}")


def predict(model: TrainedModel, features, columns=None):
    return model.predict(features, columns=columns)


def model_from_dict(d: dict) -> TrainedModel:
    return MODEL_CLASSES[d["kind"]].from_dict(d)


def model_to_json(model: TrainedModel) -> str:
    return json.dumps(model.to_dict())


def model_from_json(text: str) -> TrainedModel:
    return model_from_dict(json.loads(text))


__all__ = [
    "AdamState", "CONFIG_CLASSES", "ForestModel", "GbtConfig", "GbtModel", "KnnConfig",
    "KnnModel", "MODEL_KINDS", "MlpConfig", "MlpModel", "ModelConfig", "RfConfig", "SvrConfig",
    "SvrModel", "TrainedModel", "config_from_dict", "config_to_dict", "default_config", "fit",
    "gbt_split_gain", "leaf_weight", "loss_and_grads", "mlp_backprop_step", "model_from_dict",
    "model_from_json", "model_to_json", "predict", "rbf_kernel", "svr_solve",
]
