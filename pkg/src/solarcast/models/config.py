"""Hyperparameter sets for the five regressors and their per-horizon defaults."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Union

from ..dataio import TimeFrame

MODEL_KINDS = ("knn", "rf", "gbt", "mlp", "svr")


@dataclass(frozen=True)
class KnnConfig:
    n_neighbours: int = 3
    p: float = 1.0
    weights: str = "uniform"
    kind = "knn"

    def __post_init__(self):
        if self.n_neighbours < 1:
            raise ValueError("n_neighbours must be >= 1")
        if self.p < 1:
            raise ValueError("Minkowski p must be >= 1")
        if self.weights not in ("uniform", "distance"):
            raise ValueError("weights must be 'uniform' or 'distance'")


@dataclass(frozen=True)
class RfConfig:
    n_estimators: int = 300
    max_features: str = "log2"
    max_depth: Optional[int] = None
    seed: int = 42
    kind = "rf"

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.max_features not in ("log2", "sqrt", "all"):
            raise ValueError("max_features must be log2, sqrt or all")


@dataclass(frozen=True)
class GbtConfig:
    n_estimators: int = 300
    learning_rate: float = 0.1
    subsample: float = 0.6
    max_depth: int = 5
    gamma: float = 0.1
    reg_lambda: float = 1.0
    min_child_weight: float = 1.0
    seed: int = 42
    kind = "gbt"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if not 0 < self.subsample <= 1:
            raise ValueError("subsample must be in (0, 1]")


@dataclass(frozen=True)
class MlpConfig:
    hidden_layer_sizes: tuple = (80, 80)
    max_iter: int = 200
    activation: str = "relu"
    learning_rate_init: float = 0.001
    power_t: float = 0.5
    batch_size: Optional[int] = None  # None = min(200, n)
    alpha: float = 0.0001
    beta_1: float = 0.9
    beta_2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 42
    kind = "mlp"

    def __post_init__(self):
        object.__setattr__(self, "hidden_layer_sizes", tuple(int(s) for s in self.hidden_layer_sizes))
        if any(s < 1 for s in self.hidden_layer_sizes):
            raise ValueError("hidden layer sizes must be >= 1")
        if self.activation != "relu":
            raise ValueError("only relu activation is supported")


@dataclass(frozen=True)
class SvrConfig:
    gamma: float = 0.8
    c: float = 4.0
    epsilon: float = 0.1
    tol: float = 1e-3
    max_passes: int = 1000
    kind = "svr"

    def __post_init__(self):
        if self.gamma <= 0 or self.c <= 0 or self.epsilon < 0:
            raise ValueError("SVR needs gamma > 0, c > 0, epsilon >= 0")


ModelConfig = Union[KnnConfig, RfConfig, GbtConfig, MlpConfig, SvrConfig]

CONFIG_CLASSES = {"knn": KnnConfig, "rf": RfConfig, "gbt": GbtConfig, "mlp": MlpConfig,
                  "svr": SvrConfig}

_DEFAULTS = {
    "knn": {f: {} for f in ("30min", "1h", "4h")},
    "rf": {"30min": {"n_estimators": 350}, "1h": {"n_estimators": 300},
           "4h": {"n_estimators": 200}},
    "gbt": {"30min": {"n_estimators": 450, "max_depth": 10},
            "1h": {"n_estimators": 300, "max_depth": 5},
            "4h": {"n_estimators": 250, "max_depth": 5}},
    "mlp": {"30min": {"hidden_layer_sizes": (80, 80, 80, 80)},
            "1h": {"hidden_layer_sizes": (80, 80)}, "4h": {"hidden_layer_sizes": (80, 80)}},
    "svr": {"30min": {"gamma": 0.8, "c": 4.0}, "1h": {"gamma": 0.8, "c": 4.0},
            "4h": {"gamma": 0.6, "c": 5.0}},
}


def default_config(kind: str, frame=TimeFrame.ONE_HOUR, **overrides) -> ModelConfig:
    """Tuned hyperparameters for ``kind`` at the given horizon, plus overrides."""
    if kind not in CONFIG_CLASSES:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    frame = TimeFrame.parse(frame)
    params = dict(_DEFAULTS[kind][frame.value])
    params.update(overrides)
    return CONFIG_CLASSES[kind](**params)


def config_to_dict(config) -> dict:
    d = dataclasses.asdict(config)
    if "hidden_layer_sizes" in d:
        d["hidden_layer_sizes"] = list(d["hidden_layer_sizes"])
    return {"kind": config.kind, **d}


def config_from_dict(d: dict) -> ModelConfig:
    d = dict(d)
    kind = d.pop("kind")
    return CONFIG_CLASSES[kind](**d)


def with_seed(config, seed):
    if seed is None or not hasattr(config, "seed"):
        return config
    return dataclasses.replace(config, seed=int(seed))
