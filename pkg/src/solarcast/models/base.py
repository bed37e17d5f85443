from __future__ import annotations

import base64

import numpy as np

from ..errors import ModelSchemaMismatch, NonFiniteInput
from .config import config_from_dict, config_to_dict


def pack_array(a, dtype="<f8") -> dict:
    """Array as a JSON-safe dict of dtype, shape and base64 little-endian bytes."""
    a = np.ascontiguousarray(a, dtype=dtype)
    return {"dtype": dtype, "shape": list(a.shape),
            "data": base64.b64encode(a.tobytes()).decode("ascii")}


def unpack_array(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype=d["dtype"]).reshape(d["shape"]).astype(
        np.dtype(d["dtype"]).newbyteorder("="))


def check_xy(X, y=None):
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise NonFiniteInput("features contain NaN or inf")
    if y is None:
        return X
    y = np.ascontiguousarray(y, dtype=float).ravel()
    if len(y) != len(X):
        raise ValueError(f"{len(X)} feature rows but {len(y)} targets")
    if len(y) < 2:
        raise ValueError("need at least 2 training rows")
    if not np.isfinite(y).all():
        raise NonFiniteInput("target contains NaN or inf")
    return X, y


class TrainedModel:
    """Fitted regressor with a column schema frozen at fit time.

    Subclasses implement ``_predict`` and the ``_params``/``_from_params`` pair
    used for JSON round-trips.
    """

    kind = "base"

    def __init__(self, config, columns, diagnostics=None):
        self.config = config
        self.columns = list(columns)
        self.diagnostics = diagnostics or {}

    @property
    def n_features(self) -> int:
        return len(self.columns)

    def predict(self, X, columns=None) -> np.ndarray:
        if columns is not None and list(columns) != self.columns:
            raise ModelSchemaMismatch(
                f"model was fitted on {self.columns}, got {list(columns)}")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ModelSchemaMismatch(
                f"model expects {self.n_features} feature columns, got shape {X.shape}")
        if not np.isfinite(X).all():
            raise NonFiniteInput("features contain NaN or inf")
        return self._predict(np.ascontiguousarray(X))

    def _predict(self, X):
        raise NotImplementedError

    def _params(self) -> dict:
        raise NotImplementedError

    @classmethod
    def _from_params(cls, config, columns, params, diagnostics):
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "config": config_to_dict(self.config),
            "columns": self.columns,
            "params": self._params(),
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        return cls._from_params(config_from_dict(d["config"]), d["columns"], d["params"],
                                d.get("diagnostics", {}))
