"""Target and feature preprocessing: IQR outliers, skewness, sqrt transform, z-scores."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMatrix, NegativeTarget, TooFewValues, ZeroVariance

NEGATIVE_CLAMP = 1e-9
IQR_FACTOR = 1.5


@dataclass(frozen=True)
class Quartiles:
    q1: float
    q3: float

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


@dataclass(frozen=True)
class OutlierBounds:
    lower: float
    upper: float

    @classmethod
    def from_quartiles(cls, q: Quartiles) -> "OutlierBounds":
        return cls(q.q1 - IQR_FACTOR * q.iqr, q.q3 + IQR_FACTOR * q.iqr)


@dataclass(frozen=True)
class SkewnessStats:
    n: int
    mean: float
    std: float
    skewness: float


def _quantile_sorted(xs: np.ndarray, p: float) -> float:
    pos = (len(xs) - 1) * p
    k = int(np.floor(pos))
    gamma = pos - k
    if k + 1 >= len(xs):
        return float(xs[-1])
    return float(xs[k] + gamma * (xs[k + 1] - xs[k]))


def quartiles(values) -> Quartiles:
    """First and third quartiles by linear interpolation between order statistics."""
    xs = np.sort(np.asarray(values, dtype=float))
    if len(xs) < 2:
        raise TooFewValues("quartiles need at least 2 values")
    return Quartiles(_quantile_sorted(xs, 0.25), _quantile_sorted(xs, 0.75))


def outlier_bounds(values) -> OutlierBounds:
    return OutlierBounds.from_quartiles(quartiles(values))


def detect_outliers(values, bounds: OutlierBounds) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return (values < bounds.lower) | (values > bounds.upper)


def skewness(values) -> SkewnessStats:
    """Adjusted Fisher-Pearson skewness, n/((n-1)(n-2)) * sum(((x - mean)/s)^3).

    ``s`` is the sample standard deviation (n - 1 denominator).
    """
    x = np.asarray(values, dtype=float)
    n = len(x)
    if n < 3:
        raise TooFewValues("skewness needs at least 3 values")
    mean = float(x.mean())
    std = float(x.std(ddof=1))
    if std == 0:
        raise ZeroVariance("skewness undefined for a constant sample")
    z = (x - mean) / std
    g = n / ((n - 1) * (n - 2)) * float(np.sum(z**3))
    return SkewnessStats(n, mean, std, g)


def sqrt_transform(target) -> np.ndarray:
    y = np.asarray(target, dtype=float)
    if np.any(y < -NEGATIVE_CLAMP):
        raise NegativeTarget(f"target has values below {-NEGATIVE_CLAMP}: min={y.min()}")
    return np.sqrt(np.clip(y, 0.0, None))


def inverse_transform(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise NegativeTarget("inverse transform expects non-negative values")
    return t * t


@dataclass(frozen=True)
class StandardizationParams:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, features) -> np.ndarray:
        return zscore_apply(self, features)


def zscore_fit(train_features) -> StandardizationParams:
    X = np.asarray(train_features, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise EmptyMatrix("cannot fit standardization on an empty matrix")
    std = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.zeros(X.shape[1])
    return StandardizationParams(X.mean(axis=0), std)


def zscore_apply(params: StandardizationParams, features) -> np.ndarray:
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise EmptyMatrix("features must be a 2-D matrix")
    safe = np.where(params.std > 0, params.std, 1.0)
    out = (X - params.mean) / safe
    out[:, params.std == 0] = 0.0
    return out


@dataclass(frozen=True)
class TransformState:
    """Everything fitted on the training rows that prediction needs to replay."""

    columns: tuple[str, ...]
    standardization: StandardizationParams
    outlier_bounds: OutlierBounds | None
    target_transform: bool = True
    n_outliers_dropped: int = 0

    def transform_features(self, X) -> np.ndarray:
        return zscore_apply(self.standardization, X)

    def forward_target(self, y) -> np.ndarray:
        return sqrt_transform(y) if self.target_transform else np.asarray(y, dtype=float)

    def inverse_target(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if not self.target_transform:
            return t
        # a regressor may undershoot zero in sqrt space; squaring would flip the sign
        return inverse_transform(np.clip(t, 0.0, None))

    def to_dict(self) -> dict:
        return {
            "target_transform": "sqrt" if self.target_transform else "identity",
            "standardization": {
                c: {"mean": float(m), "std": float(s)}
                for c, m, s in zip(self.columns, self.standardization.mean, self.standardization.std)
            },
            "columns": list(self.columns),
            "outlier_bounds": None if self.outlier_bounds is None else {
                "lower": self.outlier_bounds.lower, "upper": self.outlier_bounds.upper},
            "n_outliers_dropped": self.n_outliers_dropped,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TransformState":
        cols = tuple(d["columns"])
        std = d["standardization"]
        b = d.get("outlier_bounds")
        return cls(
            columns=cols,
            standardization=StandardizationParams(
                np.array([std[c]["mean"] for c in cols]), np.array([std[c]["std"] for c in cols])),
            outlier_bounds=None if b is None else OutlierBounds(b["lower"], b["upper"]),
            target_transform=d["target_transform"] == "sqrt",
            n_outliers_dropped=int(d.get("n_outliers_dropped", 0)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TransformState":
        return cls.from_dict(json.loads(text))


def fit_transform_state(features, target, columns, drop_outliers: bool = True,
                        target_transform: bool = True):
    """Fit preprocessing on training rows.

    Outlier bounds come from the target with zeros excluded; nonzero rows outside
    them are dropped. Zeros (night) always stay. Standardization is fitted on the
    rows that survive.

    Returns:
        (state, keep_mask) where ``keep_mask`` selects the rows to train on.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(target, dtype=float)
    nonzero = y != 0
    keep = np.ones(len(y), dtype=bool)
    bounds = None
    if nonzero.sum() >= 2:
        bounds = outlier_bounds(y[nonzero])
        if drop_outliers:
            keep = ~(nonzero & detect_outliers(y, bounds))
    state = TransformState(
        columns=tuple(columns),
        standardization=zscore_fit(X[keep]),
        outlier_bounds=bounds,
        target_transform=target_transform,
        n_outliers_dropped=int((~keep).sum()),
    )
    return state, keep


def skewness_report(target) -> dict:
    """The three skewness figures of the target-transformation analysis."""
    y = np.asarray(target, dtype=float)
    nz = y[y != 0]
    return {
        "raw": skewness(y).skewness,
        "zero_excluded": skewness(nz).skewness,
        "transformed": skewness(sqrt_transform(nz)).skewness,
        "n_raw": int(len(y)),
        "n_zero_excluded": int(len(nz)),
    }
