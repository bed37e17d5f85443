"""Derived features and the two feature-analysis tools."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .dataio import AlignedFrame
from .errors import ColumnMismatch, TooFewRows

logger = logging.getLogger(__name__)

MAX_PRIORS = 6
REDUCED_BASE = ("ghi", "temperature", "relative_humidity", "month", "hour")
PRESETS = ("full", "reduced")


@dataclass
class FeatureMatrix:
    timestamps: np.ndarray
    values: np.ndarray
    target: np.ndarray
    columns: list[str]
    n_priors: int = 0

    def __len__(self):
        return len(self.timestamps)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def select(self, names) -> "FeatureMatrix":
        idx = [self.columns.index(n) for n in names]
        return FeatureMatrix(self.timestamps, self.values[:, idx], self.target, list(names),
                             self.n_priors)

    def take(self, rows) -> "FeatureMatrix":
        return FeatureMatrix(self.timestamps[rows], self.values[rows], self.target[rows],
                             list(self.columns), self.n_priors)


def derive_calendar(frame: AlignedFrame | FeatureMatrix) -> FeatureMatrix:
    """Append ``month`` (1-12) and ``hour`` (0-23) of each window start."""
    stamps = pd.DatetimeIndex(frame.timestamps)
    if isinstance(frame, AlignedFrame):
        values, cols = frame.features, list(frame.column_names)
    else:
        values, cols = frame.values, list(frame.columns)
    cal = np.column_stack([stamps.month.to_numpy(float), stamps.hour.to_numpy(float)])
    return FeatureMatrix(np.asarray(frame.timestamps), np.hstack([values, cal]),
                         np.asarray(frame.target, dtype=float), cols + ["month", "hour"])


def derive_priors(fm: FeatureMatrix, n_priors: int) -> FeatureMatrix:
    """Add ``prior_1..prior_n`` (target lagged by j windows), dropping the first n rows."""
    if not 0 <= n_priors <= MAX_PRIORS:
        raise ValueError(f"n_priors must be in 0..{MAX_PRIORS}, got {n_priors}")
    if n_priors == 0:
        return fm
    if fm.n_priors:
        raise ValueError("feature matrix already carries priors")
    n = len(fm)
    if n <= n_priors:
        raise TooFewRows(f"{n} rows cannot provide {n_priors} priors")
    y = fm.target
    lags = np.column_stack([y[n_priors - j:n - j] for j in range(1, n_priors + 1)])
    names = [f"prior_{j}" for j in range(1, n_priors + 1)]
    return FeatureMatrix(fm.timestamps[n_priors:], np.hstack([fm.values[n_priors:], lags]),
                         y[n_priors:], fm.columns + names, n_priors)


def preset_columns(fm: FeatureMatrix, preset: str) -> list[str]:
    priors = [c for c in fm.columns if c.startswith("prior_")]
    if preset == "full":
        return list(fm.columns)
    if preset == "reduced":
        return list(REDUCED_BASE) + priors
    raise ValueError(f"unknown feature preset {preset!r}")


def build_features(frame: AlignedFrame, n_priors: int = 1, preset: str = "full") -> FeatureMatrix:
    fm = derive_priors(derive_calendar(frame), n_priors)
    return fm.select(preset_columns(fm, preset))


@dataclass
class CorrelationMatrix:
    names: list[str]
    r: np.ndarray
    excluded: list[str] = field(default_factory=list)

    def get(self, a: str, b: str) -> float:
        return float(self.r[self.names.index(a), self.names.index(b)])

    def long_form(self) -> pd.DataFrame:
        rows = [(a, b, self.r[i, j]) for i, a in enumerate(self.names)
                for j, b in enumerate(self.names)]
        return pd.DataFrame(rows, columns=["feature_a", "feature_b", "r"])


def pearson(matrix, names=None) -> CorrelationMatrix:
    """Pairwise Pearson correlation; zero-variance columns are dropped with a warning."""
    X = np.asarray(matrix, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise TooFewRows("pearson needs at least 2 rows")
    names = list(names) if names is not None else [f"x{j}" for j in range(X.shape[1])]
    std = X.std(axis=0)
    keep = std > 0
    excluded = [n for n, k in zip(names, keep) if not k]
    if excluded:
        logger.warning("excluding zero-variance columns from correlation: %s", excluded)
    X = X[:, keep]
    Z = (X - X.mean(axis=0)) / X.std(axis=0)
    r = Z.T @ Z / X.shape[0]
    r = np.clip((r + r.T) / 2, -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return CorrelationMatrix([n for n, k in zip(names, keep) if k], r, excluded)


def r2_score(actual, predicted) -> float:
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    ss_tot = np.sum((a - a.mean()) ** 2)
    return float(1.0 - np.sum((a - p) ** 2) / ss_tot)


@dataclass
class ImportanceReport:
    baseline_score: float
    features: list[str]
    mean_drop: np.ndarray
    std_drop: np.ndarray
    drops: np.ndarray  # (features, repeats)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"feature": self.features, "mean_drop": self.mean_drop,
                             "std_drop": self.std_drop})


def permutation_importance(model, features, target, repeats: int = 5, seed: int = 42,
                           names=None, n_jobs: int = 1) -> ImportanceReport:
    """Drop in R^2 when each column is shuffled, ``repeats`` times per column.

    ``model`` only needs ``predict(X)``; if it exposes ``columns`` the matrix
    width must agree. Every column gets its own RNG stream seeded from
    ``(seed, column index)``, so the result does not depend on ``n_jobs``.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(target, dtype=float)
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    cols = getattr(model, "columns", None)
    if cols is not None and len(cols) != X.shape[1]:
        raise ColumnMismatch(f"model expects {len(cols)} columns, got {X.shape[1]}")
    names = list(names) if names is not None else list(cols or [f"x{j}" for j in range(X.shape[1])])
    baseline = r2_score(y, model.predict(X))

    def one(j):
        rng = np.random.default_rng([seed, j])
        out = np.empty(repeats)
        Xp = X.copy()
        for r in range(repeats):
            Xp[:, j] = X[rng.permutation(len(X)), j]
            out[r] = baseline - r2_score(y, model.predict(Xp))
        return out

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            drops = np.array(list(pool.map(one, range(X.shape[1]))))
    else:
        drops = np.array([one(j) for j in range(X.shape[1])])
    return ImportanceReport(baseline, names, drops.mean(axis=1),
                            drops.std(axis=1, ddof=1) if repeats > 1 else np.zeros(len(names)),
                            drops)
