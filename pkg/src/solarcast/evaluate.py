"""Splitting, scoring, cross-validation, hyperparameter search and the prior-lag ablation.

Every experiment goes through :class:`Pipeline`, which fits preprocessing on the
training rows only, trains a model in square-root target space and reports
predictions back in kWh.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from . import models
from .dataio import AlignedFrame, TimeFrame
from .errors import EmptySpace, ModelSchemaMismatch, SolarcastError, TooFewRows
from .features import MAX_PRIORS, FeatureMatrix, build_features
from .preprocess import TransformState, fit_transform_state

logger = logging.getLogger(__name__)

SPLIT_MODES = ("shuffled", "chronological")
METRIC_FIELDS = ("mape", "mae", "rmse", "r2", "std_predicted", "std_test")
ABLATION_COLUMNS = ("model", "horizon", "n_priors", *METRIC_FIELDS)


def _map(fn, items, n_jobs: int) -> list:
    """Ordered map, threaded when ``n_jobs > 1``."""
    items = list(items)
    if n_jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(min(n_jobs, len(items))) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# --------------------------------------------------------------------- splits

@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    mode: str = "shuffled"
    seed: int = 42

    def __post_init__(self):
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must be in (0, 1)")
        if self.mode not in SPLIT_MODES:
            raise ValueError(f"split mode must be one of {SPLIT_MODES}")


def split_indices(n: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Sorted (train, test) row indices; the test part has ``ceil(fraction * n)`` rows."""
    if n < 10:
        raise TooFewRows(f"need at least 10 rows to split, got {n}")
    n_test = int(math.ceil(spec.test_fraction * n - 1e-9))
    if spec.mode == "chronological":
        return np.arange(n - n_test), np.arange(n - n_test, n)
    perm = np.random.default_rng(spec.seed).permutation(n)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def split(fm: FeatureMatrix, spec: SplitSpec) -> tuple[FeatureMatrix, FeatureMatrix]:
    train, test = split_indices(len(fm), spec)
    return fm.take(train), fm.take(test)


# -------------------------------------------------------------------- metrics

@dataclass(frozen=True)
class MetricsReport:
    """Scores in kWh. ``mape`` is a percentage over nonzero actuals; it is None when
    every actual is zero, and ``r2`` is None when the actuals have no spread."""

    mape: Optional[float]
    mae: float
    rmse: float
    r2: Optional[float]
    std_predicted: Optional[float]
    std_test: Optional[float]
    n_test: int
    n_zero_excluded: int

    def to_dict(self) -> dict:
        return asdict(self)


def metrics(actual_kwh, predicted_kwh) -> MetricsReport:
    a = np.asarray(actual_kwh, dtype=float).ravel()
    p = np.asarray(predicted_kwh, dtype=float).ravel()
    if a.shape != p.shape or len(a) == 0:
        raise ValueError("actual and predicted must be non-empty and of equal length")
    if not (np.isfinite(a).all() and np.isfinite(p).all()):
        raise ValueError("actual and predicted must be finite")
    err = a - p
    nz = a != 0
    mape = float(100.0 * np.mean(np.abs(err[nz]) / np.abs(a[nz]))) if nz.any() else None
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    r2 = 1.0 - float(np.sum(err**2)) / ss_tot if ss_tot > 0 else None
    many = len(a) > 1
    return MetricsReport(
        mape=mape,
        mae=float(np.mean(np.abs(err))),
        rmse=float(np.sqrt(np.mean(err**2))),
        r2=r2,
        std_predicted=float(np.std(p, ddof=1)) if many else None,
        std_test=float(np.std(a, ddof=1)) if many else None,
        n_test=int(len(a)),
        n_zero_excluded=int((~nz).sum()),
    )


# ------------------------------------------------------------------- pipeline

@dataclass
class Pipeline:
    """Fitted preprocessing plus model, tied to one feature layout."""

    state: TransformState
    model: models.TrainedModel
    n_priors: int
    preset: str
    horizon: str
    split: Optional[SplitSpec] = None

    @property
    def columns(self) -> list[str]:
        return list(self.state.columns)

    def predict(self, fm: FeatureMatrix) -> np.ndarray:
        """Predictions in kWh for the rows of ``fm``."""
        if list(fm.columns) != self.columns:
            raise ModelSchemaMismatch(f"pipeline was fitted on {self.columns}, got {list(fm.columns)}")
        return self.predict_values(fm.values)

    def predict_values(self, values) -> np.ndarray:
        """Like :meth:`predict` for a bare matrix already in ``columns`` order."""
        X = self.state.transform_features(values)
        return self.state.inverse_target(self.model.predict(X))

    def to_dict(self) -> dict:
        return {
            "features": {"preset": self.preset, "n_priors": self.n_priors,
                         "horizon": self.horizon, "columns": self.columns},
            "split": None if self.split is None else asdict(self.split),
            "transform": self.state.to_dict(),
            "model": self.model.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Pipeline":
        f = d["features"]
        return cls(TransformState.from_dict(d["transform"]), models.model_from_dict(d["model"]),
                   int(f["n_priors"]), f["preset"], f["horizon"],
                   None if d.get("split") is None else SplitSpec(**d["split"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(to_json(self.to_dict()))

    @classmethod
    def load(cls, path) -> "Pipeline":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def fit_pipeline(train: FeatureMatrix, config, seed=None, n_jobs: int = 1,
                 drop_outliers: bool = True, horizon: str = "1h",
                 preset: str = "full") -> Pipeline:
    state, keep = fit_transform_state(train.values, train.target, train.columns,
                                      drop_outliers=drop_outliers)
    X = state.transform_features(train.values[keep])
    t = state.forward_target(train.target[keep])
    model = models.fit(config, X, t, seed=seed, columns=train.columns, n_jobs=n_jobs)
    return Pipeline(state, model, train.n_priors, preset, horizon)


@dataclass
class HoldoutResult:
    pipeline: Pipeline
    report: MetricsReport
    timestamps: np.ndarray
    actual: np.ndarray
    predicted: np.ndarray
    n_train: int

    def scatter_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "timestamp": pd.DatetimeIndex(self.timestamps).strftime("%Y-%m-%dT%H:%M:%S"),
            "horizon": self.pipeline.horizon,
            "actual_kwh": self.actual,
            "predicted_kwh": self.predicted,
        })


def holdout(fm: FeatureMatrix, config, spec: SplitSpec = SplitSpec(), seed=None,
            n_jobs: int = 1, horizon: str = "1h", preset: str = "full") -> HoldoutResult:
    """Split, fit on the training part and score the test part in kWh."""
    train, test = split(fm, spec)
    pipe = fit_pipeline(train, config, seed=seed, n_jobs=n_jobs, horizon=horizon, preset=preset)
    pipe.split = spec
    pred = pipe.predict(test)
    return HoldoutResult(pipe, metrics(test.target, pred), test.timestamps, test.target, pred,
                         len(train))


# ------------------------------------------------------------------------- CV

@dataclass
class CvResult:
    scores: np.ndarray
    k: int
    folds: list = field(default_factory=list, repr=False)

    @property
    def mean(self) -> float:
        return float(np.mean(self.scores))

    def to_dict(self) -> dict:
        return {"k": self.k, "scores": [float(s) for s in self.scores], "mean": self.mean}


def fold_indices(n: int, k: int, seed: int) -> list[np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, k)


def kfold_cv(config, fm: FeatureMatrix, k: int = 10, seed: int = 42, n_jobs: int = 1,
             model_seed=None) -> CvResult:
    """R² on each of ``k`` held-out folds with preprocessing refitted per fold.

    A fold whose actuals have no spread scores NaN.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    n = len(fm)
    if n < k:
        raise TooFewRows(f"{n} rows cannot form {k} folds")
    folds = fold_indices(n, k, seed)

    def one(f):
        test = np.sort(folds[f])
        train = np.sort(np.concatenate([folds[g] for g in range(k) if g != f]))
        pipe = fit_pipeline(fm.take(train), config, seed=model_seed)
        r2 = metrics(fm.target[test], pipe.predict(fm.take(test))).r2
        return np.nan if r2 is None else r2

    scores = np.array(_map(one, range(k), n_jobs), dtype=float)
    return CvResult(scores, k, folds)


# ------------------------------------------------------------- random search

@dataclass(frozen=True)
class Uniform:
    """Continuous candidate range ``[low, high)``."""

    low: float
    high: float

    def sample(self, rng) -> float:
        return float(rng.uniform(self.low, self.high))


@dataclass
class SearchSpace:
    """Candidates per hyperparameter: a list (or range) of values, or a :class:`Uniform`."""

    params: dict
    n_iterations: int = 50
    seed: int = 42
    exhaustive: bool = False

    def __post_init__(self):
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be >= 1")
        for name, cand in self.params.items():
            if not isinstance(cand, Uniform):
                self.params[name] = list(cand)

    @property
    def is_empty(self) -> bool:
        return not self.params or any(
            not isinstance(c, Uniform) and len(c) == 0 for c in self.params.values())

    def samples(self) -> list[dict]:
        if self.is_empty:
            raise EmptySpace("search space has no candidates")
        names = sorted(self.params)
        if self.exhaustive:
            if any(isinstance(self.params[k], Uniform) for k in names):
                raise ValueError("exhaustive search needs finite candidate lists")
            grid = itertools.product(*(self.params[k] for k in names))
            return [dict(zip(names, combo)) for combo in grid]
        rng = np.random.default_rng(self.seed)
        out = []
        for _ in range(self.n_iterations):
            draw = {}
            for k in names:
                cand = self.params[k]
                draw[k] = cand.sample(rng) if isinstance(cand, Uniform) else cand[
                    int(rng.integers(len(cand)))]
            out.append(draw)
        return out


@dataclass
class SearchResult:
    best_config: object
    best_score: float
    trace: list  # (config, score) per sample, in sampling order


def random_search(space: SearchSpace, fm: FeatureMatrix, model_kind: str,
                  horizon=TimeFrame.ONE_HOUR, folds: int = 3, cv_seed: int = 42,
                  n_jobs: int = 1) -> SearchResult:
    """Score each sampled configuration by mean ``folds``-fold CV R² on ``fm``.

    ``fm`` should be the training split. Configurations that fail to train or
    score NaN count as ``-inf``; ties keep the earlier sample.
    """
    base = models.default_config(model_kind, horizon)
    configs = [_replace(base, s) for s in space.samples()]

    def score(cfg):
        try:
            s = kfold_cv(cfg, fm, k=folds, seed=cv_seed).mean
        except (SolarcastError, FloatingPointError, OverflowError) as exc:
            logger.info("search candidate %s failed: %s", cfg, exc)
            return -math.inf
        return s if np.isfinite(s) else -math.inf

    scores = _map(score, configs, n_jobs)
    best = int(np.argmax(scores))  # first maximum wins
    return SearchResult(configs[best], float(scores[best]), list(zip(configs, scores)))


def _replace(config, overrides: dict):
    return dataclasses.replace(config, **overrides)


# ------------------------------------------------------------------ ablation

@dataclass
class AblationCell:
    model: str
    horizon: str
    n_priors: int
    report: MetricsReport


@dataclass
class AblationResult:
    cells: list

    def to_rows(self) -> list[dict]:
        return [{"model": c.model, "horizon": c.horizon, "n_priors": c.n_priors,
                 **{f: getattr(c.report, f) for f in METRIC_FIELDS}} for c in self.cells]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.to_rows(), columns=list(ABLATION_COLUMNS))

    def get(self, model: str, horizon: str, n_priors: int) -> MetricsReport:
        for c in self.cells:
            if (c.model, c.horizon, c.n_priors) == (model, horizon, n_priors):
                return c.report
        raise KeyError((model, horizon, n_priors))


def ablate_priors(frames: dict, model_kinds=models.MODEL_KINDS, max_priors: int = MAX_PRIORS,
                  seed: int = 42, preset: str = "full", spec: Optional[SplitSpec] = None,
                  n_jobs: int = 1, priors=None) -> AblationResult:
    """Holdout metrics over every (model, horizon, prior count) cell.

    Args:
        frames: horizon (TimeFrame or its label) to AlignedFrame.
        priors: explicit prior counts; defaults to ``0..max_priors``.
    """
    if not 0 <= max_priors <= MAX_PRIORS:
        raise ValueError(f"max_priors must be in 0..{MAX_PRIORS}")
    spec = spec or SplitSpec(seed=seed)
    priors = list(range(max_priors + 1)) if priors is None else list(priors)
    frames = {TimeFrame.parse(h): f for h, f in frames.items()}
    cells = [(m, h, p) for m in model_kinds for h in frames for p in priors]

    def one(cell):
        kind, h, p = cell
        fm = build_features(frames[h], n_priors=p, preset=preset)
        cfg = models.default_config(kind, h)
        res = holdout(fm, cfg, spec, seed=seed, horizon=h.value, preset=preset)
        return AblationCell(kind, h.value, p, res.report)

    return AblationResult(_map(one, cells, n_jobs))


# ------------------------------------------------------------------- writers

def round_sig(obj, digits: int = 6):
    """Recursively round floats to ``digits`` significant digits; NaN/inf become None."""
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(f"{x:.{digits}g}") if math.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: round_sig(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_sig(v, digits) for v in obj]
    if isinstance(obj, np.ndarray):
        return round_sig(obj.tolist(), digits)
    return obj


def to_json(obj, digits: Optional[int] = None) -> str:
    """Stable JSON text; ``digits`` rounds floats (full precision when None)."""
    if digits is not None:
        obj = round_sig(obj, digits)
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj, digits: Optional[int] = 6) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(to_json(obj, digits))


def write_csv(path, df: pd.DataFrame) -> None:
    df.to_csv(path, index=False, float_format="%.6g", encoding="utf-8", lineterminator="\n")


def metrics_table(rows: list[dict]) -> pd.DataFrame:
    cols = ["model", "horizon", "n_priors", *METRIC_FIELDS, "n_test"]
    return pd.DataFrame(rows, columns=cols)


def load_frames(paths: dict[str, str]) -> dict[TimeFrame, AlignedFrame]:
    from .dataio import read_frame_csv

    return {TimeFrame.parse(h): read_frame_csv(p, h) for h, p in paths.items()}
