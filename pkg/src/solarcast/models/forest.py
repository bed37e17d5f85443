"""Random forest regression: bootstrap rows, random feature subsets, variance splits."""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ._tree import Tree, grow
from .base import TrainedModel, check_xy
from .config import RfConfig


def n_split_features(rule: str, d: int) -> int:
    if rule == "log2":
        return max(1, int(np.log2(d)))
    if rule == "sqrt":
        return max(1, int(np.sqrt(d)))
    return d


def _grow_one(X, y, config, d_split, seed, t):
    rng = np.random.default_rng([seed, t])
    n = len(y)
    counts = np.bincount(rng.integers(0, n, n), minlength=n).astype(float)
    rows = np.flatnonzero(counts)
    return grow(X, rows, -y * counts, counts,
                max_depth=-1 if config.max_depth is None else config.max_depth,
                lam=0.0, gamma=0.0, min_child_weight=1e-12, max_features=d_split, rng=rng)


class ForestModel(TrainedModel):
    kind = "rf"

    def __init__(self, config, columns, trees, diagnostics=None):
        super().__init__(config, columns, diagnostics)
        self.trees = trees

    def _predict(self, X):
        out = np.zeros(len(X))
        for tree in self.trees:
            out += tree.predict(X)
        return out / len(self.trees)

    def _params(self):
        return {"trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def _from_params(cls, config, columns, params, diagnostics):
        return cls(config, columns, [Tree.from_dict(t) for t in params["trees"]], diagnostics)


def fit_forest(config: RfConfig, X, y, columns, n_jobs: int = 1) -> ForestModel:
    """Each tree draws from its own stream seeded by ``(config.seed, tree index)``."""
    X, y = check_xy(X, y)
    d_split = n_split_features(config.max_features, X.shape[1])
    jobs = range(config.n_estimators)
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            trees = list(pool.map(lambda t: _grow_one(X, y, config, d_split, config.seed, t), jobs))
    else:
        trees = [_grow_one(X, y, config, d_split, config.seed, t) for t in jobs]
    diag = {"n_nodes_mean": float(np.mean([t.n_nodes for t in trees])),
            "max_features": d_split}
    return ForestModel(config, columns, trees, diag)
