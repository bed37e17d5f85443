"""Brute-force k-nearest-neighbour regression under the Minkowski metric."""

import numpy as np

from .base import TrainedModel, check_xy, pack_array, unpack_array
from .config import KnnConfig

CHUNK = 512


def minkowski(A, B, p):
    """Pairwise Minkowski distances between rows of ``A`` (m, d) and ``B`` (n, d)."""
    acc = np.zeros((A.shape[0], B.shape[0]))
    for j in range(A.shape[1]):
        diff = np.abs(A[:, j, None] - B[None, :, j])
        if p == 1:
            acc += diff
        elif p == 2:
            acc += diff * diff
        else:
            acc += diff**p
    if p == 1:
        return acc
    if p == 2:
        return np.sqrt(acc)
    return acc ** (1.0 / p)


def neighbours(X_train, X_query, k, p):
    """Indices and distances of the k nearest training rows for each query.

    Equal distances are resolved in favour of the lower training row index.
    """
    k = min(k, len(X_train))
    idx = np.empty((len(X_query), k), dtype=np.int64)
    dist = np.empty((len(X_query), k))
    for s in range(0, len(X_query), CHUNK):
        D = minkowski(X_query[s:s + CHUNK], X_train, p)
        kth = np.partition(D, k - 1, axis=1)[:, k - 1]
        for r in range(len(D)):
            cand = np.flatnonzero(D[r] <= kth[r])
            order = cand[np.argsort(D[r, cand], kind="stable")[:k]]
            idx[s + r] = order
            dist[s + r] = D[r, order]
    return idx, dist


class KnnModel(TrainedModel):
    kind = "knn"

    def __init__(self, config, columns, X, y, diagnostics=None):
        super().__init__(config, columns, diagnostics)
        self.X = X
        self.y = y

    def _predict(self, X):
        idx, dist = neighbours(self.X, X, self.config.n_neighbours, self.config.p)
        targets = self.y[idx]
        if self.config.weights == "uniform":
            return targets.mean(axis=1)
        with np.errstate(divide="ignore"):
            w = 1.0 / dist
        exact = np.isinf(w)
        rows = exact.any(axis=1)
        # a query that coincides with training rows takes their plain average
        w[rows] = exact[rows].astype(float)
        return (w * targets).sum(axis=1) / w.sum(axis=1)

    def _params(self):
        return {"X": pack_array(self.X), "y": pack_array(self.y)}

    @classmethod
    def _from_params(cls, config, columns, params, diagnostics):
        return cls(config, columns, unpack_array(params["X"]), unpack_array(params["y"]),
                   diagnostics)


def fit_knn(config: KnnConfig, X, y, columns) -> KnnModel:
    X, y = check_xy(X, y)
    return KnnModel(config, columns, X.copy(), y.copy(), {"n_train": len(y)})
