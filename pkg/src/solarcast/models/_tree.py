"""Exact-greedy regression tree on per-row gradient/hessian statistics.

One builder serves both ensembles. With ``g = -y*w``, ``h = w``, ``lam = 0`` and
``gamma = 0`` the gain is half the weighted SSE reduction and leaves are weighted
means (random forest); with squared-error gradients it is the second-order
boosting objective.
"""

import numpy as np
from numba import njit

from .base import pack_array, unpack_array

LEAF = -1


@njit(cache=True)
def split_gain(gl, hl, gr, hr, lam, gamma):
    g = gl + gr
    h = hl + hr
    return 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - g * g / (h + lam)) - gamma


@njit(cache=True, nogil=True)
def _is_pure(idx, start, end, g, h):
    r0 = g[idx[start]] / h[idx[start]]
    for k in range(start + 1, end):
        i = idx[k]
        if g[i] / h[i] != r0:
            return False
    return True


@njit(cache=True, nogil=True)
def build_tree(X, rows, g, h, max_depth, lam, gamma, min_child_weight, max_features,
               feature_keys):
    """Grow one tree over ``rows`` of ``X``.

    ``max_depth < 0`` means unbounded. ``feature_keys[node]`` holds random keys
    whose argsort gives the order in which features are inspected at that node;
    inspection stops once ``max_features`` non-constant features have been seen.

    Returns (feature, threshold, left, right, value, n_nodes).
    """
    n_rows = rows.shape[0]
    d = X.shape[1]
    cap = 2 * n_rows + 1
    feature = np.full(cap, LEAF, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, LEAF, dtype=np.int64)
    right = np.full(cap, LEAF, dtype=np.int64)
    value = np.zeros(cap)

    idx = rows.copy()
    buf = np.empty(n_rows, dtype=np.int64)
    vals = np.empty(n_rows)

    # stack of (node_id, start, end, depth)
    stack = np.empty((cap, 4), dtype=np.int64)
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n_rows
    stack[0, 3] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]

        G = 0.0
        H = 0.0
        for k in range(start, end):
            G += g[idx[k]]
            H += h[idx[k]]
        value[node] = -G / (H + lam)

        if end - start < 2 or (max_depth >= 0 and depth >= max_depth):
            continue
        if _is_pure(idx, start, end, g, h):
            continue

        best_gain = 0.0
        best_feat = -1
        best_thr = 0.0
        order_f = np.argsort(feature_keys[node], kind="mergesort")
        visited = 0
        for fi in range(d):
            if visited >= max_features:
                break
            f = order_f[fi]
            m = end - start
            for k in range(m):
                vals[k] = X[idx[start + k], f]
            order = np.argsort(vals[:m], kind="mergesort")
            if vals[order[0]] == vals[order[m - 1]]:
                continue
            visited += 1
            gl = 0.0
            hl = 0.0
            for k in range(m - 1):
                i = idx[start + order[k]]
                gl += g[i]
                hl += h[i]
                v0 = vals[order[k]]
                v1 = vals[order[k + 1]]
                if v0 == v1:
                    continue
                hr = H - hl
                if hl < min_child_weight or hr < min_child_weight:
                    continue
                gain = split_gain(gl, hl, G - gl, hr, lam, gamma)
                if gain > best_gain:
                    best_gain = gain
                    best_feat = f
                    thr = 0.5 * (v0 + v1)
                    if thr >= v1:
                        thr = v0
                    best_thr = thr

        if best_feat < 0:
            continue

        # stable partition: x <= thr to the left
        nl = 0
        nr = 0
        for k in range(start, end):
            i = idx[k]
            if X[i, best_feat] <= best_thr:
                idx[start + nl] = i
                nl += 1
            else:
                buf[nr] = i
                nr += 1
        for k in range(nr):
            idx[start + nl + k] = buf[k]

        feature[node] = best_feat
        threshold[node] = best_thr
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        left[node] = lc
        right[node] = rc
        # right first so the left subtree is expanded first
        stack[top, 0] = rc
        stack[top, 1] = start + nl
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = lc
        stack[top, 1] = start
        stack[top, 2] = start + nl
        stack[top, 3] = depth + 1
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), n_nodes)


@njit(cache=True, nogil=True)
def predict_tree(X, feature, threshold, left, right, value):
    n = X.shape[0]
    out = np.empty(n)
    for r in range(n):
        node = 0
        while feature[node] != LEAF:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]
    return out


class Tree:
    """Flat-array tree as returned by :func:`build_tree`."""

    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict(self, X) -> np.ndarray:
        return predict_tree(np.ascontiguousarray(X, dtype=float), self.feature, self.threshold,
                            self.left, self.right, self.value)

    def to_dict(self) -> dict:
        # children are allocated in pairs, so right == left + 1 and is not stored
        return {"feature": pack_array(self.feature, "<i4"),
                "threshold": pack_array(self.threshold),
                "left": pack_array(self.left, "<i4"),
                "value": pack_array(self.value)}

    @classmethod
    def from_dict(cls, d) -> "Tree":
        left = unpack_array(d["left"]).astype(np.int64)
        right = np.where(left == LEAF, LEAF, left + 1)
        return cls(unpack_array(d["feature"]), unpack_array(d["threshold"]), left, right,
                   unpack_array(d["value"]))


def grow(X, rows, g, h, *, max_depth, lam, gamma, min_child_weight, max_features,
         rng=None) -> Tree:
    """Python entry point; ``rng=None`` inspects features in column order."""
    X = np.ascontiguousarray(X, dtype=float)
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    if rng is None:
        keys = np.broadcast_to(np.arange(X.shape[1], dtype=float), (2 * len(rows) + 1, X.shape[1]))
        keys = np.ascontiguousarray(keys)
    else:
        keys = rng.random((2 * len(rows) + 1, X.shape[1]))
    f, t, l, r, v, _ = build_tree(X, rows, np.ascontiguousarray(g, dtype=float),
                                  np.ascontiguousarray(h, dtype=float), int(max_depth),
                                  float(lam), float(gamma), float(min_child_weight),
                                  int(max_features), keys)
    return Tree(f, t, l, r, v)
