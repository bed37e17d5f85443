"""Epsilon-support vector regression with an RBF kernel, solved by SMO.

The dual is written over ``beta = [alpha; alpha*]`` (length 2n) with signs
``s = [+1; -1]``::

    min 0.5 * beta' Q beta + p' beta,   Q_ij = s_i s_j k(x_i, x_j)
    p = [eps - y; eps + y],   s' beta = 0,   0 <= beta <= C

Working pairs are picked with second-order information (maximal violating
``i`` and the ``j`` with the largest guaranteed decrease); the loop stops when
the maximal KKT violation drops below ``tol``.
"""

import logging
import warnings

import numpy as np
from numba import njit

from .base import TrainedModel, check_xy, pack_array, unpack_array
from .config import SvrConfig

logger = logging.getLogger(__name__)

TAU = 1e-12
CACHE_BYTES = 256 * 2**20


@njit(cache=True, nogil=True)
def _kernel_row(a, K, X, gamma, cache, tags, out):
    if K.shape[0] > 0:
        for b in range(K.shape[1]):
            out[b] = K[a, b]
        return
    slot = a % cache.shape[0]
    if tags[slot] != a:
        n, d = X.shape
        for b in range(n):
            acc = 0.0
            for f in range(d):
                diff = X[a, f] - X[b, f]
                acc += diff * diff
            cache[slot, b] = np.exp(-gamma * acc)
        tags[slot] = a
    for b in range(cache.shape[1]):
        out[b] = cache[slot, b]


@njit(cache=True, nogil=True)
def _smo(K, X, gamma, y, C, eps, tol, max_iter, cache_rows):
    n = y.shape[0]
    l = 2 * n
    beta = np.zeros(l)
    G = np.empty(l)
    s = np.empty(l)
    for t in range(n):
        s[t] = 1.0
        s[t + n] = -1.0
        G[t] = eps - y[t]
        G[t + n] = eps + y[t]
    if K.shape[0] > 0:
        cache = np.zeros((1, 1))
        diag = np.empty(n)
        for a in range(n):
            diag[a] = K[a, a]
    else:
        cache = np.zeros((cache_rows, n))
        diag = np.ones(n)  # RBF: k(x, x) = 1
    tags = np.full(cache.shape[0], -1, dtype=np.int64)
    Ki = np.empty(n)
    Kj = np.empty(n)

    it = 0
    gap = np.inf
    converged = False
    while it < max_iter:
        # i: maximal violator in I_up
        gmax = -np.inf
        i = -1
        for t in range(l):
            if s[t] > 0:
                if beta[t] < C and -G[t] > gmax:
                    gmax = -G[t]
                    i = t
            else:
                if beta[t] > 0 and G[t] > gmax:
                    gmax = G[t]
                    i = t
        if i < 0:
            converged = True
            gap = 0.0
            break
        ai = i % n
        _kernel_row(ai, K, X, gamma, cache, tags, Ki)
        gmax2 = -np.inf
        j = -1
        obj_min = np.inf
        for t in range(l):
            at = t % n
            if s[t] > 0:
                if beta[t] > 0:
                    if G[t] > gmax2:
                        gmax2 = G[t]
                    grad_diff = gmax + G[t]
                else:
                    continue
            else:
                if beta[t] < C:
                    if -G[t] > gmax2:
                        gmax2 = -G[t]
                    grad_diff = gmax - G[t]
                else:
                    continue
            if grad_diff > 0:
                quad = diag[ai] + diag[at] - 2.0 * Ki[at]
                if quad <= 0:
                    quad = TAU
                obj = -(grad_diff * grad_diff) / quad
                if obj < obj_min:
                    obj_min = obj
                    j = t
        gap = gmax + gmax2
        if gap < tol or j < 0:
            converged = True
            break
        aj = j % n
        _kernel_row(aj, K, X, gamma, cache, tags, Kj)
        kij = Kj[ai]
        quad = diag[ai] + diag[aj] - 2.0 * kij
        if quad <= 0:
            quad = TAU
        old_i = beta[i]
        old_j = beta[j]
        if s[i] != s[j]:
            delta = (-G[i] - G[j]) / quad
            diff = beta[i] - beta[j]
            beta[i] += delta
            beta[j] += delta
            if diff > 0:
                if beta[j] < 0:
                    beta[j] = 0.0
                    beta[i] = diff
            else:
                if beta[i] < 0:
                    beta[i] = 0.0
                    beta[j] = -diff
            if diff > 0:
                if beta[i] > C:
                    beta[i] = C
                    beta[j] = C - diff
            else:
                if beta[j] > C:
                    beta[j] = C
                    beta[i] = C + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = beta[i] + beta[j]
            beta[i] -= delta
            beta[j] += delta
            if total > C:
                if beta[i] > C:
                    beta[i] = C
                    beta[j] = total - C
            else:
                if beta[j] < 0:
                    beta[j] = 0.0
                    beta[i] = total
            if total > C:
                if beta[j] > C:
                    beta[j] = C
                    beta[i] = total - C
            else:
                if beta[i] < 0:
                    beta[i] = 0.0
                    beta[j] = total
        di = beta[i] - old_i
        dj = beta[j] - old_j
        si = s[i]
        sj = s[j]
        for t in range(l):
            at = t % n
            G[t] += s[t] * (si * Ki[at] * di + sj * Kj[at] * dj)
        it += 1

    # offset from free variables, else the middle of the feasible interval
    ub = np.inf
    lb = -np.inf
    nfree = 0
    sfree = 0.0
    for t in range(l):
        yg = s[t] * G[t]
        if beta[t] >= C:
            if s[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif beta[t] <= 0:
            if s[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            nfree += 1
            sfree += yg
    if nfree > 0:
        rho = sfree / nfree
    else:
        rho = (ub + lb) / 2
    coef = beta[:n] - beta[n:]
    return coef, -rho, it, converged, gap


def svr_solve(config: SvrConfig, kernel_matrix, target, max_iter=None):
    """Solve the dual for a precomputed kernel matrix.

    Returns:
        (coef, bias, info) with ``coef = alpha - alpha*`` so that predictions are
        ``K @ coef + bias``.
    """
    K = np.ascontiguousarray(kernel_matrix, dtype=float)
    y = np.ascontiguousarray(target, dtype=float)
    if K.shape != (len(y), len(y)):
        raise ValueError("kernel matrix must be n x n for n targets")
    if not np.allclose(K, K.T, atol=1e-8):
        raise ValueError("kernel matrix must be symmetric")
    max_iter = max_iter or config.max_passes * max(len(y), 100)
    coef, bias, it, ok, gap = _smo(K, np.zeros((1, 1)), 0.0, y, float(config.c),
                                   float(config.epsilon), float(config.tol), int(max_iter), 1)
    if not ok:
        warnings.warn(f"SMO stopped after {it} iterations with KKT gap {gap:.3g}", RuntimeWarning)
    return coef, bias, {"iterations": int(it), "converged": bool(ok), "gap": float(gap)}


def rbf_kernel(A, B, gamma):
    sq = (np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * A @ B.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


class SvrModel(TrainedModel):
    kind = "svr"

    def __init__(self, config, columns, support, coef, bias, diagnostics=None):
        super().__init__(config, columns, diagnostics)
        self.support = support
        self.coef = coef
        self.bias = float(bias)

    def _predict(self, X):
        out = np.full(len(X), self.bias)
        if len(self.coef) == 0:
            return out
        for s in range(0, len(X), 1024):
            out[s:s + 1024] += rbf_kernel(X[s:s + 1024], self.support, self.config.gamma) @ self.coef
        return out

    def _params(self):
        return {"support_vectors": pack_array(self.support.reshape(-1, len(self.columns))),
                "dual_coef": pack_array(self.coef), "bias": self.bias}

    @classmethod
    def _from_params(cls, config, columns, params, diagnostics):
        return cls(config, columns, unpack_array(params["support_vectors"]),
                   unpack_array(params["dual_coef"]), params["bias"], diagnostics)


def fit_svr(config: SvrConfig, X, y, columns) -> SvrModel:
    X, y = check_xy(X, y)
    n = len(y)
    rows = int(max(2, min(n, CACHE_BYTES // (8 * n))))
    max_iter = config.max_passes * max(n, 100)
    coef, bias, it, ok, gap = _smo(np.zeros((0, 0)), X, float(config.gamma), y, float(config.c),
                                   float(config.epsilon), float(config.tol), int(max_iter), rows)
    if not ok:
        warnings.warn(f"SMO stopped after {it} iterations with KKT gap {gap:.3g}", RuntimeWarning)
    sv = np.flatnonzero(coef != 0)
    diag = {"n_support": int(len(sv)), "iterations": int(it), "converged": bool(ok),
            "kkt_gap": float(gap)}
    logger.debug("SVR: %d support vectors after %d SMO iterations", len(sv), it)
    return SvrModel(config, columns, X[sv].copy(), coef[sv].copy(), bias, diag)
