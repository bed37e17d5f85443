"""Second-order gradient boosting of regression trees for squared error."""

import logging

import numpy as np

from ..errors import TrainingDiverged
from ._tree import Tree, grow, split_gain
from .base import TrainedModel, check_xy
from .config import GbtConfig

logger = logging.getLogger(__name__)


def gbt_split_gain(grad_sums, hess_sums, lam: float = 1.0, gamma: float = 0.0) -> float:
    """Gain of splitting a node into children with gradient/hessian sums
    ``(G_L, G_R)`` and ``(H_L, H_R)``:

        0.5 * [G_L^2/(H_L+lam) + G_R^2/(H_R+lam) - G^2/(H+lam)] - gamma

    A split is worth making only when this is positive.
    """
    gl, gr = grad_sums
    hl, hr = hess_sums
    if hl < 0 or hr < 0:
        raise ValueError("hessian sums must be non-negative")
    if min(hl, hr) + lam <= 0:
        # an empty child (G = H = 0) contributes nothing to the score
        def term(g, h):
            return g * g / (h + lam) if h + lam > 0 else 0.0

        g, h = gl + gr, hl + hr
        return float(0.5 * (term(gl, hl) + term(gr, hr) - term(g, h)) - gamma)
    return float(split_gain(float(gl), float(hl), float(gr), float(hr), float(lam), float(gamma)))


def leaf_weight(grad_sum: float, hess_sum: float, lam: float = 1.0) -> float:
    return -grad_sum / (hess_sum + lam)


class GbtModel(TrainedModel):
    kind = "gbt"

    def __init__(self, config, columns, base_score, trees, diagnostics=None):
        super().__init__(config, columns, diagnostics)
        self.base_score = float(base_score)
        self.trees = trees

    def _predict(self, X):
        out = np.full(len(X), self.base_score)
        for tree in self.trees:
            out += self.config.learning_rate * tree.predict(X)
        return out

    def _params(self):
        return {"base_score": self.base_score, "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def _from_params(cls, config, columns, params, diagnostics):
        return cls(config, columns, params["base_score"],
                   [Tree.from_dict(t) for t in params["trees"]], diagnostics)


def fit_gbt(config: GbtConfig, X, y, columns) -> GbtModel:
    """Boost ``n_estimators`` trees from the training mean.

    Squared error gives gradient ``pred - y`` and unit hessian. Each round grows
    one tree on a row subsample drawn without replacement.
    """
    X, y = check_xy(X, y)
    n = len(y)
    rng = np.random.default_rng(config.seed)
    base = float(y.mean())
    pred = np.full(n, base)
    ones = np.ones(n)
    n_sub = max(1, int(round(config.subsample * n)))
    trees = []
    losses = [float(np.mean((pred - y) ** 2))]
    for _ in range(config.n_estimators):
        rows = np.sort(rng.permutation(n)[:n_sub]) if n_sub < n else np.arange(n)
        tree = grow(X, rows, pred - y, ones, max_depth=config.max_depth, lam=config.reg_lambda,
                    gamma=config.gamma, min_child_weight=config.min_child_weight,
                    max_features=X.shape[1])
        pred = pred + config.learning_rate * tree.predict(X)
        with np.errstate(over="ignore", invalid="ignore"):
            loss = float(np.mean((pred - y) ** 2))
        if not np.isfinite(loss):
            raise TrainingDiverged(f"boosting loss became non-finite after {len(trees) + 1} rounds")
        trees.append(tree)
        losses.append(loss)
    return GbtModel(config, columns, base, trees, {"train_loss": losses})
