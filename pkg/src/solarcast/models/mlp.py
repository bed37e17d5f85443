"""Fully-connected ReLU network trained with Adam on squared error.

Loss on a batch of ``m`` rows::

    0.5 * mean((pred - y)^2) + 0.5 * alpha * sum(||W||^2) / m

Biases are not penalised. The step size decays per epoch as
``learning_rate_init / epoch**power_t``.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import TrainingDiverged
from .base import TrainedModel, check_xy, pack_array, unpack_array
from .config import MlpConfig


def init_params(layer_sizes, rng):
    """Uniform(+-sqrt(6/(fan_in+fan_out))) weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def forward(weights, biases, X):
    """Activations of every layer, input first; the output layer is linear."""
    acts = [X]
    for k, (W, b) in enumerate(zip(weights, biases)):
        z = acts[-1] @ W + b
        acts.append(z if k == len(weights) - 1 else np.maximum(z, 0.0))
    return acts


def loss_and_grads(weights, biases, X, y, alpha):
    m = len(y)
    acts = forward(weights, biases, X)
    pred = acts[-1][:, 0]
    err = pred - y
    loss = 0.5 * np.mean(err**2) + 0.5 * alpha * sum(np.sum(W * W) for W in weights) / m
    delta = (err / m)[:, None]
    gw = [None] * len(weights)
    gb = [None] * len(biases)
    for k in range(len(weights) - 1, -1, -1):
        gw[k] = acts[k].T @ delta + alpha * weights[k] / m
        gb[k] = delta.sum(axis=0)
        if k:
            delta = (delta @ weights[k].T) * (acts[k] > 0)
    return float(loss), gw, gb


@dataclass
class AdamState:
    weights: list
    biases: list
    m_w: list
    v_w: list
    m_b: list
    v_b: list
    t: int = 0
    learning_rate: float = 0.001

    @classmethod
    def start(cls, weights, biases, learning_rate=0.001):
        z = lambda arrs: [np.zeros_like(a) for a in arrs]  # noqa: E731
        return cls(weights, biases, z(weights), z(weights), z(biases), z(biases), 0, learning_rate)


def mlp_backprop_step(state: AdamState, X, y, config: MlpConfig):
    """One Adam update on a mini-batch; returns the batch loss before the update."""
    loss, gw, gb = loss_and_grads(state.weights, state.biases, X, y, config.alpha)
    if not np.isfinite(loss):
        raise TrainingDiverged(f"MLP loss became non-finite at step {state.t}")
    state.t += 1
    b1, b2, eps = config.beta_1, config.beta_2, config.epsilon
    lr = state.learning_rate * np.sqrt(1 - b2**state.t) / (1 - b1**state.t)
    for params, grads, ms, vs in ((state.weights, gw, state.m_w, state.v_w),
                                  (state.biases, gb, state.m_b, state.v_b)):
        for k in range(len(params)):
            ms[k] = b1 * ms[k] + (1 - b1) * grads[k]
            vs[k] = b2 * vs[k] + (1 - b2) * grads[k] ** 2
            params[k] = params[k] - lr * ms[k] / (np.sqrt(vs[k]) + eps)
    return state, loss


class MlpModel(TrainedModel):
    kind = "mlp"

    def __init__(self, config, columns, weights, biases, diagnostics=None):
        super().__init__(config, columns, diagnostics)
        self.weights = weights
        self.biases = biases

    def _predict(self, X):
        return forward(self.weights, self.biases, X)[-1][:, 0]

    def _params(self):
        return {"weights": [pack_array(w) for w in self.weights],
                "biases": [pack_array(b) for b in self.biases]}

    @classmethod
    def _from_params(cls, config, columns, params, diagnostics):
        return cls(config, columns, [unpack_array(w) for w in params["weights"]],
                   [unpack_array(b) for b in params["biases"]], diagnostics)


def fit_mlp(config: MlpConfig, X, y, columns) -> MlpModel:
    X, y = check_xy(X, y)
    n, d = X.shape
    rng = np.random.default_rng(config.seed)
    weights, biases = init_params([d, *config.hidden_layer_sizes, 1], rng)
    if np.ptp(y) == 0:
        # constant target: carry it in the output bias, a fixed point of training
        weights[-1][:] = 0.0
        biases[-1][:] = y[0]
        return MlpModel(config, columns, weights, biases, {"train_loss": [0.0]})
    state = AdamState.start(weights, biases, config.learning_rate_init)
    batch = config.batch_size or min(200, n)
    losses = []
    for epoch in range(1, config.max_iter + 1):
        state.learning_rate = config.learning_rate_init / epoch**config.power_t
        order = rng.permutation(n)
        total = 0.0
        for s in range(0, n, batch):
            rows = order[s:s + batch]
            state, loss = mlp_backprop_step(state, X[rows], y[rows], config)
            total += loss * len(rows)
        losses.append(total / n)
    return MlpModel(config, columns, state.weights, state.biases, {"train_loss": losses})
