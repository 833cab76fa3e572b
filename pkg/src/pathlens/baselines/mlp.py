"""Single-hidden-layer perceptron trained by penalized least squares.

Architecture per the benchmark configuration: 10 logistic-sigmoid hidden
units, identity output, L2 decay 0.1 on every parameter including biases,
standardized inputs, at most 1000 full-batch iterations. The optimizer is
plain gradient descent with backtracking step halving, so the penalized
loss is monotonically non-increasing across accepted steps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..dataset import EncodedMatrix
from ..errors import DataError, NumericalError
from ..predictions import PredictionSet, threshold_labels

GRADIENT_TOLERANCE = 1e-8
_MAX_HALVINGS = 60


@dataclass
class MlpConfig:
    hidden_units: int = 10
    decay: float = 0.1
    max_iterations: int = 1000
    seed: int = 0


@dataclass
class MlpModel:
    w1: np.ndarray  # (p, hidden)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden,)
    b2: float
    feature_names: list[str]
    iterations: int
    final_loss: float
    gradient_norm: float
    standardization: object = field(default=None)  # set by the CV runner

    @property
    def parameter_count(self) -> int:
        p, h = self.w1.shape
        return (p + 1) * h + (h + 1)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # exp(-|x|) is always <= 1, so both branches of the stable form share
    # one exponential and neither can overflow.
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def _penalty(w1, b1, w2, b2, decay):
    return decay * (
        (w1 ** 2).sum() + (b1 ** 2).sum() + (w2 ** 2).sum() + b2 ** 2
    )


def _forward_loss(X, y, w1, b1, w2, b2, decay):
    hidden = _sigmoid(X @ w1 + b1)
    error = hidden @ w2 + b2 - y
    loss = float(error @ error + _penalty(w1, b1, w2, b2, decay))
    return loss, hidden, error


def _gradient(X, hidden, error, w1, b1, w2, b2, decay):
    r = 2.0 * error
    g_w2 = hidden.T @ r + 2.0 * decay * w2
    g_b2 = float(r.sum() + 2.0 * decay * b2)
    back = np.outer(r, w2) * hidden * (1.0 - hidden)
    g_w1 = X.T @ back + 2.0 * decay * w1
    g_b1 = back.sum(axis=0) + 2.0 * decay * b1
    return g_w1, g_b1, g_w2, g_b2


def loss_and_gradient(X, y, w1, b1, w2, b2, decay):
    """Penalized sum-of-squares loss and its analytic gradient."""
    loss, hidden, error = _forward_loss(X, y, w1, b1, w2, b2, decay)
    return loss, _gradient(X, hidden, error, w1, b1, w2, b2, decay)


def fit_mlp(m: EncodedMatrix, labels, cfg: MlpConfig) -> MlpModel:
    """Train on an already-standardized feature matrix."""
    X = np.asarray(m.values, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    n, p = X.shape
    if n == 0:
        raise DataError("empty input")
    if cfg.hidden_units < 1 or cfg.max_iterations < 1 or cfg.decay < 0:
        raise DataError("invalid MLP configuration")

    rng = np.random.default_rng(cfg.seed)
    h = cfg.hidden_units
    w1 = rng.uniform(-0.5, 0.5, (p, h))
    b1 = rng.uniform(-0.5, 0.5, h)
    w2 = rng.uniform(-0.5, 0.5, h)
    b2 = float(rng.uniform(-0.5, 0.5))

    step = 1e-2
    iterations = 0
    loss, hidden, error = _forward_loss(X, y, w1, b1, w2, b2, cfg.decay)
    gnorm = np.inf
    while iterations < cfg.max_iterations:
        iterations += 1
        if not np.isfinite(loss):
            raise NumericalError(f"non-finite MLP loss at iteration {iterations}")
        g_w1, g_b1, g_w2, g_b2 = _gradient(
            X, hidden, error, w1, b1, w2, b2, cfg.decay
        )
        gnorm = float(
            np.sqrt(
                (g_w1 ** 2).sum() + (g_b1 ** 2).sum() + (g_w2 ** 2).sum() + g_b2 ** 2
            )
        )
        if gnorm < GRADIENT_TOLERANCE:
            break

        accepted = False
        for _ in range(_MAX_HALVINGS):
            t_w1 = w1 - step * g_w1
            t_b1 = b1 - step * g_b1
            t_w2 = w2 - step * g_w2
            t_b2 = b2 - step * g_b2
            trial, t_hidden, t_error = _forward_loss(
                X, y, t_w1, t_b1, t_w2, t_b2, cfg.decay
            )
            if np.isfinite(trial) and trial < loss:
                accepted = True
                break
            step /= 2.0
        if not accepted:
            break  # stalled at the line-search floor; keep the best point
        w1, b1, w2, b2 = t_w1, t_b1, t_w2, t_b2
        loss, hidden, error = trial, t_hidden, t_error
        step = min(step * 1.5, 1.0)

    return MlpModel(
        w1=w1,
        b1=b1,
        w2=w2,
        b2=b2,
        feature_names=list(m.column_names),
        iterations=iterations,
        final_loss=loss,
        gradient_norm=gnorm,
    )


def predict_mlp(f: MlpModel, m: EncodedMatrix, truth=None) -> PredictionSet:
    if list(m.column_names) != f.feature_names:
        raise DataError(
            f"feature columns {m.column_names} do not match training columns "
            f"{f.feature_names}"
        )
    raw = _sigmoid(m.values @ f.w1 + f.b1) @ f.w2 + f.b2
    if truth is None:
        truth = np.full(m.n_rows, -1, dtype=np.int64)
    return PredictionSet(
        probability=np.clip(raw, 0.0, 1.0),
        label=threshold_labels(raw),
        truth=truth,
        raw=raw,
    )


def mlp_to_json(f: MlpModel) -> str:
    document = {
        "w1": {"shape": list(f.w1.shape), "values": f.w1.ravel().tolist()},
        "b1": f.b1.tolist(),
        "w2": f.w2.tolist(),
        "b2": f.b2,
        "feature_names": f.feature_names,
        "iterations": f.iterations,
        "final_loss": f.final_loss,
        "gradient_norm": f.gradient_norm,
    }
    return json.dumps(document, sort_keys=True)
