"""Mini-batch Adam training, fully reproducible for a fixed seed."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .errors import NumericError
from .network import (
    LOSS_CONVEXIFIED,
    ModelParams,
    NetworkTopology,
    TrainingConfig,
    convexify,
    layer_abs_maxima,
    sample_weights,
    stable_softmax,
)
from .numerics import PROB_FLOOR, safe_probs

# Adam defaults; the optimiser choice is fixed, only the step size is configured.
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

_EVAL_CHUNK = 4096


@dataclass
class TrainingReport:
    train_accuracy: float
    test_accuracy: Optional[float]
    final_train_loss: float
    epochs_run: int


@dataclass
class TrainedModel:
    """A trained classifier plus everything sensitivity analysis needs."""

    topology: NetworkTopology
    params: ModelParams
    layer_abs_max: list  # empirical per-layer max |activation| on the training set
    config: TrainingConfig
    report: TrainingReport
    train_size: int

    def logits(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        _, z = _kernels.forward_batch(self.params.weights, X)
        return z

    def predict_proba(self, X):
        return safe_probs(self.logits(X), axis=1)


def init_params(topology, rng):
    """Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer."""
    weights = []
    for out, fan_in in topology.weight_shapes:
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(out, fan_in)))
    return ModelParams(weights=weights)


def accuracy(params, topology, X, y):
    """Argmax accuracy; ties break to the lowest index."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64).ravel()
    hits = 0
    for start in range(0, X.shape[0], _EVAL_CHUNK):
        _, z = _kernels.forward_batch(params.weights, X[start : start + _EVAL_CHUNK])
        hits += int(np.sum(np.argmax(z, axis=1) == y[start : start + _EVAL_CHUNK]))
    return hits / X.shape[0]


def _full_pass_maxima(params, X):
    maxima = None
    for start in range(0, X.shape[0], _EVAL_CHUNK):
        acts, _ = _kernels.forward_batch(params.weights, X[start : start + _EVAL_CHUNK])
        chunk = layer_abs_maxima(acts)
        maxima = chunk if maxima is None else [max(a, b) for a, b in zip(maxima, chunk)]
    return maxima


def train(dataset, topology, config, test_set=None):
    """Train with mini-batch Adam on the configured loss plus the L2 penalty.

    `dataset` (and `test_set`, if given) must expose `.features` and
    `.labels`.  Per-layer activation maxima are taken from one full pass over
    the training set after the final epoch.
    """
    X = np.ascontiguousarray(dataset.features, dtype=np.float64)
    y = np.asarray(dataset.labels, dtype=np.int64).ravel()
    n = X.shape[0]
    rng = np.random.default_rng(config.seed)
    params = init_params(topology, rng)

    m = [np.zeros_like(w) for w in params.weights]
    v = [np.zeros_like(w) for w in params.weights]
    step = 0
    last_loss = float("nan")

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for batch_index, start in enumerate(range(0, n, config.batch_size)):
            sel = order[start : start + config.batch_size]
            Xb, yb = X[sel], y[sel]

            acts, logits = _kernels.forward_batch(params.weights, Xb)
            probs = stable_softmax(logits, axis=1)
            losses = -np.log(np.clip(probs[np.arange(len(sel)), yb], PROB_FLOOR, None))
            if config.loss_kind == LOSS_CONVEXIFIED:
                data_loss = convexify(losses, config.alpha)
            else:
                data_loss = float(np.mean(losses))
            penalty = config.l2_coefficient * sum(
                float(np.sum(w * w)) for w in params.weights
            )
            last_loss = data_loss + penalty
            if not np.isfinite(last_loss):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, batch {batch_index}"
                )

            sw = sample_weights(losses, config)
            delta = probs
            delta[np.arange(len(sel)), yb] -= 1.0
            delta *= sw[:, None]
            grads = _kernels.backward_from_delta(params.weights, acts, delta)

            step += 1
            correct1 = 1.0 - ADAM_BETA1**step
            correct2 = 1.0 - ADAM_BETA2**step
            for i, g in enumerate(grads):
                if config.l2_coefficient:
                    g = g + 2.0 * config.l2_coefficient * params.weights[i]
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * (g * g)
                params.weights[i] -= (
                    config.learning_rate
                    * (m[i] / correct1)
                    / (np.sqrt(v[i] / correct2) + ADAM_EPS)
                )

    report = TrainingReport(
        train_accuracy=accuracy(params, topology, X, y),
        test_accuracy=(
            accuracy(params, topology, test_set.features, test_set.labels)
            if test_set is not None
            else None
        ),
        final_train_loss=last_loss,
        epochs_run=config.epochs,
    )
    return TrainedModel(
        topology=topology,
        params=params,
        layer_abs_max=_full_pass_maxima(params, X),
        config=config,
        report=report,
        train_size=n,
    )
