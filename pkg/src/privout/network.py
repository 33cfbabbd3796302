"""Dense feed-forward classifier core: topology, forward pass, losses, gradients.

Layer convention: the input layer and every hidden layer carry one constant
bias unit (activation fixed at 1) as their last entry, so `layer_sizes`
counts it.  The output layer has exactly one unit per class and no bias.
Weight matrix t has shape (units computed at layer t, full size of layer t-1).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InputError, NumericError
from .numerics import PROB_FLOOR, safe_probs, stable_softmax

HIDDEN_ACTIVATION = "tanh"
OUTPUT_ACTIVATION = "softmax"
ACTIVATION_BOUND = 1.0  # tanh and the bias unit are both bounded by 1

LOSS_PLAIN = "cross_entropy"
LOSS_CONVEXIFIED = "convexified_cross_entropy"
LOSS_KINDS = (LOSS_PLAIN, LOSS_CONVEXIFIED)


@dataclass(frozen=True)
class NetworkTopology:
    """Shape of the classifier graph.

    `layer_sizes` includes the bias unit for the input and hidden layers and
    equals the class count for the output layer.
    """

    layer_sizes: tuple
    hidden_activation: str = HIDDEN_ACTIVATION
    output_activation: str = OUTPUT_ACTIVATION

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 3:
            raise InputError("need at least one hidden layer")
        if any(s < 2 for s in sizes[:-1]):
            raise InputError("input/hidden layers need at least one non-bias unit")
        if sizes[-1] < 2:
            raise InputError("output layer needs at least two classes")
        if self.hidden_activation != HIDDEN_ACTIVATION:
            raise InputError(f"unsupported hidden activation {self.hidden_activation!r}")
        if self.output_activation != OUTPUT_ACTIVATION:
            raise InputError(f"unsupported output activation {self.output_activation!r}")

    @classmethod
    def dense(cls, n_features, hidden_units, n_classes):
        """Build layer sizes from non-bias unit counts (bias added here)."""
        if isinstance(hidden_units, int):
            hidden_units = (hidden_units,)
        sizes = (n_features + 1,) + tuple(h + 1 for h in hidden_units) + (n_classes,)
        return cls(layer_sizes=sizes)

    @property
    def edge_layer_count(self):
        return len(self.layer_sizes) - 1

    @property
    def class_count(self):
        return self.layer_sizes[-1]

    @property
    def feature_count(self):
        return self.layer_sizes[0] - 1

    @property
    def weight_shapes(self):
        """Per-edge-layer (out, fan_in); hidden outputs exclude their bias unit."""
        shapes = []
        for t in range(1, len(self.layer_sizes)):
            out = self.layer_sizes[t] - (1 if t < len(self.layer_sizes) - 1 else 0)
            shapes.append((out, self.layer_sizes[t - 1]))
        return shapes

    @property
    def total_weights(self):
        return sum(o * i for o, i in self.weight_shapes)

    @property
    def fan_in_output(self):
        """Size of the layer feeding the output, bias unit included."""
        return self.layer_sizes[-2]


@dataclass
class ModelParams:
    """All edge weights, one float64 matrix per edge layer."""

    weights: list

    def __post_init__(self):
        self.weights = [np.ascontiguousarray(w, dtype=np.float64) for w in self.weights]
        for w in self.weights:
            if not np.all(np.isfinite(w)):
                raise NumericError("non-finite weight")

    @property
    def total_weights(self):
        return sum(w.size for w in self.weights)

    def matches(self, topology):
        return [w.shape for w in self.weights] == topology.weight_shapes

    def flatten(self):
        """Layer-major, row-major flat copy of all weights."""
        return np.concatenate([w.ravel() for w in self.weights])

    @classmethod
    def from_flat(cls, flat, topology):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != topology.total_weights:
            raise InputError(
                f"expected {topology.total_weights} weights, got {flat.size}"
            )
        weights, pos = [], 0
        for out, fan_in in topology.weight_shapes:
            weights.append(flat[pos : pos + out * fan_in].reshape(out, fan_in).copy())
            pos += out * fan_in
        return cls(weights=weights)

    def copy(self):
        return ModelParams(weights=[w.copy() for w in self.weights])


@dataclass
class TrainingConfig:
    learning_rate: float = 0.001
    batch_size: int = 100
    epochs: int = 100
    l2_coefficient: float = 0.001  # multiplies ||W||_2^2 in the objective
    alpha: float = 1.0  # risk factor of the convexified loss
    loss_kind: str = LOSS_PLAIN
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise InputError("learning_rate must be positive")
        if self.batch_size < 1:
            raise InputError("batch_size must be >= 1")
        if self.epochs < 0:
            raise InputError("epochs must be >= 0")
        if self.l2_coefficient < 0:
            raise InputError("l2_coefficient must be >= 0")
        if self.loss_kind not in LOSS_KINDS:
            raise InputError(f"unknown loss kind {self.loss_kind!r}")
        if self.loss_kind == LOSS_CONVEXIFIED and self.alpha <= 0:
            raise InputError("alpha must be positive for the convexified loss")


@dataclass
class ForwardTrace:
    """Everything one forward pass produces, logits kept separate from probs."""

    activations: list  # per layer 0..T-1, bias entry last
    logits: np.ndarray  # (C,)
    probs: np.ndarray  # (C,)
    layer_abs_max: list  # per layer 0..T-1; input layer excludes the bias unit


def _check_batch(topology, X, y=None):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != topology.feature_count:
        raise InputError(
            f"expected {topology.feature_count} features, got {X.shape[1]}"
        )
    if y is None:
        return X, None
    y = np.asarray(y, dtype=np.int64).ravel()
    if y.shape[0] != X.shape[0]:
        raise InputError("feature/label row counts differ")
    if y.size and (y.min() < 0 or y.max() >= topology.class_count):
        raise InputError("label outside [0, class_count)")
    return X, y


def layer_abs_maxima(acts):
    """Per-layer max |activation|; the input layer's constant bias is excluded,
    hidden-layer maxima include it (so they are exactly 1 under tanh)."""
    maxima = [float(np.max(np.abs(acts[0][:, :-1])))]
    maxima.extend(float(np.max(np.abs(a))) for a in acts[1:])
    return maxima


def forward(params, topology, x):
    """Forward pass for one sample; softmax applied only at the output."""
    if not params.matches(topology):
        raise InputError("params do not match topology")
    X, _ = _check_batch(topology, np.asarray(x, dtype=np.float64).reshape(1, -1))
    acts, logits = _kernels.forward_batch(params.weights, X)
    logits = logits[0]
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits in forward pass")
    return ForwardTrace(
        activations=[a[0] for a in acts],
        logits=logits,
        probs=safe_probs(logits),
        layer_abs_max=layer_abs_maxima(acts),
    )


def forward_logits(params, topology, X):
    """Batched forward pass returning logits only."""
    X, _ = _check_batch(topology, X)
    _, logits = _kernels.forward_batch(params.weights, X)
    return logits


def predict_proba(params, topology, X):
    """Batched clean prediction probabilities."""
    return safe_probs(forward_logits(params, topology, X), axis=1)


def per_sample_losses(params, topology, X, y):
    """Cross-entropy -ln p_true per sample, probability clamped at 1e-12."""
    X, y = _check_batch(topology, X, y)
    if X.shape[0] == 0:
        raise InputError("empty batch")
    probs = stable_softmax(forward_logits(params, topology, X), axis=1)
    p_true = probs[np.arange(X.shape[0]), y]
    return -np.log(np.clip(p_true, PROB_FLOOR, None))


def loss_plain(params, topology, X, y):
    """Mean cross-entropy over the batch; the regulariser is reported separately."""
    return float(np.mean(per_sample_losses(params, topology, X, y)))


def convexify(losses, alpha):
    """(1/alpha) * ln(mean(exp(alpha * losses))), max-shifted."""
    if alpha <= 0:
        raise InputError("alpha must be positive")
    l = np.asarray(losses, dtype=np.float64)
    if l.size == 0:
        raise InputError("empty batch")
    if not np.all(np.isfinite(l)):
        raise NumericError("non-finite per-sample loss")
    scaled = alpha * l
    m = float(np.max(scaled))
    return (m + math.log(float(np.mean(np.exp(scaled - m))))) / alpha


def loss_convexified(params, topology, X, y, alpha):
    """Risk-averting batch loss; >= loss_plain on the same batch for any alpha."""
    return convexify(per_sample_losses(params, topology, X, y), alpha)


def batch_loss(params, topology, X, y, config):
    if config.loss_kind == LOSS_CONVEXIFIED:
        return loss_convexified(params, topology, X, y, config.alpha)
    return loss_plain(params, topology, X, y)


def sample_weights(losses, config):
    """d(batch loss)/d(per-sample loss): uniform for the plain mean,
    a softmax over alpha-scaled losses for the convexified form."""
    n = losses.shape[0]
    if config.loss_kind == LOSS_CONVEXIFIED:
        return stable_softmax(config.alpha * losses)
    return np.full(n, 1.0 / n)


def l2_penalty_gradients(params, l2_coefficient):
    """Gradient of l2_coefficient * ||W||_2^2."""
    return [2.0 * l2_coefficient * w for w in params.weights]


def gradients(params, topology, X, y, config):
    """Gradient of (configured loss + l2_coefficient * ||W||_2^2) per weight."""
    X, y = _check_batch(topology, X, y)
    if X.shape[0] == 0:
        raise InputError("empty batch")
    if not params.matches(topology):
        raise InputError("params do not match topology")
    acts, logits = _kernels.forward_batch(params.weights, X)
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits in forward pass")
    probs = stable_softmax(logits, axis=1)
    losses = -np.log(np.clip(probs[np.arange(X.shape[0]), y], PROB_FLOOR, None))
    sw = sample_weights(losses, config)
    delta = probs.copy()
    delta[np.arange(X.shape[0]), y] -= 1.0
    delta *= sw[:, None]
    grads = _kernels.backward_from_delta(params.weights, acts, delta)
    if config.l2_coefficient:
        for g, p in zip(grads, l2_penalty_gradients(params, config.l2_coefficient)):
            g += p
    return grads
