"""Small numerical helpers used throughout the package."""

import math

import numpy as np

# Probabilities handed to callers are kept strictly inside (0, 1); the floor
# is far below every tolerance used anywhere in the package.
PROB_FLOOR = 1e-12


def stable_softmax(z, axis=-1):
    """Softmax with max-shift so large inputs cannot overflow."""
    z = np.asarray(z, dtype=np.float64)
    shifted = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def safe_probs(z, axis=-1):
    """Softmax clamped away from exact 0/1 and renormalised.

    Extreme inputs (e.g. heavily noised logits) can underflow a plain softmax
    to exact zeros; downstream consumers require strictly positive entries.
    """
    p = stable_softmax(z, axis=axis)
    p = np.clip(p, PROB_FLOOR, None)
    return p / np.sum(p, axis=axis, keepdims=True)


def logsumexp(values):
    """log(sum(exp(values))) computed with max-shift."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("logsumexp of an empty array")
    m = float(np.max(v))
    if not math.isfinite(m):
        return m
    return m + math.log(float(np.sum(np.exp(v - m))))


def normal_cdf(x):
    """Standard-normal CDF via erfc; accurate to ~1 ulp over the real line."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))
