"""Pure-numpy implementation of the hot training kernels.

This is the fallback backend; `privout._kernels._fastcore` is the compiled
twin with identical signatures and semantics (results agree to floating-point
roundoff, not bit-for-bit, because summation order differs).
"""

import numpy as np

BACKEND = "numpy"


def forward_batch(weights, X):
    """Run a batch through the network.

    Parameters
    ----------
    weights : list of (out, fan_in) float64 arrays, one per edge layer.  The
        last input column of every matrix multiplies the bias unit.
    X : (n, m) float64 feature matrix, bias not included.

    Returns
    -------
    acts : list of (n, |V_t|) activation matrices for layers 0..T-1, each
        with the constant bias column appended last.
    logits : (n, C) pre-softmax output.
    """
    n = X.shape[0]
    a = np.empty((n, X.shape[1] + 1), dtype=np.float64)
    a[:, :-1] = X
    a[:, -1] = 1.0
    acts = [a]
    for t, w in enumerate(weights):
        z = acts[-1] @ w.T
        if t == len(weights) - 1:
            return acts, z
        nxt = np.empty((n, w.shape[0] + 1), dtype=np.float64)
        np.tanh(z, out=nxt[:, :-1])
        nxt[:, -1] = 1.0
        acts.append(nxt)
    raise ValueError("empty weight list")


def backward_from_delta(weights, acts, delta):
    """Backpropagate an output-layer delta into per-layer weight gradients.

    `delta` is dLoss/dlogits, shape (n, C); the returned list matches
    `weights` in shapes.  The regulariser term is not included here.
    """
    grads = [None] * len(weights)
    back = delta
    for t in range(len(weights) - 1, -1, -1):
        grads[t] = back.T @ acts[t]
        if t > 0:
            hidden = acts[t][:, :-1]
            back = (back @ weights[t][:, :-1]) * (1.0 - hidden * hidden)
    return grads
