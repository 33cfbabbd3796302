"""Closed-form global-sensitivity bounds for a trained classifier.

All quantities derive from the Lipschitz bound of the cross-entropy loss and
the strong-convexity constant of the L2 penalty:

    delta2_w    = 2*rho / (lambda*n)         L2 sensitivity of the weight vector
    delta_omega = delta2_w / sqrt(|W|)       L1 sensitivity of one weight
    delta_z     = a_u * |V_{T-1}| * delta_omega   output-neuron sensitivity
    delta_p     = min(exp(2*delta_z) - 1, 1)      softmax-probability sensitivity
    oaro_bound  = 2*rho^2 / (lambda*n)       remove-one stability rate

The configured L2 coefficient c multiplies ||W||_2^2, so lambda = c/2.
"""

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import DataFormatError, DegenerateModelError, InputError
from .network import ACTIVATION_BOUND


@dataclass(frozen=True)
class SensitivityInputs:
    rho: float  # Lipschitz bound of the loss w.r.t. the weights
    lam: float  # strong-convexity constant (= l2_coefficient / 2)
    n: int  # training-set size
    total_weights: int
    fan_in_output: int  # size of the layer feeding the output, bias included
    activation_bound: float = ACTIVATION_BOUND

    def __post_init__(self):
        if self.rho <= 0:
            raise DegenerateModelError("Lipschitz bound must be positive")
        if self.lam <= 0 or self.n <= 0:
            raise InputError("lambda and n must be positive")
        if self.total_weights < 1 or self.fan_in_output < 1:
            raise InputError("weight and fan-in counts must be positive")
        if self.fan_in_output > self.total_weights:
            raise InputError("fan_in_output cannot exceed total_weights")
        if self.activation_bound <= 0:
            raise InputError("activation_bound must be positive")


@dataclass(frozen=True)
class SensitivityReport:
    rho: float
    delta2_w: float
    delta_omega: float
    delta_z: float
    delta_p: float  # clipped to (0, 1]
    delta_p_raw: float  # exp(2*delta_z) - 1 before the clip
    oaro_bound: float
    # inputs, kept for traceability
    lam: float
    n: int
    total_weights: int
    fan_in_output: int
    activation_bound: float


def _sizes_of(topology_or_sizes):
    sizes = getattr(topology_or_sizes, "layer_sizes", topology_or_sizes)
    return [int(s) for s in sizes]


def lipschitz_bound(topology, class_count, layer_maxima):
    """Upper bound on the loss Lipschitz constant:
    (C-1) * prod_t sqrt(|V_t|) * x_t / (C * |V_{T-1}|), t over 0..T-1."""
    sizes = _sizes_of(topology)
    if class_count < 2:
        raise InputError("class_count must be >= 2")
    if len(sizes) < 2:
        raise InputError("need at least one edge layer")
    maxima = [float(x) for x in layer_maxima]
    if len(maxima) != len(sizes) - 1:
        raise InputError(
            f"expected {len(sizes) - 1} layer maxima, got {len(maxima)}"
        )
    if any(x < 0 for x in maxima):
        raise InputError("layer maxima must be >= 0")
    product = 1.0
    for size, x in zip(sizes[:-1], maxima):
        product *= math.sqrt(size) * x
    return (class_count - 1) * product / (class_count * sizes[-2])


def delta2_w(rho, lam, n):
    if rho <= 0 or lam <= 0 or n <= 0:
        raise InputError("rho, lambda, n must all be positive")
    return 2.0 * rho / (lam * n)


def delta_omega(d2w, total_weights):
    if total_weights < 1:
        raise InputError("total_weights must be >= 1")
    return d2w / math.sqrt(total_weights)


def delta_z(activation_bound, fan_in_output, d_omega):
    if activation_bound < 0 or fan_in_output < 0 or d_omega < 0:
        raise InputError("arguments must be >= 0")
    return activation_bound * fan_in_output * d_omega


def delta_p(dz):
    """Returns (clipped, raw) with raw = exp(2*dz) - 1."""
    if dz < 0:
        raise InputError("delta_z must be >= 0")
    raw = math.expm1(2.0 * dz)
    return min(raw, 1.0), raw


def oaro_bound(rho, lam, n):
    if rho <= 0 or lam <= 0 or n <= 0:
        raise InputError("rho, lambda, n must all be positive")
    return 2.0 * rho * rho / (lam * n)


def report_from_inputs(inputs):
    d2w = delta2_w(inputs.rho, inputs.lam, inputs.n)
    dw = delta_omega(d2w, inputs.total_weights)
    dz = delta_z(inputs.activation_bound, inputs.fan_in_output, dw)
    dp, dp_raw = delta_p(dz)
    if dp <= 0:
        raise DegenerateModelError("zero probability sensitivity; model degenerate")
    return SensitivityReport(
        rho=inputs.rho,
        delta2_w=d2w,
        delta_omega=dw,
        delta_z=dz,
        delta_p=dp,
        delta_p_raw=dp_raw,
        oaro_bound=oaro_bound(inputs.rho, inputs.lam, inputs.n),
        lam=inputs.lam,
        n=inputs.n,
        total_weights=inputs.total_weights,
        fan_in_output=inputs.fan_in_output,
        activation_bound=inputs.activation_bound,
    )


def report(model, n=None, l2_coefficient=None):
    """Full sensitivity report for a trained model.

    Defaults come from the model's own training record; the Lipschitz bound
    is evaluated with the empirical per-layer activation maxima.
    """
    if not model.layer_abs_max:
        raise InputError("model has no recorded per-layer activation maxima")
    n = model.train_size if n is None else int(n)
    c = model.config.l2_coefficient if l2_coefficient is None else float(l2_coefficient)
    if c <= 0:
        raise InputError("l2 coefficient must be positive for sensitivity bounds")
    rho = lipschitz_bound(model.topology, model.topology.class_count, model.layer_abs_max)
    if rho <= 0:
        raise DegenerateModelError("model has zero Lipschitz bound")
    inputs = SensitivityInputs(
        rho=rho,
        lam=c / 2.0,
        n=n,
        total_weights=model.topology.total_weights,
        fan_in_output=model.topology.fan_in_output,
        activation_bound=ACTIVATION_BOUND,
    )
    return report_from_inputs(inputs)


def save_report(rpt, json_path, text_path=None):
    Path(json_path).write_text(json.dumps(asdict(rpt)) + "\n")
    if text_path is not None:
        lines = [f"{key} = {value!r}" for key, value in asdict(rpt).items()]
        Path(text_path).write_text("\n".join(lines) + "\n")


def load_report(json_path):
    try:
        payload = json.loads(Path(json_path).read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{json_path}: not valid JSON ({exc})") from exc
    return SensitivityReport(**payload)
