"""Differentially private prediction vectors for single queries.

One query: forward to clean logits, sample one output neuron with the
exponential mechanism scored by the clean softmax, add calibrated noise to
that neuron's logit only, re-apply softmax, charge the ledger once.  Clean
logits/probabilities are secret intermediate state; they leave this module
only in explicitly diagnostic mode.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BudgetExhaustedError, InputError, NumericError
from .mechanisms import NoiseSpec, exp_mechanism_sample
from .numerics import safe_probs, stable_softmax


@dataclass
class DiagnosticTrace:
    """Clean internals, emitted only when the caller asked for diagnostics."""

    clean_logits: np.ndarray
    clean_probs: np.ndarray
    noise: float


@dataclass
class DpPredictionResult:
    probs: np.ndarray  # noisy probability vector, length C
    neuron: int  # index the exponential mechanism picked
    epsilon_consumed: float  # per-query budget charged
    debug: Optional[DiagnosticTrace] = None


@dataclass
class DpPredictionRequest:
    x: np.ndarray
    model: object  # TrainedModel
    report: object  # SensitivityReport
    budget: object  # PrivacyBudget
    rng: np.random.Generator

    def __post_init__(self):
        if self.report.delta_z <= 0:
            raise InputError("sensitivity report has non-positive delta_z")
        if not 0 < self.report.delta_p <= 1:
            raise InputError("sensitivity report delta_p outside (0, 1]")


@dataclass
class DpBatchResult:
    results: list
    refused_at: Optional[int] = None  # index of the first refused sample
    refusal: Optional[BudgetExhaustedError] = None


def predict_dp(request, *, diagnostic=False, noise_override=None,
               exp_score_sensitivity=False):
    """Answer one query with a DP probability vector.

    `noise_override` replaces the noise draw and is only honoured in
    diagnostic mode.  `exp_score_sensitivity` switches the exponential
    mechanism's score sensitivity from delta_p to exp(delta_p) (an
    alternative reading of the composition argument, off by default).
    """
    if noise_override is not None and not diagnostic:
        raise InputError("noise_override requires diagnostic mode")
    budget = request.budget
    if budget.exhausted:
        raise BudgetExhaustedError(budget.queries_allowed, budget.queries_answered)

    logits = request.model.logits(request.x)[0]
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits; query not charged")

    clean_probs = stable_softmax(logits)
    sensitivity = (
        math.exp(request.report.delta_p)
        if exp_score_sensitivity
        else request.report.delta_p
    )
    neuron = exp_mechanism_sample(
        clean_probs, sensitivity, budget.epsilon_sampling, request.rng
    )
    if noise_override is not None:
        noise = float(noise_override)
    else:
        spec = NoiseSpec(budget.mechanism, request.report.delta_z / budget.epsilon_neuron)
        noise = spec.sample(request.rng)

    epsilon = budget.charge()  # atomic; raises if another caller won the race
    noisy = logits.copy()
    noisy[neuron] += noise
    return DpPredictionResult(
        probs=safe_probs(noisy),
        neuron=neuron,
        epsilon_consumed=epsilon,
        debug=DiagnosticTrace(logits, clean_probs, noise) if diagnostic else None,
    )


def predict_batch_dp(samples, model, report, budget, rng, *, diagnostic=False,
                     exp_score_sensitivity=False):
    """Run queries sequentially off one stream; stop at budget exhaustion."""
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    results = []
    for i in range(samples.shape[0]):
        request = DpPredictionRequest(samples[i], model, report, budget, rng)
        try:
            results.append(
                predict_dp(
                    request,
                    diagnostic=diagnostic,
                    exp_score_sensitivity=exp_score_sensitivity,
                )
            )
        except BudgetExhaustedError as refusal:
            return DpBatchResult(results=results, refused_at=i, refusal=refusal)
    return DpBatchResult(results=results)
