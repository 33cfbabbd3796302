"""Noise samplers, the exponential mechanism, and privacy-budget accounting.

Budget algebra: one query at per-query budget e costs (2C+1)e under Laplace
noise (sequential composition over the sampling step and the C-fold softmax
release) and sqrt(4C+1)e under Gaussian noise (root-sum-square composition),
so the per-neuron budget is e/(2C+1) resp. e/sqrt(4C+1).  The ledger keeps
these identities exact by doing its arithmetic over rationals; floats are
derived views.
"""

import math
import threading
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import BudgetExhaustedError, InputError
from .numerics import normal_cdf, stable_softmax

MECH_LAPLACE = "laplace"
MECH_GAUSSIAN = "gaussian"
MECHANISMS = (MECH_LAPLACE, MECH_GAUSSIAN)


def _check_mechanism(mechanism):
    if mechanism not in MECHANISMS:
        raise InputError(f"unknown mechanism {mechanism!r}")


def split_budget(epsilon_per_query, class_count, mechanism):
    """Per-step budgets (epsilon_sampling, epsilon_neuron) for one query."""
    _check_mechanism(mechanism)
    if epsilon_per_query <= 0:
        raise InputError("epsilon must be positive")
    if class_count < 2:
        raise InputError("class_count must be >= 2")
    if mechanism == MECH_LAPLACE:
        e = epsilon_per_query / (2 * class_count + 1)
    else:
        e = epsilon_per_query / math.sqrt(4 * class_count + 1)
    return e, e


def per_query_budget(epsilon_total, query_count, mechanism):
    """Evenly pre-allocate a total budget across a fixed number of queries."""
    _check_mechanism(mechanism)
    if epsilon_total <= 0:
        raise InputError("epsilon_total must be positive")
    if query_count < 1:
        raise InputError("query_count must be >= 1")
    if mechanism == MECH_LAPLACE:
        return epsilon_total / query_count
    return epsilon_total / math.sqrt(query_count)


def delta_of_epsilon(epsilon):
    """delta(eps) = Phi(-1 + eps/2) - exp(eps) * Phi(-1 - eps/2)."""
    if epsilon < 0:
        raise InputError("epsilon must be >= 0")
    tail = normal_cdf(-1.0 - epsilon / 2.0)
    # exp(eps) alone can overflow while the product stays in [0, 1).
    second = math.exp(epsilon + math.log(tail)) if tail > 0 else 0.0
    return normal_cdf(-1.0 + epsilon / 2.0) - second


def gdp_compose(epsilons):
    """Root-sum-square composition of per-step budgets."""
    eps = [float(e) for e in epsilons]
    if not eps:
        raise InputError("cannot compose an empty budget list")
    if any(e <= 0 for e in eps):
        raise InputError("all epsilons must be positive")
    return math.sqrt(sum(e * e for e in eps))


def sample_laplace(scale, rng):
    if scale <= 0:
        raise InputError("scale must be positive")
    return float(rng.laplace(0.0, scale))


def sample_gaussian(scale, rng):
    if scale <= 0:
        raise InputError("scale must be positive")
    return float(rng.normal(0.0, scale))


@dataclass(frozen=True)
class NoiseSpec:
    mechanism: str
    scale: float  # = delta_z / epsilon_neuron

    def __post_init__(self):
        _check_mechanism(self.mechanism)
        if self.scale <= 0:
            raise InputError("noise scale must be positive")

    def sample(self, rng):
        if self.mechanism == MECH_LAPLACE:
            return sample_laplace(self.scale, rng)
        return sample_gaussian(self.scale, rng)


def exp_mechanism_weights(scores, sensitivity, epsilon):
    """Normalised sampling weights exp(eps * score / (2 * sensitivity)),
    computed with max-shift so the weight vector is shift-invariant."""
    scores = np.asarray(scores, dtype=np.float64)
    if sensitivity <= 0:
        raise InputError("score sensitivity must be positive")
    if epsilon < 0:
        raise InputError("epsilon must be >= 0")
    if abs(float(np.sum(scores)) - 1.0) > 1e-6:
        raise InputError("scores must sum to 1")
    return stable_softmax(epsilon * scores / (2.0 * sensitivity))


def exp_mechanism_sample(scores, sensitivity, epsilon, rng):
    """Draw one index with the exponential mechanism (one uniform consumed)."""
    weights = exp_mechanism_weights(scores, sensitivity, epsilon)
    u = rng.random()
    index = int(np.searchsorted(np.cumsum(weights), u, side="right"))
    return min(index, len(weights) - 1)


class PrivacyBudget:
    """Fixed pre-allocation ledger: a total budget split over Q queries.

    Internally exact: for Laplace the per-neuron budget is a rational, for
    Gaussian its square is, so `Q * (2C+1) * eps_neuron == eps_total` (and the
    squared Gaussian analogue) hold with no floating-point slack.  Charging is
    an atomic check-and-increment.
    """

    def __init__(self, epsilon_total, queries_allowed, class_count, mechanism,
                 train_size=None):
        _check_mechanism(mechanism)
        if epsilon_total <= 0:
            raise InputError("epsilon_total must be positive")
        if queries_allowed < 1:
            raise InputError("queries_allowed must be >= 1")
        if class_count < 2:
            raise InputError("class_count must be >= 2")
        self.epsilon_total = float(epsilon_total)
        self.queries_allowed = int(queries_allowed)
        self.class_count = int(class_count)
        self.mechanism = mechanism
        self.train_size = train_size
        self._answered = 0
        self._lock = threading.Lock()
        total = Fraction(self.epsilon_total)
        if mechanism == MECH_LAPLACE:
            self._neuron_exact = total / (self.queries_allowed * (2 * self.class_count + 1))
            self._neuron_sq_exact = self._neuron_exact**2
        else:
            self._neuron_sq_exact = total**2 / (
                self.queries_allowed * (4 * self.class_count + 1)
            )
            self._neuron_exact = None

    @classmethod
    def from_per_query(cls, epsilon_per_query, queries_allowed, class_count,
                       mechanism, train_size=None):
        """Build a ledger from a target per-query budget instead of a total."""
        _check_mechanism(mechanism)
        if epsilon_per_query <= 0:
            raise InputError("epsilon_per_query must be positive")
        if mechanism == MECH_LAPLACE:
            total = float(epsilon_per_query) * queries_allowed
        else:
            total = float(epsilon_per_query) * math.sqrt(queries_allowed)
        budget = cls(total, queries_allowed, class_count, mechanism, train_size)
        per = Fraction(float(epsilon_per_query))
        if mechanism == MECH_LAPLACE:
            budget._neuron_exact = per / (2 * class_count + 1)
            budget._neuron_sq_exact = budget._neuron_exact**2
        else:
            budget._neuron_sq_exact = per**2 / (4 * class_count + 1)
        return budget

    @property
    def epsilon_neuron_exact(self):
        """Rational per-neuron budget (Laplace only)."""
        if self._neuron_exact is None:
            raise InputError("exact per-neuron budget is rational only for Laplace")
        return self._neuron_exact

    @property
    def epsilon_neuron_sq_exact(self):
        """Rational squared per-neuron budget."""
        return self._neuron_sq_exact

    @property
    def epsilon_neuron(self):
        if self.mechanism == MECH_LAPLACE:
            return float(self._neuron_exact)
        return math.sqrt(float(self._neuron_sq_exact))

    @property
    def epsilon_sampling(self):
        return self.epsilon_neuron

    @property
    def epsilon_per_query(self):
        if self.mechanism == MECH_LAPLACE:
            return float(self._neuron_exact * (2 * self.class_count + 1))
        return math.sqrt(float(self._neuron_sq_exact * (4 * self.class_count + 1)))

    @property
    def delta(self):
        """Reported failure probability: 1/(10*|X|) for Gaussian runs."""
        if self.mechanism == MECH_LAPLACE:
            return 0.0
        if self.train_size:
            return 1.0 / (10.0 * self.train_size)
        return None

    @property
    def queries_answered(self):
        return self._answered

    @property
    def queries_remaining(self):
        return self.queries_allowed - self._answered

    @property
    def exhausted(self):
        return self._answered >= self.queries_allowed

    def charge(self):
        """Consume one query; atomic; raises once the allowance is spent."""
        with self._lock:
            if self._answered >= self.queries_allowed:
                raise BudgetExhaustedError(self.queries_allowed, self._answered)
            self._answered += 1
        return self.epsilon_per_query
