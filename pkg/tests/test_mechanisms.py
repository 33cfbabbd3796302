import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from privout import (
    BudgetExhaustedError,
    InputError,
    NoiseSpec,
    PrivacyBudget,
    delta_of_epsilon,
    exp_mechanism_sample,
    exp_mechanism_weights,
    gdp_compose,
    per_query_budget,
    sample_gaussian,
    sample_laplace,
    split_budget,
)


class TestBudgetFormulas:
    def test_split_laplace(self):
        assert split_budget(1.0, 2, "laplace") == (0.2, 0.2)
        assert split_budget(21.0, 10, "laplace") == (1.0, 1.0)

    def test_split_gaussian(self):
        assert split_budget(3.0, 2, "gaussian") == (1.0, 1.0)  # 3/sqrt(9)

    def test_per_query(self):
        assert per_query_budget(10.0, 1000, "laplace") == pytest.approx(0.01)
        assert per_query_budget(5.0, 25, "gaussian") == 1.0
        assert per_query_budget(7.25, 1, "laplace") == 7.25
        assert per_query_budget(7.25, 1, "gaussian") == 7.25

    def test_validation(self):
        with pytest.raises(InputError):
            split_budget(0.0, 2, "laplace")
        with pytest.raises(InputError):
            split_budget(1.0, 1, "laplace")
        with pytest.raises(InputError):
            per_query_budget(1.0, 0, "laplace")
        with pytest.raises(InputError):
            split_budget(1.0, 2, "cauchy")


class TestDeltaOfEpsilon:
    def test_reference_points(self):
        # frozen from the 50-digit mpmath oracle (see oracle() below)
        assert delta_of_epsilon(0.0) == 0.0
        assert delta_of_epsilon(1.0) == pytest.approx(0.12693673750664394, abs=1e-10)
        assert delta_of_epsilon(2.0) == pytest.approx(0.33189799877682939, abs=1e-10)

    def test_against_high_precision_oracle(self):
        mp = pytest.importorskip("mpmath")
        mp.mp.dps = 50

        def oracle(e):
            e = mp.mpf(e)
            return float(mp.ncdf(-1 + e / 2) - mp.exp(e) * mp.ncdf(-1 - e / 2))

        for e in (0.0, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0):
            assert delta_of_epsilon(e) == pytest.approx(oracle(e), abs=1e-10)

    def test_monotone_and_bounded_on_grid(self):
        grid = np.linspace(0.0, 20.0, 401)
        values = [delta_of_epsilon(e) for e in grid]
        # the true value stays below 1 everywhere on [0, 20]; past eps ~ 18.5
        # the gap (~1e-17) is smaller than one ulp of 1.0, so the correctly
        # rounded double saturates at exactly 1.0
        assert all(0.0 <= v <= 1.0 for v in values)
        assert all(v < 1.0 for e, v in zip(grid, values) if e <= 15.0)
        assert all(b >= a - 1e-15 for a, b in zip(values, values[1:]))

    def test_negative_rejected(self):
        with pytest.raises(InputError):
            delta_of_epsilon(-0.5)


class TestGdpCompose:
    def test_pythagorean(self):
        assert gdp_compose([3.0, 4.0]) == 5.0

    def test_repeated(self):
        assert gdp_compose([0.3] * 16) == pytest.approx(0.3 * 4)

    def test_identity(self):
        assert gdp_compose([1.0]) == 1.0

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            gdp_compose([])


class TestSamplers:
    def test_laplace_moments(self):
        rng = np.random.default_rng(42)
        draws = np.array([sample_laplace(2.0, rng) for _ in range(200_000)])
        assert abs(draws.mean()) < 0.02
        assert draws.var() == pytest.approx(8.0, rel=0.03)  # 2 b^2

    def test_gaussian_moments(self):
        rng = np.random.default_rng(43)
        draws = np.array([sample_gaussian(2.0, rng) for _ in range(200_000)])
        assert abs(draws.mean()) < 0.02
        assert draws.var() == pytest.approx(4.0, rel=0.03)

    def test_stream_determinism(self):
        a = [sample_laplace(1.5, np.random.default_rng(7)) for _ in range(5)]
        b = [sample_laplace(1.5, np.random.default_rng(7)) for _ in range(5)]
        assert a == b
        a = [sample_gaussian(1.5, np.random.default_rng(7)) for _ in range(5)]
        b = [sample_gaussian(1.5, np.random.default_rng(7)) for _ in range(5)]
        assert a == b

    def test_scale_validation(self):
        rng = np.random.default_rng(0)
        with pytest.raises(InputError):
            sample_laplace(0.0, rng)
        with pytest.raises(InputError):
            NoiseSpec("gaussian", -1.0)

    def test_noise_spec_dispatch(self):
        lap = NoiseSpec("laplace", 2.0)
        gau = NoiseSpec("gaussian", 2.0)
        assert lap.sample(np.random.default_rng(5)) == sample_laplace(
            2.0, np.random.default_rng(5)
        )
        assert gau.sample(np.random.default_rng(5)) == sample_gaussian(
            2.0, np.random.default_rng(5)
        )


def closed_form_weights(p, eps, sensitivity):
    """Direct textbook evaluation, no max-shift (safe at test scales)."""
    raw = [math.exp(eps * v / (2 * sensitivity)) for v in p]
    total = sum(raw)
    return [r / total for r in raw]


class TestExpMechanism:
    def test_weights_match_closed_form(self):
        p = np.array([0.9, 0.1])
        got = exp_mechanism_weights(p, 1.0, 2.0)
        want = closed_form_weights(p, 2.0, 1.0)
        assert got == pytest.approx(want, abs=1e-12)
        assert got[0] == pytest.approx(0.6900, abs=1e-4)

    def test_weights_shift_invariant_exactly(self):
        # max-shift makes the weights an exact identity under constant shifts;
        # dyadic exponents and shift keep the additions themselves exact
        from privout.numerics import stable_softmax

        exponents = np.array([0.25, 0.5, 0.125, -0.75])
        for shift in (64.0, -256.0, 0.03125):
            shifted = stable_softmax(exponents + shift)
            assert np.array_equal(shifted, stable_softmax(exponents))

    def test_weights_use_max_shift(self):
        # exponents far beyond exp() range still produce a clean distribution
        p = np.array([0.9, 0.1])
        got = exp_mechanism_weights(p, 1e-300, 1.0)
        assert got[0] == 1.0 and got[1] == 0.0

    def test_zero_epsilon_uniform(self):
        rng = np.random.default_rng(1)
        p = np.array([0.7, 0.2, 0.1])
        counts = np.zeros(3)
        n = 100_000
        for _ in range(n):
            counts[exp_mechanism_sample(p, 1.0, 0.0, rng)] += 1
        for c in counts:
            sigma = math.sqrt(n * (1 / 3) * (2 / 3))
            assert abs(c - n / 3) <= 3 * sigma

    @pytest.mark.parametrize(
        "p,eps,sens",
        [
            ((0.9, 0.1), 2.0, 1.0),
            ((0.5, 0.3, 0.2), 1.0, 0.4538),
            ((0.25, 0.25, 0.25, 0.25), 5.0, 1.0),
        ],
    )
    def test_empirical_frequencies(self, p, eps, sens):
        rng = np.random.default_rng(2)
        p = np.array(p)
        want = closed_form_weights(p, eps, sens)
        n = 100_000
        counts = np.zeros(len(p))
        for _ in range(n):
            counts[exp_mechanism_sample(p, sens, eps, rng)] += 1
        for i, w in enumerate(want):
            sigma = math.sqrt(n * w * (1 - w))
            assert abs(counts[i] - n * w) <= 3 * sigma

    def test_huge_epsilon_concentrates_on_argmax(self):
        rng = np.random.default_rng(3)
        p = np.array([0.2, 0.5, 0.3])
        hits = sum(
            exp_mechanism_sample(p, 1.0, 1e4, rng) == 1 for _ in range(10_000)
        )
        assert hits / 10_000 > 0.999

    def test_sensitivity_validation(self):
        with pytest.raises(InputError):
            exp_mechanism_sample(np.array([0.5, 0.5]), 0.0, 1.0, np.random.default_rng(0))
        with pytest.raises(InputError):
            exp_mechanism_weights(np.array([0.5, 0.6]), 1.0, 1.0)  # not a distribution


class TestPrivacyBudget:
    def test_laplace_algebra_exact(self):
        budget = PrivacyBudget(10.0, 1000, 2, "laplace")
        assert budget.queries_allowed * (2 * 2 + 1) * budget.epsilon_neuron_exact \
            == Fraction(10.0)
        assert budget.epsilon_per_query == pytest.approx(0.01)
        assert budget.epsilon_sampling == budget.epsilon_neuron

    def test_gaussian_algebra_exact(self):
        budget = PrivacyBudget(5.0, 25, 3, "gaussian")
        assert budget.queries_allowed * (4 * 3 + 1) * budget.epsilon_neuron_sq_exact \
            == Fraction(5.0) ** 2
        assert budget.epsilon_per_query == pytest.approx(1.0)
        assert budget.epsilon_neuron == pytest.approx(1.0 / math.sqrt(13))

    def test_float_recomposition_close(self):
        budget = PrivacyBudget(10.0, 1000, 2, "laplace")
        assert 1000 * 5 * budget.epsilon_neuron == pytest.approx(10.0, rel=1e-12)
        budget = PrivacyBudget(10.0, 1000, 2, "gaussian")
        assert math.sqrt(1000) * 3 * budget.epsilon_neuron == pytest.approx(
            10.0, rel=1e-12
        )

    def test_from_per_query(self):
        budget = PrivacyBudget.from_per_query(0.01, 3600, 30, "gaussian", train_size=1200)
        assert budget.epsilon_per_query == pytest.approx(0.01)
        assert budget.epsilon_neuron == pytest.approx(0.01 / math.sqrt(121))
        assert budget.epsilon_total == pytest.approx(0.01 * 60)
        assert budget.delta == 1.0 / 12_000

    def test_delta_rules(self):
        assert PrivacyBudget(1.0, 1, 2, "laplace").delta == 0.0
        assert PrivacyBudget(1.0, 1, 2, "gaussian", train_size=10_000).delta == 1e-5
        assert PrivacyBudget(1.0, 1, 2, "gaussian").delta is None

    def test_ledger_refuses_query_q_plus_one(self):
        budget = PrivacyBudget(1.0, 3, 2, "laplace")
        for _ in range(3):
            budget.charge()
        assert budget.exhausted
        with pytest.raises(BudgetExhaustedError) as info:
            budget.charge()
        assert info.value.queries_allowed == 3
        assert info.value.queries_answered == 3
        assert budget.queries_answered == 3  # refused query not recorded

    def test_charge_returns_per_query_epsilon(self):
        budget = PrivacyBudget(10.0, 4, 2, "laplace")
        assert budget.charge() == budget.epsilon_per_query
        assert budget.queries_remaining == 3

    def test_concurrent_charges_never_overrun(self):
        import threading

        budget = PrivacyBudget(1.0, 50, 2, "laplace")
        refused = []

        def worker():
            for _ in range(20):
                try:
                    budget.charge()
                except BudgetExhaustedError:
                    refused.append(1)

        threads = [threading.Thread(target=worker) for _ in range(5)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert budget.queries_answered == 50
        assert len(refused) == 50  # 5*20 attempts, 50 granted


@settings(max_examples=100, deadline=None)
@given(
    st.floats(1e-3, 1e3),
    st.integers(1, 10_000),
    st.integers(2, 200),
)
def test_budget_algebra_exact_property(eps_total, queries, classes):
    lap = PrivacyBudget(eps_total, queries, classes, "laplace")
    assert queries * (2 * classes + 1) * lap.epsilon_neuron_exact == Fraction(eps_total)
    gau = PrivacyBudget(eps_total, queries, classes, "gaussian")
    assert queries * (4 * classes + 1) * gau.epsilon_neuron_sq_exact \
        == Fraction(eps_total) ** 2
