import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from privout import (
    InputError,
    ModelParams,
    NetworkTopology,
    NumericError,
    loss_convexified,
    loss_plain,
)
from privout.network import convexify

from conftest import random_params


class TestLossPlain:
    def test_perfect_prediction_zero_loss(self):
        # logits strongly favour the true class -> p_true ~ 1 -> loss ~ 0
        topo = NetworkTopology.dense(2, 2, 2)
        params = ModelParams(
            weights=[np.zeros((2, 3)), np.array([[0.0, 0.0, 50.0], [0.0, 0.0, -50.0]])]
        )
        X = np.zeros((3, 2))
        y = np.zeros(3, dtype=int)
        assert loss_plain(params, topo, X, y) == pytest.approx(0.0, abs=1e-12)

    def test_known_probability_values(self):
        # direct evaluation: logits (0, 0) give p_true = 1/2 -> loss ln 2;
        # to hit 1/e and friends we use the uniform-output zero network.
        topo = NetworkTopology.dense(2, 2, 4)  # C=4 -> p_true = 1/4
        params = ModelParams(weights=[np.zeros((2, 3)), np.zeros((4, 3))])
        X = np.zeros((2, 2))
        assert loss_plain(params, topo, X, [0, 2]) == pytest.approx(math.log(4))

    def test_mixed_batch_mean(self):
        # p_true = {0.5, 0.25} -> (ln2 + ln4)/2
        expected = (math.log(2) + math.log(4)) / 2
        topo2 = NetworkTopology.dense(2, 2, 2)
        params2 = ModelParams(weights=[np.zeros((2, 3)), np.zeros((2, 3))])
        topo4 = NetworkTopology.dense(2, 2, 4)
        params4 = ModelParams(weights=[np.zeros((2, 3)), np.zeros((4, 3))])
        l1 = loss_plain(params2, topo2, np.zeros((1, 2)), [0])
        l2 = loss_plain(params4, topo4, np.zeros((1, 2)), [0])
        assert (l1 + l2) / 2 == pytest.approx(expected)
        assert (l1 + l2) / 2 == pytest.approx(1.0397, abs=1e-4)

    def test_empty_batch_rejected(self):
        topo = NetworkTopology.dense(2, 2, 2)
        params = random_params(topo, 0)
        with pytest.raises(InputError):
            loss_plain(params, topo, np.zeros((0, 2)), [])


class TestConvexify:
    def test_constant_losses_collapse(self):
        for alpha in (0.1, 1.0, 7.5):
            assert convexify(np.full(5, 0.73), alpha) == pytest.approx(0.73)

    def test_two_point_example(self):
        # l = {0, ln 2}, alpha = 1 -> ln((1 + 2)/2) = ln 1.5
        got = convexify(np.array([0.0, math.log(2)]), 1.0)
        assert got == pytest.approx(math.log(1.5))
        assert got == pytest.approx(0.405465, abs=1e-6)

    def test_no_overflow_for_huge_losses(self):
        # naive exp would overflow beyond ~709
        got = convexify(np.array([1000.0, 1001.0]), 1.0)
        assert math.isfinite(got)
        assert got == pytest.approx(1001.0 + math.log((math.exp(-1) + 1) / 2))

    def test_nan_loss_rejected(self):
        with pytest.raises(NumericError):
            convexify(np.array([1.0, float("nan")]), 1.0)

    def test_alpha_zero_limit_is_mean(self):
        # deviation from the mean is ~ alpha * var/2, so keep the spread modest
        rng = np.random.default_rng(3)
        losses = rng.uniform(0, 1, size=40)
        assert convexify(losses, 1e-4) == pytest.approx(float(np.mean(losses)), abs=1e-5)

    @settings(max_examples=100, deadline=None)
    @given(
        st.lists(st.floats(0.0, 20.0), min_size=1, max_size=30),
        st.floats(1e-3, 10.0),
    )
    def test_jensen_lower_bound(self, losses, alpha):
        losses = np.asarray(losses)
        assert convexify(losses, alpha) >= float(np.mean(losses)) - 1e-9

    @settings(max_examples=100, deadline=None)
    @given(
        st.floats(1e-3, 5.0),
        st.floats(1e-3, 5.0),
    )
    def test_monotone_in_alpha(self, a1, a2):
        losses = np.array([0.2, 1.3, 2.7, 0.9])  # fixed, non-constant
        lo, hi = sorted((a1, a2))
        assert convexify(losses, lo) <= convexify(losses, hi) + 1e-9


class TestLossConvexifiedOnNetwork:
    def test_matches_plain_at_tiny_alpha(self):
        topo = NetworkTopology.dense(4, 6, 3)
        params = random_params(topo, 4)
        rng = np.random.default_rng(5)
        X = rng.normal(size=(20, 4))
        y = rng.integers(0, 3, size=20)
        plain = loss_plain(params, topo, X, y)
        conv = loss_convexified(params, topo, X, y, alpha=1e-4)
        assert conv == pytest.approx(plain, abs=1e-5)
        assert conv >= plain - 1e-12

    def test_alpha_must_be_positive(self):
        topo = NetworkTopology.dense(4, 6, 3)
        params = random_params(topo, 4)
        with pytest.raises(InputError):
            loss_convexified(params, topo, np.zeros((2, 4)), [0, 1], alpha=0.0)
