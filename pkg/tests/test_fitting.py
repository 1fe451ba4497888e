"""Tests for the convex single-node fits."""

import math

import numpy as np
import pytest

from loct.fitting import (fit_l1_hinge, fit_l1_logistic, objective_l1_hinge,
                          objective_l1_logistic)

from oracles import subgradient_l1_hinge, subgradient_l1_logistic


def blob_problem(n=40, p=5, seed=0, flip=0.1):
    rng = np.random.default_rng(seed)
    w_true = rng.normal(size=p)
    X = rng.normal(size=(n, p))
    y = np.sign(X @ w_true + 0.3 * rng.normal(size=n))
    y[y == 0] = 1.0
    flips = rng.random(n) < flip
    y[flips] *= -1.0
    return X, y


class TestObjectives:
    def test_logistic_by_hand(self):
        X = np.array([[1.0], [-1.0]])
        y = np.array([1.0, -1.0])
        w = np.array([2.0])
        val = objective_l1_logistic(X, y, C=3.0, w=w, b=0.0)
        assert val == pytest.approx(3.0 * 2.0 * math.log(1 + math.exp(-2.0)) + 2.0)

    def test_hinge_by_hand(self):
        X = np.array([[1.0], [-1.0]])
        y = np.array([1.0, -1.0])
        w = np.array([0.5])
        val = objective_l1_hinge(X, y, C=2.0, w=w, b=0.0)
        assert val == pytest.approx(2.0 * (0.5 + 0.5) + 0.5)

    def test_bias_not_penalized(self):
        X = np.array([[1.0]])
        y = np.array([1.0])
        a = objective_l1_logistic(X, y, 1.0, np.zeros(1), 0.0)
        b = objective_l1_logistic(X, y, 1.0, np.zeros(1), 50.0)
        assert b < a


class TestLogisticFit:
    def test_beats_subgradient_oracle(self):
        X, y = blob_problem(seed=1)
        for C in (0.1, 1.0, 10.0):
            w, b = fit_l1_logistic(X, y, C)
            mine = objective_l1_logistic(X, y, C, w, b)
            ref, _ = subgradient_l1_logistic(X, y, C, seed=1)
            assert mine <= ref + 1e-4

    def test_symmetric_data_centers_bias(self):
        X, y = blob_problem(n=30, seed=2)
        X2 = np.vstack([X, -X])
        y2 = np.concatenate([y, -y])
        w, b = fit_l1_logistic(X2, y2, C=1.0)
        assert abs(b) < 1e-4

    def test_strong_l1_zeroes_weights(self):
        X, y = blob_problem(seed=3)
        w, b = fit_l1_logistic(X, y, C=1e-8)
        assert np.all(w == 0.0)

    def test_zero_weights_leave_log_odds_bias(self):
        # heavy l1 kills w while the unpenalized bias still converges
        X, y = blob_problem(seed=3)
        w, b = fit_l1_logistic(X, y, C=1.0, l1_weight=1e6)
        assert np.all(w == 0.0)
        npos = int((y > 0).sum())
        assert b == pytest.approx(math.log(npos / (len(y) - npos)), abs=1e-3)

    def test_single_class_clamps_bias(self):
        X = np.random.default_rng(0).normal(size=(6, 3))
        w, b = fit_l1_logistic(X, np.ones(6), C=1.0)
        assert np.all(w == 0.0)
        assert b == 10.0
        w, b = fit_l1_logistic(X, -np.ones(6), C=1.0)
        assert b == -10.0

    def test_empty_input_is_zero_classifier(self):
        w, b = fit_l1_logistic(np.zeros((0, 4)), np.zeros(0), C=1.0)
        assert w.shape == (4,)
        assert np.all(w == 0.0) and b == 0.0

    def test_warm_start_no_worse(self):
        X, y = blob_problem(seed=4)
        w, b = fit_l1_logistic(X, y, C=1.0)
        f_cold = objective_l1_logistic(X, y, 1.0, w, b)
        w2, b2 = fit_l1_logistic(X, y, C=1.0, w0=w, b0=b)
        f_warm = objective_l1_logistic(X, y, 1.0, w2, b2)
        assert f_warm <= f_cold + 1e-9

    def test_deterministic(self):
        X, y = blob_problem(seed=5)
        w1, b1 = fit_l1_logistic(X, y, C=2.0)
        w2, b2 = fit_l1_logistic(X, y, C=2.0)
        assert np.array_equal(w1, w2) and b1 == b2

    def test_separable_data_classified(self):
        rng = np.random.default_rng(6)
        X = np.vstack([rng.normal(size=(20, 2)) + 3.0,
                       rng.normal(size=(20, 2)) - 3.0])
        y = np.concatenate([np.ones(20), -np.ones(20)])
        w, b = fit_l1_logistic(X, y, C=5.0)
        pred = np.sign(X @ w + b)
        assert np.all(pred == y)


class TestHingeFit:
    def test_beats_subgradient_oracle(self):
        X, y = blob_problem(seed=7)
        for C in (0.1, 1.0, 10.0):
            w, b = fit_l1_hinge(X, y, C)
            mine = objective_l1_hinge(X, y, C, w, b)
            ref = subgradient_l1_hinge(X, y, C, seed=7)
            # both routes are approximate; require close relative agreement
            assert mine <= ref * (1.0 + 2e-3)

    def test_single_class_clamps_bias(self):
        X = np.random.default_rng(1).normal(size=(5, 2))
        w, b = fit_l1_hinge(X, np.ones(5), C=1.0)
        assert np.all(w == 0.0) and b == 10.0

    def test_strong_l1_zeroes_weights(self):
        X, y = blob_problem(seed=8)
        w, b = fit_l1_hinge(X, y, C=1e-8)
        assert np.abs(w).max() < 1e-6

    def test_separable_margin(self):
        rng = np.random.default_rng(9)
        X = np.vstack([rng.normal(size=(15, 2)) + 4.0,
                       rng.normal(size=(15, 2)) - 4.0])
        y = np.concatenate([np.ones(15), -np.ones(15)])
        w, b = fit_l1_hinge(X, y, C=5.0)
        assert np.all(np.sign(X @ w + b) == y)
