"""Tests for the bounded-variable primal simplex."""

import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loct.simplex import LpTimeout, make_standard_lp, solve_bounded_lp

from oracles import scipy_solve_std, vertex_enumeration_lp


def lp(c, rows, senses, rhs, lower, upper):
    """Build a StandardLp from dense row coefficient lists."""
    n = len(c)
    a_rows = [(list(range(n)), coefs) for coefs in rows]
    return make_standard_lp(c, a_rows, senses, rhs, lower, upper)


class TestHandInstances:
    def test_single_bound_row(self):
        std = lp([1.0], [[1.0]], [">="], [3.0], [0.0], [10.0])
        sol = solve_bounded_lp(std)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(3.0, abs=1e-9)
        assert sol.values[0] == pytest.approx(3.0, abs=1e-9)

    def test_contradictory_rows_infeasible(self):
        std = lp([1.0], [[1.0], [1.0]], [">=", "<="], [1.0, 0.0],
                 [-10.0], [10.0])
        sol = solve_bounded_lp(std)
        assert sol.status == "infeasible"
        assert sol.objective == math.inf

    def test_unbounded_direction(self):
        std = lp([-1.0], [[0.0]], ["<="], [1.0], [0.0], [math.inf])
        sol = solve_bounded_lp(std)
        assert sol.status == "unbounded"

    def test_box_only_problem(self):
        c = [2.0, -3.0, 0.5]
        std = make_standard_lp(c, [], [], [], [-1.0, -2.0, 0.0],
                               [4.0, 5.0, 2.0])
        sol = solve_bounded_lp(std)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(2 * -1 + -3 * 5 + 0.5 * 0)
        assert sol.values == pytest.approx([-1.0, 5.0, 0.0])

    def test_equality_row(self):
        std = lp([1.0, 1.0], [[1.0, 2.0]], ["="], [4.0],
                 [0.0, 0.0], [10.0, 10.0])
        sol = solve_bounded_lp(std)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(2.0, abs=1e-9)
        assert sol.values == pytest.approx([0.0, 2.0], abs=1e-9)

    def test_free_variable(self):
        std = lp([1.0], [[1.0]], [">="], [-5.0], [-math.inf], [math.inf])
        sol = solve_bounded_lp(std)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(-5.0, abs=1e-9)

    def test_fixed_variables(self):
        std = lp([1.0, 1.0], [[1.0, 1.0]], ["<="], [10.0],
                 [2.0, 0.0], [2.0, 5.0])
        sol = solve_bounded_lp(std)
        assert sol.status == "optimal"
        assert sol.values[0] == 2.0

    def test_costs_override(self):
        std = lp([1.0, 1.0], [[1.0, 1.0]], [">="], [1.0],
                 [0.0, 0.0], [5.0, 5.0])
        base = solve_bounded_lp(std)
        flipped = solve_bounded_lp(std, costs=np.array([5.0, -1.0]))
        assert base.objective == pytest.approx(1.0, abs=1e-9)
        assert flipped.status == "optimal"
        assert flipped.objective == pytest.approx(-5.0, abs=1e-9)
        assert flipped.values == pytest.approx([0.0, 5.0], abs=1e-9)

    def test_bound_override_makes_infeasible(self):
        std = lp([1.0], [[1.0]], ["<="], [3.0], [0.0], [10.0])
        sol = solve_bounded_lp(std, lower=np.array([4.0]),
                               upper=np.array([10.0]))
        assert sol.status == "infeasible"

    def test_degenerate_vertex(self):
        # three rows meet at the optimum (0, 0)
        std = lp([1.0, 1.0],
                 [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
                 [">=", ">=", ">="], [0.0, 0.0, 0.0],
                 [-5.0, -5.0], [5.0, 5.0])
        sol = solve_bounded_lp(std)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(0.0, abs=1e-9)

    def test_deadline_in_past_raises(self):
        std = lp([1.0], [[1.0]], [">="], [3.0], [0.0], [10.0])
        with pytest.raises(LpTimeout):
            solve_bounded_lp(std, deadline=time.monotonic() - 1.0)

    def test_reversed_bounds_are_an_empty_box(self):
        std = lp([1.0], [[1.0]], ["<="], [3.0], [5.0], [2.0])
        assert solve_bounded_lp(std).status == "infeasible"


def random_instance(rng, n=None, m=None, infeasible_bias=False):
    n = n or int(rng.integers(1, 12))
    m = m or int(rng.integers(0, 18))
    c = rng.normal(size=n)
    rows = rng.normal(size=(m, n)) * (rng.random((m, n)) < 0.6)
    senses = rng.choice(["<=", ">=", "="], size=m,
                        p=[0.45, 0.45, 0.1]).tolist()
    rhs = rng.normal(size=m) * 2.0
    lower = np.where(rng.random(n) < 0.8, -rng.random(n) * 4.0, -math.inf)
    upper = np.where(rng.random(n) < 0.8, rng.random(n) * 4.0, math.inf)
    upper = np.maximum(upper, lower)
    if infeasible_bias and m >= 2:
        # duplicate a row with conflicting right-hand sides
        rows[1] = rows[0]
        senses[0], senses[1] = ">=", "<="
        rhs[1] = rhs[0] - abs(rng.normal()) - 0.5
    a_rows = [(np.arange(n), rows[i]) for i in range(m)]
    return make_standard_lp(c, a_rows, senses, rhs, lower, upper)


class TestAgainstScipy:
    def test_random_suite(self):
        rng = np.random.default_rng(20240817)
        statuses = {"optimal": 0, "infeasible": 0, "unbounded": 0}
        for k in range(150):
            std = random_instance(rng, infeasible_bias=(k % 5 == 0))
            ref_status, ref_obj, _ = scipy_solve_std(std)
            sol = solve_bounded_lp(std)
            assert sol.status == ref_status, f"instance {k}"
            statuses[ref_status] += 1
            if ref_status == "optimal":
                assert sol.objective == pytest.approx(ref_obj, abs=1e-6), \
                    f"instance {k}"
                # the reported point must attain the reported objective
                assert float(std.c @ sol.values) == pytest.approx(
                    sol.objective, abs=1e-7)
        # the suite must genuinely exercise all three verdicts
        assert min(statuses.values()) >= 5

    def test_larger_instances(self):
        rng = np.random.default_rng(7)
        for k in range(25):
            std = random_instance(rng, n=int(rng.integers(15, 30)),
                                  m=int(rng.integers(20, 45)))
            ref_status, ref_obj, _ = scipy_solve_std(std)
            sol = solve_bounded_lp(std)
            assert sol.status == ref_status, f"instance {k}"
            if ref_status == "optimal":
                assert sol.objective == pytest.approx(ref_obj, abs=1e-6)

    def test_bound_and_cost_overrides_match(self):
        rng = np.random.default_rng(99)
        for k in range(30):
            std = random_instance(rng)
            n = std.n_cols
            lo = std.lower.copy()
            hi = std.upper.copy()
            pick = rng.random(n) < 0.3
            lo[pick] = 0.0
            hi[pick] = 0.0
            costs = rng.normal(size=n)
            ref_status, ref_obj, _ = scipy_solve_std(std, lo, hi, costs)
            sol = solve_bounded_lp(std, lo, hi, costs)
            assert sol.status == ref_status, f"instance {k}"
            if ref_status == "optimal":
                assert sol.objective == pytest.approx(ref_obj, abs=1e-6)


class TestAgainstVertexEnumeration:
    def test_tiny_boxed_suite(self):
        rng = np.random.default_rng(4242)
        solved = 0
        for k in range(60):
            n = int(rng.integers(1, 4))
            m = int(rng.integers(1, 4))
            c = rng.normal(size=n)
            rows = rng.normal(size=(m, n))
            senses = rng.choice(["<=", ">=", "="], size=m,
                                p=[0.45, 0.45, 0.1]).tolist()
            rhs = rng.normal(size=m)
            lower = -1.0 - rng.random(n)
            upper = 1.0 + rng.random(n)
            ref_status, ref_obj, _ = vertex_enumeration_lp(
                c, rows, senses, rhs, lower, upper)
            a_rows = [(np.arange(n), rows[i]) for i in range(m)]
            std = make_standard_lp(c, a_rows, senses, rhs, lower, upper)
            sol = solve_bounded_lp(std)
            assert sol.status == ref_status, f"instance {k}"
            if ref_status == "optimal":
                solved += 1
                assert sol.objective == pytest.approx(ref_obj, abs=1e-7), \
                    f"instance {k}"
        assert solved >= 20


class TestSolutionQuality:
    def test_row_residuals_and_bounds(self):
        rng = np.random.default_rng(11)
        for k in range(40):
            std = random_instance(rng)
            sol = solve_bounded_lp(std)
            if sol.status != "optimal":
                continue
            x = sol.values
            assert np.all(x >= std.lower - 1e-7)
            assert np.all(x <= std.upper + 1e-7)
            act = std.A @ x
            for r in range(std.n_rows):
                if std.senses[r] == "<":
                    assert act[r] <= std.rhs[r] + 1e-6
                elif std.senses[r] == ">":
                    assert act[r] >= std.rhs[r] - 1e-6
                else:
                    assert act[r] == pytest.approx(std.rhs[r], abs=1e-6)

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_box_only_optimum_property(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 8))
        c = rng.normal(size=n)
        lower = -rng.random(n) * 3.0
        upper = rng.random(n) * 3.0
        std = make_standard_lp(c, [], [], [], lower, upper)
        sol = solve_bounded_lp(std)
        assert sol.status == "optimal"
        best = float(np.minimum(c * lower, c * upper).sum())
        assert sol.objective == pytest.approx(best, abs=1e-9)
