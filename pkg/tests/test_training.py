"""Tests for the training pipeline: warm start, solve, refine, CV."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loct.dataset import Dataset
from loct.formulation import LossSpec, RegularizerSpec, build_olct
from loct.solver import SolverConfig, validate_assignment
from loct.training import (TrainConfig, apply_grid_point, assemble_assignment,
                           build_model, cross_validate, decode_solution,
                           exact_objective, greedy_warm_start,
                           refine_last_layer, train, _resolve_epsilon_gap)
from loct.tree import TreeModel, TreeTopology

from conftest import checked_train


def blobs(n=12, p=2, gap=3.0, seed=0):
    rng = np.random.default_rng(seed)
    half = n // 2
    X = np.vstack([rng.normal(size=(half, p)) * 0.4 + gap,
                   rng.normal(size=(n - half, p)) * 0.4 - gap])
    y = np.concatenate([np.ones(half), -np.ones(n - half)])
    return Dataset(X, y)


def xor_blobs(n_per=4, seed=0):
    rng = np.random.default_rng(seed)
    centers = [(1, 1, -1), (-1, -1, -1), (1, -1, 1), (-1, 1, 1)]
    X, y = [], []
    for cx, cy, lab in centers:
        X.append(rng.normal(size=(n_per, 2)) * 0.08 + (cx, cy))
        y.append(np.full(n_per, lab))
    return Dataset(np.vstack(X), np.concatenate(y).astype(float))


def quick(depth=2, **kw):
    defaults = dict(
        depth=depth,
        loss=LossSpec("logistic_pwl", (1.0,), "V0"),
        reg=RegularizerSpec("l1"),
        solver=SolverConfig(time_limit_seconds=20.0),
    )
    defaults.update(kw)
    return TrainConfig(**defaults)


class TestConfig:
    def test_depth_validated(self):
        with pytest.raises(ValueError, match="depth"):
            quick(depth=0)

    def test_layer_cost_length_validated(self):
        with pytest.raises(ValueError, match="per-layer"):
            quick(depth=3, loss=LossSpec("logistic_pwl", (1.0, 2.0), "V0"))

    def test_epsilon_validated(self):
        with pytest.raises(ValueError):
            quick(epsilon=0.0)


class TestEpsilonGap:
    def test_no_gap_no_shift(self):
        assert _resolve_epsilon_gap(np.array([-1.0, 2.0]), 1e-5) == 0.0

    def test_single_score_in_gap(self):
        shift = _resolve_epsilon_gap(np.array([5e-6]), 1e-5)
        assert shift == 5e-6

    def test_shifted_scores_leave_gap_empty(self):
        scores = np.array([1e-6, 5e-6, 9e-6, 2e-5, -1.0])
        eps = 1e-5
        shift = _resolve_epsilon_gap(scores, eps)
        s = scores - shift
        assert not np.any((s > 0.0) & (s < eps))

    @given(st.lists(st.floats(-1.0, 1.0), min_size=1, max_size=20),
           st.sampled_from([1e-7, 1e-5, 1e-3]))
    @settings(max_examples=120, deadline=None)
    def test_resolution_property(self, raw, eps):
        scores = np.asarray(raw)
        shift = _resolve_epsilon_gap(scores, eps)
        assert shift >= 0.0
        s = scores - shift
        assert not np.any((s > 0.0) & (s < eps))


class TestWarmStart:
    @pytest.mark.parametrize("loss,reg", [
        (LossSpec("logistic_pwl", (1.0,), "V0"), RegularizerSpec("l1")),
        (LossSpec("logistic_pwl", (2.0,), "V1"), RegularizerSpec("none")),
        (LossSpec("hinge", (1.0,)), RegularizerSpec("l1")),
        (LossSpec("misclassification", (1.0,)), RegularizerSpec("none")),
        (LossSpec("logistic_pwl", (1.0,), "V0"),
         RegularizerSpec("hfs", hfs_budget=1)),
        (LossSpec("logistic_pwl", (1.0,), "V0"),
         RegularizerSpec("sfs", alpha=0.1, sfs_budgets=(1.0,))),
    ])
    def test_assignment_feasible_across_formulations(self, loss, reg):
        data = xor_blobs(seed=3)
        config = quick(loss=loss, reg=reg)
        model = build_model(data, config)
        tree, values = greedy_warm_start(data, config, model)
        assert validate_assignment(model, values) == []

    def test_separable_depth_one_is_perfect(self):
        data = blobs(seed=1)
        config = quick(depth=1)
        tree, _ = greedy_warm_start(data, config)
        assert np.all(tree.predict(data.features) == data.labels)

    def test_empty_node_keeps_zero_weights(self):
        # all mass on one side of the root leaves a child unpopulated
        data = blobs(n=10, seed=2)
        config = quick()
        tree, _ = greedy_warm_start(data, config)
        paths = tree.route(data.features)
        visited = set(paths.ravel().tolist())
        empty = [t for t in config.topology.branch_nodes if t not in visited]
        for t in empty:
            assert np.all(tree.weights[t] == 0.0)
            assert tree.biases[t] == 0.0

    def test_surrogate_below_exact_for_pwl(self):
        data = xor_blobs(seed=5)
        report = checked_train(data, quick())
        assert report.warm_start_surrogate <= report.warm_start_exact + 1e-9

    def test_hinge_surrogate_equals_exact(self):
        data = blobs(seed=6)
        report = checked_train(data, quick(loss=LossSpec("hinge", (1.0,))))
        assert report.warm_start_surrogate == pytest.approx(
            report.warm_start_exact, abs=1e-7)


class TestAssembleDecode:
    def test_round_trip_preserves_tree(self):
        data = xor_blobs(seed=7)
        config = quick()
        model = build_model(data, config)
        tree, values = greedy_warm_start(data, config, model)
        decoded, mismatches = decode_solution(model, values, config, data)
        assert mismatches == 0
        assert decoded.weights == pytest.approx(tree.weights, abs=1e-12)
        assert decoded.biases == pytest.approx(tree.biases, abs=1e-12)
        assert np.array_equal(decoded.route(data.features),
                              tree.route(data.features))

    def test_decode_snaps_near_integers(self):
        data = blobs(n=6, seed=8)
        config = quick(depth=1)
        model = build_model(data, config)
        tree, values = greedy_warm_start(data, config, model)
        fuzzed = values.copy()
        zcols = [model.column_of(v.name) for v in model.variables
                 if v.name.startswith("z[")]
        fuzzed[zcols] += np.where(fuzzed[zcols] > 0.5, -1e-8, 1e-8)
        decoded, mismatches = decode_solution(model, fuzzed, config, data)
        assert mismatches == 0


class TestExactObjective:
    def test_depth_one_logistic_by_hand(self):
        X = np.array([[1.0], [-2.0]])
        y = np.array([1.0, -1.0])
        data = Dataset(X, y)
        topo = TreeTopology(1)
        tree = TreeModel(topo, np.array([[3.0]]), np.array([0.5]))
        loss = LossSpec("logistic_pwl", (2.0,), "V0")
        val = exact_objective(tree, data, loss, RegularizerSpec("l1"))
        margins = y * (X @ np.array([3.0]) + 0.5)
        expected = 2.0 * float(np.logaddexp(0.0, -margins).sum()) + 3.0
        assert val == pytest.approx(expected, abs=1e-12)

    def test_misclassification_counts(self):
        X = np.array([[1.0], [2.0], [-1.0]])
        y = np.array([1.0, -1.0, -1.0])
        data = Dataset(X, y)
        tree = TreeModel(TreeTopology(1), np.array([[1.0]]), np.array([0.0]),
                         loss_kind="misclassification")
        loss = LossSpec("misclassification", (1.5,))
        val = exact_objective(tree, data, loss, RegularizerSpec("none"))
        # point 2 scores +2 and is predicted +1 against its -1 label
        assert val == pytest.approx(1.5)

    def test_sfs_penalty_term(self):
        X = np.array([[1.0, 0.0], [-1.0, 0.0]])
        y = np.array([1.0, -1.0])
        data = Dataset(X, y)
        tree = TreeModel(TreeTopology(1), np.array([[2.0, 1.0]]),
                         np.array([0.0]))
        loss = LossSpec("logistic_pwl", (1.0,), "V0")
        reg = RegularizerSpec("sfs", alpha=0.25, sfs_budgets=(1.0,))
        with_sfs = exact_objective(tree, data, loss, reg)
        plain = exact_objective(tree, data, loss, RegularizerSpec("l1"))
        # two nonzero weights against a budget of one
        assert with_sfs == pytest.approx(plain + 0.25 * 2.0)


class TestRefine:
    def test_never_increases_exact_objective(self):
        data = xor_blobs(seed=9)
        config = quick()
        tree, _ = greedy_warm_start(data, config)
        before = exact_objective(tree, data, config.loss, config.reg)
        refined, n_ref = refine_last_layer(tree, data, config)
        after = exact_objective(refined, data, config.loss, config.reg)
        assert after <= before + 1e-9

    def test_refinement_is_idempotent_on_objective(self):
        data = xor_blobs(seed=10)
        config = quick()
        tree, _ = greedy_warm_start(data, config)
        once, _ = refine_last_layer(tree, data, config)
        f_once = exact_objective(once, data, config.loss, config.reg)
        twice, _ = refine_last_layer(once, data, config)
        f_twice = exact_objective(twice, data, config.loss, config.reg)
        assert f_twice <= f_once + 1e-9
        assert f_twice == pytest.approx(f_once, abs=1e-6)

    def test_upper_layers_untouched(self):
        data = xor_blobs(seed=11)
        config = quick()
        tree, _ = greedy_warm_start(data, config)
        refined, _ = refine_last_layer(tree, data, config)
        for t in config.topology.branch_nodes:
            if t in config.topology.last_layer:
                continue
            assert np.array_equal(refined.weights[t], tree.weights[t])
            assert refined.biases[t] == tree.biases[t]


class TestTrainPipeline:
    def test_xor_solved_to_optimality(self):
        data = xor_blobs(seed=12)
        report = checked_train(data, quick(solver=SolverConfig(
            time_limit_seconds=60.0)))
        assert report.mip_status == "optimal"
        assert np.all(report.model.predict(data.features) == data.labels)
        assert report.post_solve_objective <= report.warm_start_surrogate + 1e-9

    def test_remark_one_holds(self):
        data = xor_blobs(seed=13)
        report = checked_train(data, quick())
        assert report.post_refine_exact <= report.post_solve_exact + 1e-9
        assert report.routing_mismatches == 0

    def test_no_refine_keeps_post_solve(self):
        data = blobs(seed=14)
        report = checked_train(data, quick(depth=1, refine=False))
        assert report.post_refine_exact == report.post_solve_exact
        assert report.refined_nodes == 0

    def test_cold_start_still_solves(self):
        data = blobs(seed=15)
        report = checked_train(data, quick(depth=1, use_warm_start=False,
                                           use_heuristic=False))
        assert report.mip_status == "optimal"
        assert report.warm_start_exact is None
        assert report.warm_start_surrogate is None

    def test_misclass_pipeline(self):
        data = blobs(seed=16)
        config = quick(depth=1, loss=LossSpec("misclassification", (1.0,)),
                       reg=RegularizerSpec("none"))
        report = checked_train(data, config)
        assert report.mip_status == "optimal"
        assert report.post_refine_exact == pytest.approx(0.0, abs=1e-9)

    def test_hfs_budget_respected_after_training(self):
        data = xor_blobs(seed=17)
        config = quick(reg=RegularizerSpec("hfs", hfs_budget=1))
        report = checked_train(data, config)
        for t in config.topology.branch_nodes:
            nnz = int((np.abs(report.model.weights[t]) > 1e-6).sum())
            assert nnz <= 1

    def test_report_json_round_trip(self):
        data = blobs(seed=18)
        report = checked_train(data, quick(depth=1))
        payload = report.to_json_dict()
        assert payload["depth"] == 1
        assert payload["mip_status"] == report.mip_status
        assert payload["post_refine_exact"] == report.post_refine_exact


class TestCrossValidate:
    def test_single_point_grid(self):
        data = blobs(n=12, seed=19)
        base = quick(depth=1, solver=SolverConfig(time_limit_seconds=10.0))
        best, records = cross_validate(data, base, [{"slack_costs": 1.0}],
                                       folds=2)
        assert best.loss.slack_costs == (1.0,)
        assert len(records) == 2
        assert all(r.grid_index == 0 for r in records)
        assert all(0.0 <= r.bacc <= 1.0 for r in records)

    def test_grid_search_covers_all_points(self):
        data = blobs(n=12, seed=20)
        base = quick(depth=1, solver=SolverConfig(time_limit_seconds=10.0))
        grid = [{"slack_costs": 0.01}, {"slack_costs": 1.0}]
        best, records = cross_validate(data, base, grid, folds=2)
        assert len(records) == 4
        assert {r.grid_index for r in records} == {0, 1}
        assert best.loss.slack_costs in ((0.01,), (1.0,))

    def test_tie_prefers_stronger_regularization(self):
        # without l1 both C values separate the blobs perfectly, so the
        # accuracy tie must break toward the smaller slack cost
        data = blobs(n=16, gap=4.0, seed=21)
        base = quick(depth=1, reg=RegularizerSpec("none"),
                     solver=SolverConfig(time_limit_seconds=10.0))
        grid = [{"slack_costs": 100.0}, {"slack_costs": 0.01}]
        best, records = cross_validate(data, base, grid, folds=2)
        baccs = {}
        for r in records:
            baccs.setdefault(r.grid_index, []).append(r.bacc)
        assert np.mean(baccs[0]) == np.mean(baccs[1]) == 1.0
        assert best.loss.slack_costs == (0.01,)

    def test_empty_grid_rejected(self):
        data = blobs(seed=22)
        with pytest.raises(ValueError, match="grid"):
            cross_validate(data, quick(depth=1), [], folds=2)

    def test_apply_grid_point_merges(self):
        base = quick(reg=RegularizerSpec("sfs", alpha=1.0,
                                         sfs_budgets=(1.0,)))
        out = apply_grid_point(base, {"slack_costs": (2.0, 3.0),
                                      "alpha": 0.5})
        assert out.loss.slack_costs == (2.0, 3.0)
        assert out.reg.alpha == 0.5
        assert base.loss.slack_costs == (1.0,)
