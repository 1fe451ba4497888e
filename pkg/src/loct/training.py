"""Training pipeline: greedy warm start, MILP solve, last-layer refinement.

The three stages are reported with the exact loss (true logistic, hinge
or 0-1 loss at the routed nodes, plus the active regularization terms)
so runs are comparable across tangent sets. The MILP's own objective is
the piecewise-linear surrogate and is reported separately.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .dataset import Dataset, SplitSpec, kfolds
from .fitting import fit_l1_hinge, fit_l1_logistic
from .formulation import (LossSpec, MilpModel, RegularizerSpec, add_l0_structure,
                          build_oct_misclass, build_olct, gated_loss_lines,
                          hinge_loss, logistic_loss, _build_gated_slack_model)
from .solver import SolverConfig, solve_mip, validate_assignment
from .tree import TreeModel, TreeTopology

logger = logging.getLogger("loct.training")

_ZERO_TOL = 1e-6
_SNAP_TOL = 1e-6


@dataclass
class TrainConfig:
    """Everything a training run needs.

    ``use_warm_start`` seeds the solver with the greedy tree;
    ``use_heuristic`` lets the solver round node relaxations into
    candidate trees during the search.
    """

    depth: int
    loss: LossSpec
    reg: RegularizerSpec = field(default_factory=RegularizerSpec)
    big_m: float = 100.0
    epsilon: float = 1e-5
    solver: SolverConfig = field(default_factory=SolverConfig)
    refine: bool = True
    seed: int = 0
    use_warm_start: bool = True
    use_heuristic: bool = True

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        if self.big_m <= 0 or self.epsilon <= 0:
            raise ValueError("big_m and epsilon must be positive")
        self.loss.layer_costs(self.depth)  # validates length

    @property
    def topology(self) -> TreeTopology:
        return TreeTopology(self.depth)


@dataclass
class TrainReport:
    """Objectives of the three pipeline stages plus solver summary.

    Exact objectives use the true loss at deterministically routed
    points; ``post_solve_objective`` is the MILP incumbent's surrogate
    objective. Refinement never increases the exact objective, so
    ``post_refine_exact <= post_solve_exact + 1e-9`` always holds.
    """

    model: TreeModel
    warm_start_exact: Optional[float]
    warm_start_surrogate: Optional[float]
    post_solve_exact: float
    post_solve_objective: float
    post_refine_exact: float
    mip_status: str
    mip_bound: float
    mip_gap: float
    mip_nodes: int
    elapsed_seconds: float
    routing_mismatches: int
    refined_nodes: int
    big_m: float
    epsilon: float
    depth: int
    loss_kind: str
    reg_kind: str

    def to_json_dict(self) -> dict:
        return {
            "depth": self.depth,
            "loss_kind": self.loss_kind,
            "reg_kind": self.reg_kind,
            "big_m": self.big_m,
            "epsilon": self.epsilon,
            "warm_start_exact": self.warm_start_exact,
            "warm_start_surrogate": self.warm_start_surrogate,
            "post_solve_exact": self.post_solve_exact,
            "post_solve_objective": self.post_solve_objective,
            "post_refine_exact": self.post_refine_exact,
            "mip_status": self.mip_status,
            "mip_bound": self.mip_bound,
            "mip_gap": self.mip_gap,
            "mip_nodes": self.mip_nodes,
            "elapsed_seconds": self.elapsed_seconds,
            "routing_mismatches": self.routing_mismatches,
            "refined_nodes": self.refined_nodes,
        }


def build_model(train: Dataset, config: TrainConfig) -> MilpModel:
    """Build the MILP for the configured loss, attaching l0 structure
    for the feature-selection regularizers."""
    topo = config.topology
    if config.loss.kind == "logistic_pwl":
        model = build_olct(train, topo, config.loss, config.reg,
                           config.big_m, config.epsilon)
    elif config.loss.kind == "hinge":
        model = _build_gated_slack_model(train, topo, config.loss, config.reg,
                                         config.big_m, config.epsilon)
    else:
        model = build_oct_misclass(train, topo, config.big_m, config.epsilon,
                                   config.reg, cost=config.loss.slack_costs[0])
    if config.reg.kind in ("sfs", "hfs"):
        model = add_l0_structure(model, config.reg)
    return model


def _fit_cost(costs: Sequence[float], h: int) -> float:
    return costs[h - 1] if len(costs) > 1 else costs[0]


def _resolve_epsilon_gap(scores: np.ndarray, epsilon: float) -> float:
    """Smallest downward bias shift leaving no score inside (0, epsilon)."""
    shift = 0.0
    for _ in range(scores.shape[0] + 1):
        s = scores - shift
        gap = (s > 0.0) & (s < epsilon)
        if not gap.any():
            return shift
        shift = float(scores[gap].max())
    raise AssertionError("epsilon-gap resolution did not terminate")


def _node_fitter(loss_kind: str):
    return fit_l1_hinge if loss_kind == "hinge" else fit_l1_logistic


def _restrict_support(w: np.ndarray, budget: Optional[int], tol: float) -> np.ndarray:
    """Indices of the nonzero entries, capped at ``budget`` largest."""
    nz = np.flatnonzero(np.abs(w) > tol)
    if budget is not None and nz.size > budget:
        order = np.argsort(-np.abs(w[nz]))
        nz = np.sort(nz[order[:budget]])
    return nz


def _fit_node(X: np.ndarray, y: np.ndarray, config: TrainConfig, h: int,
              w0: Optional[np.ndarray] = None, b0: Optional[float] = None,
              max_iters: int = 5000) -> tuple[np.ndarray, float]:
    """Fit one node's classifier, respecting the regularizer structure."""
    costs = config.loss.layer_costs(config.depth)
    C = _fit_cost(costs, h)
    l1w = 1.0 if config.reg.has_l1_term else 0.0
    fitter = _node_fitter(config.loss.kind)
    p = X.shape[1]

    w, b = fitter(X, y, C, l1_weight=l1w, w0=w0, b0=b0, max_iters=max_iters)
    if config.reg.kind == "hfs":
        support = _restrict_support(w, config.reg.hfs_budget, 0.0)
        w_r, b = fitter(X[:, support], y, C, l1_weight=l1w,
                        w0=w[support], b0=b, max_iters=max_iters)
        w = np.zeros(p)
        w[support] = w_r
    elif config.reg.kind == "sfs":
        w[np.abs(w) <= 1e-9] = 0.0
    np.clip(w, -config.big_m, config.big_m, out=w)
    return w, b


def greedy_warm_start(train: Dataset, config: TrainConfig,
                      model: Optional[MilpModel] = None
                      ) -> tuple[TreeModel, np.ndarray]:
    """Top-down greedy tree plus the matching feasible MILP assignment.

    Each node is fitted on the points reaching it; scores inside
    (0, epsilon) are pushed left by a small bias shift so the forwarding
    rows hold on both sides. A node reached by no points keeps zero
    weights and bias and routes everything left. The assembled
    assignment is validated row by row; a violation is a hard failure.
    """
    if model is None:
        model = build_model(train, config)
    topo = config.topology
    n, p = train.n, train.p
    X, y = train.features, train.labels
    W = np.zeros((topo.n_nodes, p))
    B = np.zeros(topo.n_nodes)
    pop: dict[int, np.ndarray] = {0: np.arange(n)}

    for t in topo.branch_nodes:
        idx = pop.get(t, np.empty(0, dtype=int))
        if t not in topo.last_layer:
            left, right = topo.children(t)
        if idx.size == 0:
            if t not in topo.last_layer:
                pop[left] = idx
                pop[right] = idx
            continue
        h = topo.layer_of(t)
        w, b = _fit_node(X[idx], y[idx], config, h)
        if t not in topo.last_layer:
            scores = X[idx] @ w + b
            shift = _resolve_epsilon_gap(scores, config.epsilon)
            b -= shift
            scores -= shift
            pop[left] = idx[scores <= 0.0]
            pop[right] = idx[scores > 0.0]
        W[t] = w
        B[t] = b

    tree = TreeModel(topo, W, B, config.epsilon, config.loss.kind)
    assignment = assemble_assignment(model, tree, train, config)
    problems = validate_assignment(model, assignment)
    if problems:
        detail = "; ".join(problems[:10])
        raise RuntimeError(f"warm-start assignment is infeasible: {detail}")
    return tree, assignment


def assemble_assignment(model: MilpModel, tree: TreeModel, train: Dataset,
                        config: TrainConfig) -> np.ndarray:
    """Feasible MILP assignment matching a tree that routes the training
    set without scores in the (0, epsilon) dead zone.

    Slacks are set tight: xi[i][h] is the largest gated requirement over
    the layer's nodes (off-path rows keep their big-M slack), never less
    than zero.
    """
    topo = tree.topology
    n, d = train.n, topo.depth
    X, y = train.features, train.labels
    M = model.big_m
    col = model.var_index
    vec = np.zeros(model.n_variables)

    paths = tree.route(X)
    for i in range(n):
        vec[col[f"z[{i}][{paths[i, -1]}]"]] = 1.0

    for t in topo.branch_nodes:
        for j in range(train.p):
            wv = tree.weights[t, j]
            vec[col[f"w[{t}][{j}]"]] = wv
            vec[col[f"wpos[{t}][{j}]"]] = max(wv, 0.0)
            vec[col[f"wneg[{t}][{j}]"]] = max(-wv, 0.0)
        vec[col[f"b[{t}]"]] = tree.biases[t]

    kind = model.meta["loss_kind"]
    if kind in ("logistic_pwl", "hinge"):
        lines = gated_loss_lines(config.loss)
        slopes = np.array([a for a, _ in lines])
        intercepts = np.array([c for _, c in lines])
        for h in range(1, d + 1):
            terms = []
            for t in topo.layer_nodes(h):
                v = y * (X @ tree.weights[t] + tree.biases[t])
                line_max = (slopes[:, None] * v[None, :]
                            + intercepts[:, None]).max(axis=0)
                gate = paths[:, h - 1] == t
                terms.append(line_max - M * (~gate))
            xi_h = np.maximum(0.0, np.max(np.stack(terms), axis=0))
            for i in range(n):
                vec[col[f"xi[{i}][{h}]"]] = xi_h[i]
    else:
        leaf_scores = tree.node_scores(X, paths[:, -1])
        for i in range(n):
            vec[col[f"yhat[{i}]"]] = 1.0 if leaf_scores[i] > 0 else 0.0

    if model.meta["reg_kind"] in ("sfs", "hfs"):
        budgets = (config.reg.layer_budgets(d)
                   if config.reg.kind == "sfs" else None)
        for t in topo.branch_nodes:
            nnz = 0
            for j in range(train.p):
                on = 1.0 if tree.weights[t, j] != 0.0 else 0.0
                vec[col[f"delta[{t}][{j}]"]] = on
                nnz += int(on)
            if budgets is not None:
                bh = budgets[topo.layer_of(t) - 1]
                vec[col[f"u[{t}]"]] = max(float(nnz), bh)
    return vec


def decode_solution(model: MilpModel, values: np.ndarray,
                    config: TrainConfig, train: Dataset) -> tuple[TreeModel, int]:
    """Incumbent -> TreeModel, plus the routing-consistency mismatch count.

    Solver feasibility leaves scores up to the row tolerance above zero
    on left routes; a bias snap of at most a few tolerances realigns
    deterministic routing with the incumbent's z. Remaining mismatches
    are counted honestly.
    """
    topo = config.topology
    n = train.n
    X = train.features
    col = model.var_index
    p = train.p
    W = np.array([[values[col[f"w[{t}][{j}]"]] for j in range(p)]
                  for t in topo.branch_nodes])
    B = np.array([values[col[f"b[{t}]"]] for t in topo.branch_nodes])

    z_leaf = np.empty(n, dtype=int)
    for i in range(n):
        ts = [t for t in topo.last_layer if values[col[f"z[{i}][{t}]"]] > 0.5]
        z_leaf[i] = ts[0] if ts else -1

    # ancestors of the chosen leaf, layer by layer
    z_paths = np.empty((n, topo.depth), dtype=int)
    z_paths[:, -1] = z_leaf
    for h in range(topo.depth - 1, 0, -1):
        z_paths[:, h - 1] = (z_paths[:, h] - 1) // 2

    for t in topo.inner_nodes:
        h = topo.layer_of(t)
        at_node = z_paths[:, h - 1] == t
        if not at_node.any():
            continue
        goes_left = at_node & (z_paths[:, h] == 2 * t + 1)
        if not goes_left.any():
            continue
        scores = X[goes_left] @ W[t] + B[t]
        worst = float(scores.max())
        if 0.0 < worst <= _SNAP_TOL:
            B[t] -= worst

    tree = TreeModel(topo, W, B, config.epsilon, config.loss.kind)
    mismatches = int((tree.route(X)[:, -1] != z_leaf).sum())
    return tree, mismatches


def exact_objective(tree: TreeModel, data: Dataset, loss: LossSpec,
                    reg: RegularizerSpec) -> float:
    """True-loss objective of a tree on a dataset.

    Points are routed deterministically; each layer contributes its
    slack cost times the exact loss at the routed node, and the
    regularizer contributes its l1 and feature-count terms.
    """
    topo = tree.topology
    X, y = data.features, data.labels
    paths = tree.route(X)
    total = 0.0
    if loss.kind in ("logistic_pwl", "hinge"):
        costs = loss.layer_costs(topo.depth)
        fn = logistic_loss if loss.kind == "logistic_pwl" else hinge_loss
        for h in range(1, topo.depth + 1):
            scores = tree.node_scores(X, paths[:, h - 1])
            total += costs[h - 1] * float(fn(y * scores).sum())
    else:
        scores = tree.node_scores(X, paths[:, -1])
        pred = np.where(scores > 0, 1, -1)
        total += loss.slack_costs[0] * float((pred != y).sum())
    if reg.has_l1_term:
        total += float(np.abs(tree.weights).sum())
    if reg.kind == "sfs":
        budgets = reg.layer_budgets(topo.depth)
        for t in topo.branch_nodes:
            nnz = int((np.abs(tree.weights[t]) > _ZERO_TOL).sum())
            total += reg.alpha * max(float(nnz), budgets[topo.layer_of(t) - 1])
    return total


def _node_term(X, y, w, b, config: TrainConfig, h: int) -> float:
    """Exact objective terms a single last-layer node controls."""
    kind = config.loss.kind
    costs = config.loss.layer_costs(config.depth)
    C = _fit_cost(costs, h)
    scores = X @ w + b
    if kind == "logistic_pwl":
        term = C * float(logistic_loss(y * scores).sum())
    elif kind == "hinge":
        term = C * float(hinge_loss(y * scores).sum())
    else:
        pred = np.where(scores > 0, 1, -1)
        term = C * float((pred != y).sum())
    if config.reg.has_l1_term:
        term += float(np.abs(w).sum())
    if config.reg.kind == "sfs":
        nnz = int((np.abs(w) > _ZERO_TOL).sum())
        term += config.reg.alpha * max(float(nnz),
                                       config.reg.layer_budgets(config.depth)[h - 1])
    return term


def refine_last_layer(tree: TreeModel, train: Dataset,
                      config: TrainConfig) -> tuple[TreeModel, int]:
    """Refit each last-layer node on its routed points, keeping a refit
    only when it lowers that node's exact objective term.

    Upper layers are untouched, so routing is unchanged and the overall
    exact objective cannot increase. Feature-selection regularizers
    restrict each refit to the node's current support, preserving
    budgets. Returns the new tree and the number of improved nodes.
    """
    topo = tree.topology
    X, y = train.features, train.labels
    leaf = tree.route(X)[:, -1]
    d = topo.depth
    W = tree.weights.copy()
    B = tree.biases.copy()
    improved = 0

    for t in topo.last_layer:
        idx = np.flatnonzero(leaf == t)
        if idx.size == 0:
            continue
        Xs, ys = X[idx], y[idx]
        w_old, b_old = tree.weights[t], tree.biases[t]
        costs = config.loss.layer_costs(d)
        C = _fit_cost(costs, d)
        l1w = 1.0 if config.reg.has_l1_term else 0.0

        if config.reg.kind in ("hfs", "sfs"):
            support = _restrict_support(w_old, config.reg.hfs_budget, _ZERO_TOL)
            w_r, b_new = fit_l1_logistic(Xs[:, support], ys, C, l1_weight=l1w,
                                         w0=w_old[support], b0=b_old)
            w_new = np.zeros(train.p)
            w_new[support] = w_r
        else:
            w_new, b_new = fit_l1_logistic(Xs, ys, C, l1_weight=l1w,
                                           w0=w_old, b0=float(b_old))
        np.clip(w_new, -config.big_m, config.big_m, out=w_new)

        if _node_term(Xs, ys, w_new, b_new, config, d) < \
                _node_term(Xs, ys, w_old, b_old, config, d) - 1e-12:
            W[t] = w_new
            B[t] = b_new
            improved += 1

    return TreeModel(topo, W, B, tree.epsilon, tree.loss_kind), improved


def make_rounding_heuristic(model: MilpModel, train: Dataset,
                            config: TrainConfig):
    """Incumbent heuristic: read node weights off a relaxation, complete
    them greedily top-down, and assemble a feasible assignment.

    Each node's classifier is refitted (iteration-capped, seeded from
    the relaxation's weights) on the points reaching it; feature
    budgets are enforced by sparsifying before the refit.
    """
    topo = config.topology
    col = model.var_index
    p = train.p
    X, y = train.features, train.labels
    w_cols = np.array([[col[f"w[{t}][{j}]"] for j in range(p)]
                       for t in topo.branch_nodes])
    b_cols = np.array([col[f"b[{t}]"] for t in topo.branch_nodes])

    def heuristic(x_struct: np.ndarray) -> Optional[np.ndarray]:
        W = x_struct[w_cols].copy()
        B = x_struct[b_cols].copy()
        if config.reg.kind == "hfs":
            for t in topo.branch_nodes:
                keep = _restrict_support(W[t], config.reg.hfs_budget, 0.0)
                mask = np.zeros(p, dtype=bool)
                mask[keep] = True
                W[t][~mask] = 0.0
        pop: dict[int, np.ndarray] = {0: np.arange(train.n)}
        for t in topo.branch_nodes:
            idx = pop.get(t, np.empty(0, dtype=int))
            if t not in topo.last_layer:
                left, right = topo.children(t)
            if idx.size == 0:
                W[t] = 0.0
                B[t] = 0.0
                if t not in topo.last_layer:
                    pop[left] = idx
                    pop[right] = idx
                continue
            h = topo.layer_of(t)
            w, b = _fit_node(X[idx], y[idx], config, h,
                             w0=W[t], b0=float(B[t]), max_iters=300)
            if t not in topo.last_layer:
                scores = X[idx] @ w + b
                shift = _resolve_epsilon_gap(scores, config.epsilon)
                b -= shift
                scores -= shift
                pop[left] = idx[scores <= 0.0]
                pop[right] = idx[scores > 0.0]
            W[t] = w
            B[t] = b
        tree = TreeModel(topo, W, B, config.epsilon, config.loss.kind)
        vec = assemble_assignment(model, tree, train, config)
        if validate_assignment(model, vec):
            return None
        return vec

    return heuristic


def train(train_data: Dataset, config: TrainConfig) -> TrainReport:
    """Run warm start, branch-and-bound, and last-layer refinement.

    Returns a report carrying the final tree and the exact objective of
    every stage. Raises RuntimeError if the solver produces no usable
    incumbent, which cannot happen while the warm start is enabled.
    """
    t0 = time.monotonic()
    model = build_model(train_data, config)

    warm_tree = None
    warm_exact = None
    warm_surrogate = None
    solver_cfg = config.solver
    if config.use_warm_start:
        warm_tree, warm_assign = greedy_warm_start(train_data, config, model)
        warm_exact = exact_objective(warm_tree, train_data, config.loss, config.reg)
        warm_surrogate = model.objective_value(warm_assign)
        solver_cfg = replace(solver_cfg, warm_start=warm_assign)
    if config.use_heuristic:
        solver_cfg = replace(
            solver_cfg,
            incumbent_heuristic=make_rounding_heuristic(model, train_data, config))

    sol = solve_mip(model, solver_cfg)
    if sol.values is None:
        raise RuntimeError(
            f"solver finished with status {sol.status} and no incumbent; "
            f"enable the warm start or raise the time limit")

    solved_tree, mismatches = decode_solution(model, sol.values, config, train_data)
    post_solve_exact = exact_objective(solved_tree, train_data, config.loss, config.reg)

    refined_nodes = 0
    final_tree = solved_tree
    post_refine_exact = post_solve_exact
    if config.refine:
        final_tree, refined_nodes = refine_last_layer(solved_tree, train_data, config)
        post_refine_exact = exact_objective(final_tree, train_data,
                                            config.loss, config.reg)

    return TrainReport(
        model=final_tree,
        warm_start_exact=warm_exact,
        warm_start_surrogate=warm_surrogate,
        post_solve_exact=post_solve_exact,
        post_solve_objective=sol.objective,
        post_refine_exact=post_refine_exact,
        mip_status=sol.status,
        mip_bound=sol.bound,
        mip_gap=sol.gap,
        mip_nodes=sol.node_count,
        elapsed_seconds=time.monotonic() - t0,
        routing_mismatches=mismatches,
        refined_nodes=refined_nodes,
        big_m=config.big_m,
        epsilon=config.epsilon,
        depth=config.depth,
        loss_kind=config.loss.kind,
        reg_kind=config.reg.kind,
    )


@dataclass
class CvRecord:
    """One fold evaluation of one grid point."""

    grid_index: int
    params: dict
    fold: int
    bacc: float
    time_s: float


def apply_grid_point(config: TrainConfig, entry: dict) -> TrainConfig:
    """New TrainConfig with the grid entry's loss/regularizer values."""
    loss = config.loss
    reg = config.reg
    if "slack_costs" in entry:
        loss = replace(loss, slack_costs=tuple(np.atleast_1d(entry["slack_costs"]).tolist()))
    if "alpha" in entry:
        reg = replace(reg, alpha=float(entry["alpha"]))
    if "sfs_budgets" in entry:
        reg = replace(reg, sfs_budgets=tuple(np.atleast_1d(entry["sfs_budgets"]).tolist()))
    if "hfs_budget" in entry:
        reg = replace(reg, hfs_budget=int(entry["hfs_budget"]))
    return replace(config, loss=loss, reg=reg)


def _grid_sort_key(entry: dict) -> tuple:
    parts = []
    for key in ("slack_costs", "alpha", "sfs_budgets", "hfs_budget"):
        if key in entry:
            val = entry[key]
            parts.append(tuple(np.atleast_1d(val).tolist()))
    return tuple(parts)


def cross_validate(train_data: Dataset, base_config: TrainConfig,
                   grid: Sequence[dict], folds: int = 4
                   ) -> tuple[TrainConfig, list[CvRecord]]:
    """Grid search by k-fold validation balanced accuracy.

    Every grid point is trained on each fold with the base config's
    solver time limit. Selection is by mean validation balanced
    accuracy; ties go to the smaller total slack cost (stronger
    regularization), then to the lexicographically smallest grid entry.
    Returns the winning full-data config and the complete fold table.
    """
    from .evaluation import ConfusionCounts, balanced_accuracy

    if not grid:
        raise ValueError("grid is empty")
    fold_pairs = kfolds(train_data, SplitSpec(seed=base_config.seed,
                                              fold_count=folds))
    records: list[CvRecord] = []
    means = []
    for gi, entry in enumerate(grid):
        cfg = apply_grid_point(base_config, entry)
        baccs = []
        for fi, (tr, va) in enumerate(fold_pairs):
            t0 = time.monotonic()
            report = train(tr, cfg)
            pred = report.model.predict(va.features)
            bacc = balanced_accuracy(ConfusionCounts.from_labels(va.labels, pred))
            elapsed = time.monotonic() - t0
            records.append(CvRecord(gi, dict(entry), fi, bacc, elapsed))
            baccs.append(bacc)
        means.append(float(np.mean(baccs)))
        logger.info("grid point %d/%d %s: mean validation bacc %.4f",
                    gi + 1, len(grid), entry, means[-1])

    def selection_key(gi: int):
        cfg = apply_grid_point(base_config, grid[gi])
        return (-means[gi],
                sum(cfg.loss.layer_costs(base_config.depth)),
                _grid_sort_key(grid[gi]))

    best = min(range(len(grid)), key=selection_key)
    return apply_grid_point(base_config, grid[best]), records
