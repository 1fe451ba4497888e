"""MILP formulations for training oblique classification trees.

The model ties together routing binaries z[i][t] (one last-layer node
per point), big-M forwarding rows that make upper-layer scores consistent
with the chosen route, and per-layer slack variables xi[i][h] that carry
the training loss. The logistic loss enters as a piecewise-linear
underestimator built from tangent lines; the hinge loss uses a single
gated row per node; the misclassification loss uses prediction binaries
at the last layer. The l1 norm of each weight vector is modeled by a
nonnegative split w = wpos - wneg, and l0 structure (feature-selection
budgets or penalties) by indicator binaries delta[t][j].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .dataset import Dataset
from .tree import TreeTopology

LOSS_KINDS = ("logistic_pwl", "hinge", "misclassification")
REG_KINDS = ("none", "l1", "sfs", "hfs")
TANGENT_SET_IDS = ("V0", "V1", "V2", "V3")

# Finite tangent points of each set; every set also contains both
# infinities, which contribute the asymptote lines.
_FINITE_TANGENTS = {
    "V0": (0.0,),
    "V1": (-1.9, 0.0, 1.9),
    "V2": (-3.55, -1.9, -0.89, 0.0, 0.89, 1.9, 3.55),
    "V3": (
        -5.16, -3.55, -2.63, -1.9, -1.37, -0.89, -0.44,
        0.0,
        0.44, 0.89, 1.37, 1.9, 2.63, 3.55, 5.16,
    ),
}


def logistic_loss(v: np.ndarray) -> np.ndarray:
    """log(1 + exp(-v)), computed stably."""
    return np.logaddexp(0.0, -np.asarray(v, dtype=float))


def hinge_loss(v: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, 1.0 - np.asarray(v, dtype=float))


def _logistic_slope(v: float) -> float:
    # d/dv log(1+e^{-v}) = -1/(1+e^v)
    if v >= 0:
        return -math.exp(-v) / (1.0 + math.exp(-v))
    return -1.0 / (1.0 + math.exp(v))


@dataclass(frozen=True)
class TangentLine:
    """A line slope*v + intercept lying below log(1+exp(-v)).

    ``origin`` is the tangent point; -inf and +inf mark the asymptote
    lines -v and 0 respectively.
    """

    slope: float
    intercept: float
    origin: float

    def __call__(self, v):
        return self.slope * np.asarray(v, dtype=float) + self.intercept


def tangent_lines(set_id: str) -> list[TangentLine]:
    """Tangent lines of the logistic loss for the given tangent set.

    Lines are ordered by tangent point, the -inf asymptote first and
    the zero line (+inf) last.
    """
    if set_id not in TANGENT_SET_IDS:
        raise ValueError(f"unknown tangent set {set_id!r}, expected one of {TANGENT_SET_IDS}")
    lines = [TangentLine(-1.0, 0.0, -math.inf)]
    for v in _FINITE_TANGENTS[set_id]:
        slope = _logistic_slope(v)
        value = float(np.logaddexp(0.0, -v))
        lines.append(TangentLine(slope, value - slope * v, v))
    lines.append(TangentLine(0.0, 0.0, math.inf))
    return lines


def pwl_logistic(v: np.ndarray, lines: Sequence[TangentLine]) -> np.ndarray:
    """Pointwise maximum of the tangent lines, the PWL surrogate loss."""
    v = np.asarray(v, dtype=float)
    stacked = np.stack([ln(v) for ln in lines])
    return stacked.max(axis=0)


def _as_cost_tuple(costs) -> tuple[float, ...]:
    if np.isscalar(costs):
        return (float(costs),)
    return tuple(float(c) for c in costs)


@dataclass(frozen=True)
class LossSpec:
    """Loss configuration: kind, tangent set, per-layer slack costs.

    ``slack_costs`` holds one coefficient C_h per layer; a single value
    broadcasts to all layers. The misclassification loss applies only
    at the last layer and takes a single coefficient.
    """

    kind: str
    slack_costs: tuple[float, ...] = (1.0,)
    tangent_set: str = "V0"

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}, expected one of {LOSS_KINDS}")
        if self.tangent_set not in TANGENT_SET_IDS:
            raise ValueError(f"unknown tangent set {self.tangent_set!r}")
        object.__setattr__(self, "slack_costs", _as_cost_tuple(self.slack_costs))
        if any(c <= 0 for c in self.slack_costs):
            raise ValueError("slack costs must be positive")

    def layer_costs(self, depth: int) -> tuple[float, ...]:
        """Per-layer costs, broadcasting a single value across layers."""
        if self.kind == "misclassification":
            if len(self.slack_costs) != 1:
                raise ValueError("misclassification loss takes a single cost coefficient")
            return self.slack_costs
        if len(self.slack_costs) == 1:
            return self.slack_costs * depth
        if len(self.slack_costs) != depth:
            raise ValueError(f"expected {depth} per-layer costs, got {len(self.slack_costs)}")
        return self.slack_costs


@dataclass(frozen=True)
class RegularizerSpec:
    """Weight regularization: none, l1, or l0-based feature selection.

    sfs penalizes max(nonzero count, per-layer budget B_h) at weight
    alpha per node; hfs caps the nonzero count per node at ``hfs_budget``.
    Both feature-selection kinds keep the l1 objective term.
    """

    kind: str = "l1"
    alpha: Optional[float] = None
    sfs_budgets: tuple[float, ...] = (0.0,)
    hfs_budget: Optional[int] = None

    def __post_init__(self):
        if self.kind not in REG_KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}, expected one of {REG_KINDS}")
        object.__setattr__(self, "sfs_budgets", _as_cost_tuple(self.sfs_budgets))
        if self.kind == "sfs":
            if self.alpha is None or self.alpha <= 0:
                raise ValueError("sfs requires alpha > 0")
            if any(b < 0 for b in self.sfs_budgets):
                raise ValueError("sfs budgets must be nonnegative")
        if self.kind == "hfs":
            if self.hfs_budget is None or self.hfs_budget < 1:
                raise ValueError("hfs requires an integer budget >= 1")

    @property
    def has_l1_term(self) -> bool:
        return self.kind in ("l1", "sfs", "hfs")

    def layer_budgets(self, depth: int) -> tuple[float, ...]:
        if len(self.sfs_budgets) == 1:
            return self.sfs_budgets * depth
        if len(self.sfs_budgets) != depth:
            raise ValueError(f"expected {depth} per-layer budgets, got {len(self.sfs_budgets)}")
        return self.sfs_budgets


CONTINUOUS = "continuous"
BINARY = "binary"


@dataclass
class Variable:
    name: str
    kind: str
    lower: float
    upper: float


@dataclass
class Constraint:
    name: str
    cols: np.ndarray
    coefs: np.ndarray
    sense: str  # "<=", ">=", "="
    rhs: float


class MilpModel:
    """A sparse MILP in minimize form.

    Variables and constraints are held in fixed construction order so
    exports and solver traces are reproducible. ``var_index`` maps the
    structured variable names (z[i][t], w[t][j], ...) to column ids.
    ``meta`` carries the shape of the originating training problem for
    modules that decode solutions back into trees.
    """

    def __init__(self, big_m: float, epsilon: float):
        if big_m <= 0:
            raise ValueError("big_m must be positive")
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        self.big_m = float(big_m)
        self.epsilon = float(epsilon)
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.var_index: dict[str, int] = {}
        self.objective: dict[int, float] = {}
        self.objective_constant: float = 0.0
        self.sense = "min"
        self.meta: dict = {}

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def add_variable(self, name: str, kind: str = CONTINUOUS,
                     lower: float = 0.0, upper: float = math.inf) -> int:
        if name in self.var_index:
            raise ValueError(f"duplicate variable name {name!r}")
        if kind == BINARY:
            lower, upper = 0.0, 1.0
        col = len(self.variables)
        self.variables.append(Variable(name, kind, float(lower), float(upper)))
        self.var_index[name] = col
        return col

    def add_constraint(self, name: str, terms: Sequence[tuple[int, float]],
                       sense: str, rhs: float) -> None:
        if sense not in ("<=", ">=", "="):
            raise ValueError(f"bad sense {sense!r}")
        kept = [(c, v) for c, v in terms if v != 0.0]
        cols = np.array([c for c, _ in kept], dtype=np.int64)
        coefs = np.array([v for _, v in kept], dtype=float)
        self.constraints.append(Constraint(name, cols, coefs, sense, float(rhs)))

    def add_objective_term(self, col: int, coef: float) -> None:
        if coef == 0.0:
            return
        self.objective[col] = self.objective.get(col, 0.0) + coef

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_variables)
        for col, coef in self.objective.items():
            c[col] = coef
        return c

    def binary_columns(self) -> np.ndarray:
        return np.array(
            [j for j, v in enumerate(self.variables) if v.kind == BINARY],
            dtype=np.int64,
        )

    def objective_value(self, values: np.ndarray) -> float:
        values = np.asarray(values, dtype=float)
        return float(sum(coef * values[col] for col, coef in self.objective.items())
                     + self.objective_constant)

    def column_of(self, name: str) -> int:
        try:
            return self.var_index[name]
        except KeyError:
            raise ValueError(f"unknown variable {name!r}") from None

    def shallow_copy(self) -> "MilpModel":
        """Copy sharing Variable/Constraint objects but not the lists."""
        out = MilpModel(self.big_m, self.epsilon)
        out.variables = list(self.variables)
        out.constraints = list(self.constraints)
        out.var_index = dict(self.var_index)
        out.objective = dict(self.objective)
        out.objective_constant = self.objective_constant
        out.meta = dict(self.meta)
        return out


def gated_loss_lines(loss: LossSpec) -> list[tuple[float, float]]:
    """(slope, intercept) pairs of the gated slack rows for one node.

    The zero line is excluded; it is carried by the ungated xi >= 0
    rows. The hinge loss contributes its single line 1 - v.
    """
    if loss.kind == "logistic_pwl":
        return [
            (ln.slope, ln.intercept)
            for ln in tangent_lines(loss.tangent_set)
            if not math.isinf(ln.origin) or ln.origin < 0
        ]
    if loss.kind == "hinge":
        return [(-1.0, 1.0)]
    raise ValueError(f"loss kind {loss.kind!r} has no gated slack lines")


def _check_build_inputs(train: Dataset, big_m: float, epsilon: float) -> None:
    if train.n < 1:
        raise ValueError("training set is empty")
    if big_m <= 0 or epsilon <= 0:
        raise ValueError("big_m and epsilon must be positive")


def _add_routing_and_weights(model: MilpModel, train: Dataset, topology: TreeTopology):
    """Add z, w, wpos, wneg, b in the fixed order; return column tables."""
    n, p = train.n, train.p
    last = list(topology.last_layer)
    z = {(i, t): model.add_variable(f"z[{i}][{t}]", BINARY) for i in range(n) for t in last}
    w = {(t, j): model.add_variable(f"w[{t}][{j}]", CONTINUOUS, -math.inf, math.inf)
         for t in topology.branch_nodes for j in range(p)}
    wpos = {(t, j): model.add_variable(f"wpos[{t}][{j}]", CONTINUOUS, 0.0, math.inf)
            for t in topology.branch_nodes for j in range(p)}
    wneg = {(t, j): model.add_variable(f"wneg[{t}][{j}]", CONTINUOUS, 0.0, math.inf)
            for t in topology.branch_nodes for j in range(p)}
    b = {t: model.add_variable(f"b[{t}]", CONTINUOUS, -math.inf, math.inf)
         for t in topology.branch_nodes}
    return z, w, wpos, wneg, b


def _add_routing_rows(model, train, topology, z):
    for i in range(train.n):
        terms = [(z[i, t], 1.0) for t in topology.last_layer]
        model.add_constraint(f"routing[{i}]", terms, "=", 1.0)


def _add_forwarding_rows(model, train, topology, z, w, b):
    """Big-M rows tying each inner node's score to the routing choice.

    A point routed through the left side of node t must score <= 0
    there; through the right side, >= epsilon.
    """
    M = model.big_m
    eps = model.epsilon
    X = train.features
    for i in range(train.n):
        for t in topology.inner_nodes:
            score = [(w[t, j], X[i, j]) for j in range(train.p)] + [(b[t], 1.0)]
            left = [(z[i, s], M) for s in topology.left_leaf_block(t)]
            model.add_constraint(f"fwd_l[{i}][{t}]", score + left, "<=", M)
            right = [(z[i, s], -M) for s in topology.right_leaf_block(t)]
            model.add_constraint(f"fwd_r[{i}][{t}]", score + right, ">=", eps - M)


def _add_w_split_rows(model, train, topology, w, wpos, wneg):
    for t in topology.branch_nodes:
        for j in range(train.p):
            model.add_constraint(
                f"w_split[{t}][{j}]",
                [(w[t, j], 1.0), (wpos[t, j], -1.0), (wneg[t, j], 1.0)],
                "=",
                0.0,
            )


def _add_l1_objective(model, train, topology, reg, wpos, wneg):
    if reg.has_l1_term:
        for t in topology.branch_nodes:
            for j in range(train.p):
                model.add_objective_term(wpos[t, j], 1.0)
                model.add_objective_term(wneg[t, j], 1.0)


def _build_gated_slack_model(train: Dataset, topology: TreeTopology, loss: LossSpec,
                             reg: RegularizerSpec, big_m: float, epsilon: float) -> MilpModel:
    """Shared construction for the logistic and hinge formulations."""
    _check_build_inputs(train, big_m, epsilon)
    n, p, d = train.n, train.p, topology.depth
    costs = loss.layer_costs(d)
    lines = gated_loss_lines(loss)
    X, y = train.features, train.labels
    M = big_m

    model = MilpModel(big_m, epsilon)
    z, w, wpos, wneg, b = _add_routing_and_weights(model, train, topology)
    xi = {(i, h): model.add_variable(f"xi[{i}][{h}]", CONTINUOUS, 0.0, math.inf)
          for i in range(n) for h in range(1, d + 1)}

    _add_routing_rows(model, train, topology, z)
    _add_forwarding_rows(model, train, topology, z, w, b)

    # Gated loss rows: at node t of layer h, for each line a*v + c of the
    # loss in the margin v = y_i * (w_t . x_i + b_t),
    #   xi[i][h] >= a*v + c - M*(1 - sum of z over last-layer descendants of t)
    for t in topology.branch_nodes:
        h = topology.layer_of(t)
        gate = list(topology.last_layer_descendants(t))
        for i in range(n):
            for k, (a, c) in enumerate(lines):
                terms = [(xi[i, h], 1.0)]
                terms += [(w[t, j], -a * y[i] * X[i, j]) for j in range(p)]
                terms.append((b[t], -a * y[i]))
                terms += [(z[i, s], -M) for s in gate]
                model.add_constraint(f"loss[{i}][{t}][{k}]", terms, ">=", c - M)
    for i in range(n):
        for h in range(1, d + 1):
            model.add_constraint(f"xi_nn[{i}][{h}]", [(xi[i, h], 1.0)], ">=", 0.0)

    _add_w_split_rows(model, train, topology, w, wpos, wneg)

    for i in range(n):
        for h in range(1, d + 1):
            model.add_objective_term(xi[i, h], costs[h - 1])
    _add_l1_objective(model, train, topology, reg, wpos, wneg)

    model.meta = {
        "n": n,
        "p": p,
        "depth": d,
        "loss_kind": loss.kind,
        "tangent_set": loss.tangent_set if loss.kind == "logistic_pwl" else None,
        "layer_costs": costs,
        "reg_kind": reg.kind,
        "gated_lines": len(lines),
    }
    return model


def build_olct(train: Dataset, topology: TreeTopology, loss: LossSpec,
               reg: RegularizerSpec, big_m: float = 100.0,
               epsilon: float = 1e-5) -> MilpModel:
    """Build the logistic-loss tree MILP.

    The objective is sum over layers h of C_h * sum_i xi[i][h], plus the
    l1 term sum (wpos + wneg) when the regularizer carries one. Gated
    slack rows hold one inequality per point, node, and tangent line
    (the zero line is the ungated xi >= 0 row). Feature-selection
    binaries are attached separately by :func:`add_l0_structure`.
    """
    if loss.kind != "logistic_pwl":
        raise ValueError("build_olct expects a logistic_pwl loss")
    return _build_gated_slack_model(train, topology, loss, reg, big_m, epsilon)


def build_margot_l1(train: Dataset, topology: TreeTopology, slack_costs,
                    big_m: float = 100.0, epsilon: float = 1e-5) -> MilpModel:
    """Hinge-loss variant: same skeleton with one gated hinge row per
    point and node, and the l1 split regularizer."""
    loss = LossSpec("hinge", _as_cost_tuple(slack_costs))
    return _build_gated_slack_model(train, topology, loss,
                                    RegularizerSpec("l1"), big_m, epsilon)


def build_oct_misclass(train: Dataset, topology: TreeTopology,
                       big_m: float = 100.0, epsilon: float = 1e-5,
                       reg: RegularizerSpec = RegularizerSpec("none"),
                       cost: float = 1.0) -> MilpModel:
    """Misclassification-loss tree MILP.

    Prediction binaries yhat[i] are forced to the sign of the last-layer
    score of the chosen node; the 0-1 loss (1 - y_i yhat_i)/2 with
    yhat_i in {-1,+1} enters the objective directly as linear terms in
    the 0/1-coded yhat plus a constant.
    """
    _check_build_inputs(train, big_m, epsilon)
    if cost <= 0:
        raise ValueError("cost must be positive")
    n, p = train.n, train.p
    X, y = train.features, train.labels
    M = big_m

    model = MilpModel(big_m, epsilon)
    z, w, wpos, wneg, b = _add_routing_and_weights(model, train, topology)
    yhat = {i: model.add_variable(f"yhat[{i}]", BINARY) for i in range(n)}

    _add_routing_rows(model, train, topology, z)
    _add_forwarding_rows(model, train, topology, z, w, b)

    # With z[i][t] = 1 and u = yhat[i]: score <= M(1 + 2u - z) and
    # score >= eps - M(3 - 2u - z), so u = 1 exactly when the score
    # clears eps, matching the decoder's sign rule (0 predicts -1).
    eps = model.epsilon
    for i in range(n):
        for t in topology.last_layer:
            score = [(w[t, j], X[i, j]) for j in range(p)] + [(b[t], 1.0)]
            up = score + [(yhat[i], -2.0 * M), (z[i, t], M)]
            model.add_constraint(f"pred_up[{i}][{t}]", up, "<=", M)
            lo = score + [(yhat[i], -2.0 * M), (z[i, t], -M)]
            model.add_constraint(f"pred_lo[{i}][{t}]", lo, ">=", eps - 3.0 * M)

    _add_w_split_rows(model, train, topology, w, wpos, wneg)

    # (1 - y_i (2 yhat_i - 1))/2 = (1 + y_i)/2 - y_i yhat_i
    for i in range(n):
        model.add_objective_term(yhat[i], -cost * float(y[i]))
        model.objective_constant += cost * (1.0 + float(y[i])) / 2.0
    _add_l1_objective(model, train, topology, reg, wpos, wneg)

    model.meta = {
        "n": n,
        "p": p,
        "depth": topology.depth,
        "loss_kind": "misclassification",
        "tangent_set": None,
        "layer_costs": (float(cost),),
        "reg_kind": reg.kind,
        "gated_lines": 0,
    }
    return model


def add_l0_structure(model: MilpModel, reg: RegularizerSpec) -> MilpModel:
    """Attach feature-selection binaries to a built tree model.

    Adds delta[t][j] with -M delta <= w <= M delta. For hfs, each node
    gets a budget row sum_j delta[t][j] <= B. For sfs, a continuous
    u[t] >= max(sum_j delta[t][j], B_h) enters the objective at weight
    alpha. Returns a new model; the input is not modified.
    """
    if reg.kind not in ("sfs", "hfs"):
        raise ValueError("add_l0_structure requires an sfs or hfs regularizer")
    for key in ("depth", "p"):
        if key not in model.meta:
            raise ValueError("model was not produced by a tree builder")
    out = model.shallow_copy()
    d, p = out.meta["depth"], out.meta["p"]
    topology = TreeTopology(d)
    M = out.big_m

    if reg.kind == "hfs" and not 1 <= reg.hfs_budget <= p:
        raise ValueError(f"hfs budget must be in [1, {p}]")
    budgets = reg.layer_budgets(d) if reg.kind == "sfs" else None
    if budgets is not None and any(bh > p for bh in budgets):
        raise ValueError(f"sfs budgets cannot exceed {p}")

    delta = {(t, j): out.add_variable(f"delta[{t}][{j}]", BINARY)
             for t in topology.branch_nodes for j in range(p)}
    u = {}
    if reg.kind == "sfs":
        for t in topology.branch_nodes:
            bh = budgets[topology.layer_of(t) - 1]
            u[t] = out.add_variable(f"u[{t}]", CONTINUOUS, bh, math.inf)

    for t in topology.branch_nodes:
        for j in range(p):
            wc = out.column_of(f"w[{t}][{j}]")
            out.add_constraint(f"l0_up[{t}][{j}]",
                               [(wc, 1.0), (delta[t, j], -M)], "<=", 0.0)
            out.add_constraint(f"l0_lo[{t}][{j}]",
                               [(wc, 1.0), (delta[t, j], M)], ">=", 0.0)
    if reg.kind == "hfs":
        for t in topology.branch_nodes:
            terms = [(delta[t, j], 1.0) for j in range(p)]
            out.add_constraint(f"l0_budget[{t}]", terms, "<=", float(reg.hfs_budget))
    else:
        for t in topology.branch_nodes:
            terms = [(u[t], 1.0)] + [(delta[t, j], -1.0) for j in range(p)]
            out.add_constraint(f"sfs_max[{t}]", terms, ">=", 0.0)
            out.add_objective_term(u[t], float(reg.alpha))

    out.meta["reg_kind"] = reg.kind
    return out


def census(n: int, p: int, depth: int, loss: LossSpec,
           reg: RegularizerSpec = RegularizerSpec("none")) -> dict:
    """Closed-form variable and constraint counts of a built model.

    Variables: z n*2^(d-1); w, wpos, wneg 3*p*(2^d-1); b 2^d-1; then
    xi n*d for the gated-slack losses or yhat n for misclassification;
    l0 structure adds delta p*(2^d-1) and, for sfs, u 2^d-1.
    Constraints: routing n; forwarding 2n(2^(d-1)-1); gated slack rows
    n*(2^d-1)*(lines-1) plus xi >= 0 rows n*d, or prediction rows
    2n*2^(d-1); w-split p*(2^d-1); l0 adds 2p*(2^d-1) plus one budget
    or max row per node.
    """
    Tn = 2 ** depth - 1
    leaves = 2 ** (depth - 1)
    variables = {
        "z": n * leaves,
        "w_family": 3 * p * Tn,
        "b": Tn,
    }
    constraints = {
        "routing": n,
        "forwarding": 2 * n * (leaves - 1),
        "w_split": p * Tn,
    }
    if loss.kind in ("logistic_pwl", "hinge"):
        n_lines = len(gated_loss_lines(loss)) + 1  # plus the zero line
        variables["xi"] = n * depth
        constraints["gated_loss"] = n * Tn * (n_lines - 1)
        constraints["xi_nonneg"] = n * depth
    else:
        variables["yhat"] = n
        constraints["prediction"] = 2 * n * leaves
    if reg.kind in ("sfs", "hfs"):
        variables["delta"] = p * Tn
        constraints["l0_link"] = 2 * p * Tn
        if reg.kind == "sfs":
            variables["u"] = Tn
            constraints["sfs_max"] = Tn
        else:
            constraints["hfs_budget"] = Tn
    return {
        "variables": variables,
        "constraints": constraints,
        "n_variables": sum(variables.values()),
        "n_constraints": sum(constraints.values()),
    }


def _fmt(v: float) -> str:
    return format(v, ".17g")


def _term(coef: float, name: str, first: bool) -> str:
    sign = "-" if coef < 0 else ("" if first else "+")
    mag = abs(coef)
    body = name if mag == 1.0 else f"{_fmt(mag)} {name}"
    return f"{sign} {body}" if sign else body


def _expr(pairs, names) -> str:
    parts = []
    for k, (col, coef) in enumerate(pairs):
        parts.append(_term(coef, names[col], k == 0))
    return " ".join(parts) if parts else "0"


def export_lp(model: MilpModel, path: str) -> None:
    """Write the model in LP text format.

    Structured variable names are used as-is; numbers carry 17
    significant digits so a re-parse reproduces the exact coefficients.
    """
    names = [v.name for v in model.variables]
    lines = ["\\ oblique tree training model", "Minimize"]
    obj_pairs = sorted(model.objective.items())
    obj = _expr(obj_pairs, names)
    if model.objective_constant != 0.0:
        const = model.objective_constant
        if obj == "0":
            obj = _fmt(const)
        else:
            obj += f" {'-' if const < 0 else '+'} {_fmt(abs(const))}"
    lines.append(f" obj: {obj}")
    lines.append("Subject To")
    for con in model.constraints:
        lhs = _expr(list(zip(con.cols.tolist(), con.coefs.tolist())), names)
        lines.append(f" {con.name}: {lhs} {con.sense} {_fmt(con.rhs)}")
    lines.append("Bounds")
    for v in model.variables:
        if v.kind == BINARY:
            continue
        lo, up = v.lower, v.upper
        if lo == -math.inf and up == math.inf:
            lines.append(f" {v.name} free")
        elif lo == 0.0 and up == math.inf:
            continue
        elif up == math.inf:
            lines.append(f" {v.name} >= {_fmt(lo)}")
        elif lo == -math.inf:
            lines.append(f" {v.name} <= {_fmt(up)}")
        else:
            lines.append(f" {_fmt(lo)} <= {v.name} <= {_fmt(up)}")
    binaries = [v.name for v in model.variables if v.kind == BINARY]
    if binaries:
        lines.append("Binaries")
        row = " "
        for name in binaries:
            if len(row) + len(name) + 1 > 200:
                lines.append(row)
                row = " "
            row += name + " "
        lines.append(row.rstrip() or " ")
    lines.append("End")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
