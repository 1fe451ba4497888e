"""Branch-and-bound MILP solver over the bounded-variable simplex.

Node selection is best-bound with a bounded depth-first plunge from
each selected node; branching picks the most fractional binary. An
optional warm-start assignment seeds the incumbent, and an optional
incumbent heuristic is invoked on node relaxations to round them into
feasible assignments.
"""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .formulation import MilpModel
from .simplex import (LpSolution, LpTimeout, SimplexError, StandardLp,
                      make_standard_lp, solve_bounded_lp)

logger = logging.getLogger("loct.solver")

_INT_ROUND_EXACT = 1e-12


@dataclass
class SolverConfig:
    """Branch-and-bound parameters.

    ``warm_start`` is a full assignment vector (or name->value map)
    validated before use. ``incumbent_heuristic`` receives a node
    relaxation's structural values and may return a candidate feasible
    assignment vector or None; it is called on every
    ``heuristic_frequency``-th solved node.
    """

    time_limit_seconds: float = 300.0
    integrality_tol: float = 1e-6
    gap_tol: float = 1e-6
    branching: str = "most_fractional"
    node_selection: str = "best_bound_with_depth_first_plunge"
    plunge_depth: int = 10
    warm_start: Optional[Union[np.ndarray, dict]] = None
    log_interval: int = 0
    incumbent_heuristic: Optional[Callable[[np.ndarray], Optional[np.ndarray]]] = None
    heuristic_frequency: int = 1
    feasibility_tol: float = 1e-7
    refactor_every: int = 100

    def __post_init__(self):
        if self.time_limit_seconds <= 0:
            raise ValueError("time limit must be positive")
        if self.integrality_tol <= 0 or self.gap_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.branching != "most_fractional":
            raise ValueError(f"unknown branching rule {self.branching!r}")
        if self.node_selection != "best_bound_with_depth_first_plunge":
            raise ValueError(f"unknown node selection {self.node_selection!r}")


@dataclass
class MipSolution:
    """Branch-and-bound outcome.

    ``gap`` is (objective - bound) / max(1e-10, |objective|); it is
    infinite when no incumbent exists. Statuses: optimal,
    feasible_time_limit (incumbent but gap open at the limit),
    infeasible (exhausted with no feasible point), unknown_time_limit
    (limit hit before any incumbent or infeasibility proof).
    """

    status: str
    values: Optional[np.ndarray]
    objective: float
    bound: float
    gap: float
    node_count: int
    elapsed_seconds: float


def standard_form(model: MilpModel) -> StandardLp:
    """Convert a MilpModel to the simplex input form."""
    c = model.objective_vector()
    rows = [(con.cols, con.coefs) for con in model.constraints]
    senses = [con.sense for con in model.constraints]
    rhs = [con.rhs for con in model.constraints]
    lower = np.array([v.lower for v in model.variables])
    upper = np.array([v.upper for v in model.variables])
    return make_standard_lp(c, rows, senses, rhs, lower, upper)


def solve_lp(model: MilpModel,
             lower: Optional[np.ndarray] = None,
             upper: Optional[np.ndarray] = None,
             deadline: Optional[float] = None) -> LpSolution:
    """Solve the LP relaxation of the model, optionally with bound fixings.

    The returned objective includes the model's constant term.
    """
    std = standard_form(model)
    sol = solve_bounded_lp(std, lower, upper, deadline=deadline)
    if sol.status == "optimal":
        sol.objective += model.objective_constant
    return sol


def assignment_vector(model: MilpModel, values: Union[np.ndarray, dict]) -> np.ndarray:
    """Normalize an assignment given as array or name->value map."""
    if isinstance(values, dict):
        vec = np.zeros(model.n_variables)
        for name, val in values.items():
            vec[model.column_of(name)] = float(val)
        return vec
    vec = np.asarray(values, dtype=float)
    if vec.shape != (model.n_variables,):
        raise ValueError(
            f"assignment has {vec.shape} entries, expected ({model.n_variables},)")
    return vec


def validate_assignment(model: MilpModel, values: Union[np.ndarray, dict],
                        feasibility_tol: float = 1e-7,
                        integrality_tol: float = 1e-6) -> list[str]:
    """Row-by-row feasibility check; an empty list means feasible.

    Reports constraint violations beyond ``feasibility_tol``, bound
    violations beyond 1e-9, and binaries away from {0,1} by more than
    ``integrality_tol``.
    """
    x = assignment_vector(model, values)
    problems: list[str] = []
    for con in model.constraints:
        lhs = float(con.coefs @ x[con.cols]) if con.cols.size else 0.0
        if con.sense == "<=":
            viol = lhs - con.rhs
        elif con.sense == ">=":
            viol = con.rhs - lhs
        else:
            viol = abs(lhs - con.rhs)
        if viol > feasibility_tol:
            problems.append(
                f"row {con.name}: lhs={lhs:.10g} {con.sense} rhs={con.rhs:.10g} "
                f"violated by {viol:.3g}")
    for j, var in enumerate(model.variables):
        if x[j] < var.lower - 1e-9 or x[j] > var.upper + 1e-9:
            problems.append(
                f"bounds {var.name}: {x[j]:.10g} outside [{var.lower:.10g}, {var.upper:.10g}]")
        if var.kind == "binary" and abs(x[j] - round(x[j])) > integrality_tol:
            problems.append(f"integrality {var.name}: {x[j]:.10g} not in {{0,1}}")
    return problems


@dataclass
class _Node:
    bound: float
    seq: int
    fixes: tuple  # chain: (col, value, parent_fixes) or ()
    depth: int

    def __lt__(self, other):
        return (self.bound, self.seq) < (other.bound, other.seq)


def _materialize(fixes, lower, upper):
    lo = lower.copy()
    hi = upper.copy()
    while fixes:
        col, val, fixes = fixes
        lo[col] = val
        hi[col] = val
    return lo, hi


class _Search:
    def __init__(self, model: MilpModel, config: SolverConfig):
        self.model = model
        self.config = config
        self.std = standard_form(model)
        self.binaries = model.binary_columns()
        self.lower = np.array([v.lower for v in model.variables])
        self.upper = np.array([v.upper for v in model.variables])
        self.incumbent: Optional[np.ndarray] = None
        self.inc_obj = math.inf
        self.heap: list[_Node] = []
        self.seq = 0
        self.nodes = 0
        self.start = time.monotonic()
        self.deadline = self.start + config.time_limit_seconds
        self.timed_out = False
        self.any_unresolved = False

    # -- incumbent handling -------------------------------------------------

    def offer_incumbent(self, vec: np.ndarray, source: str) -> bool:
        obj = self.model.objective_value(vec)
        if obj >= self.inc_obj - 1e-12:
            return False
        if validate_assignment(self.model, vec, self.config.feasibility_tol,
                               self.config.integrality_tol):
            return False
        clean = vec.copy()
        b = self.binaries
        clean[b] = np.round(clean[b])
        self.incumbent = clean
        self.inc_obj = obj
        logger.debug("incumbent %.10g from %s", obj, source)
        return True

    def try_heuristic(self, x_struct: np.ndarray) -> None:
        heur = self.config.incumbent_heuristic
        if heur is None:
            return
        candidate = heur(x_struct)
        if candidate is not None:
            self.offer_incumbent(np.asarray(candidate, dtype=float), "heuristic")

    # -- node processing ----------------------------------------------------

    def solve_node(self, node: _Node) -> Optional[LpSolution]:
        lo, hi = _materialize(node.fixes, self.lower, self.upper)
        try:
            sol = solve_bounded_lp(self.std, lo, hi, deadline=self.deadline,
                                   refactor_every=self.config.refactor_every)
        except LpTimeout:
            self.timed_out = True
            self.any_unresolved = True
            return None
        self.nodes += 1
        if sol.status == "optimal":
            sol.objective += self.model.objective_constant
        return sol

    def fractional_binaries(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        vals = x[self.binaries]
        frac = np.abs(vals - np.round(vals))
        return vals, frac

    def integral_candidate(self, node: _Node, sol: LpSolution) -> bool:
        """Try to turn an integral-within-tolerance relaxation into an
        incumbent; returns True when the node needs no branching."""
        vals, frac = self.fractional_binaries(sol.values)
        if frac.max(initial=0.0) > self.config.integrality_tol:
            return False
        if frac.max(initial=0.0) <= _INT_ROUND_EXACT:
            self.offer_incumbent(sol.values, "relaxation")
            return True
        # repair solve: pin every binary to its rounded value
        lo, hi = _materialize(node.fixes, self.lower, self.upper)
        rounded = np.round(vals)
        lo[self.binaries] = rounded
        hi[self.binaries] = rounded
        try:
            fixed = solve_bounded_lp(self.std, lo, hi, deadline=self.deadline,
                                     refactor_every=self.config.refactor_every)
        except LpTimeout:
            # keep the subtree open so the reported bound stays valid
            self.timed_out = True
            self.any_unresolved = True
            heapq.heappush(self.heap, _Node(max(node.bound, sol.objective),
                                            self._next_seq(), node.fixes,
                                            node.depth))
            return True
        if fixed.status == "optimal":
            fixed.objective += self.model.objective_constant
            self.offer_incumbent(fixed.values, "repair")
            # the rounding may land away from this subtree's optimum, so
            # pruning is sound only when the repair closes the node's gap
            slack = max(1e-9, self.config.gap_tol * abs(fixed.objective))
            if fixed.objective <= sol.objective + slack:
                return True
        # the rounded point is infeasible or leaves a gap: branch on a
        # near-integral binary so the subtree keeps its exact optimum
        return False

    def branch(self, node: _Node, sol: LpSolution) -> tuple[_Node, _Node]:
        vals, frac = self.fractional_binaries(sol.values)
        dist = np.minimum(frac, 1.0 - frac)
        k = int(np.argmax(dist))
        col = int(self.binaries[k])
        pref = float(np.round(vals[k]))
        bound = max(node.bound, sol.objective)
        first = _Node(bound, self._next_seq(), (col, pref, node.fixes), node.depth + 1)
        second = _Node(bound, self._next_seq(), (col, 1.0 - pref, node.fixes), node.depth + 1)
        return first, second

    def _next_seq(self) -> int:
        self.seq += 1
        return self.seq

    def global_bound(self, extra: Optional[float] = None) -> float:
        candidates = [self.inc_obj]
        if self.heap:
            candidates.append(self.heap[0].bound)
        if extra is not None:
            candidates.append(extra)
        return min(candidates)

    def log_progress(self, bound: float) -> None:
        if self.config.log_interval <= 0 or self.nodes % self.config.log_interval:
            return
        gap = self.gap(bound)
        logger.info("node=%d incumbent=%.10g bound=%.10g gap=%.6g time=%.2f",
                    self.nodes, self.inc_obj, bound, gap,
                    time.monotonic() - self.start)

    def gap(self, bound: float) -> float:
        if self.incumbent is None:
            return math.inf
        return max(0.0, self.inc_obj - bound) / max(1e-10, abs(self.inc_obj))


def solve_mip(model: MilpModel, config: SolverConfig) -> MipSolution:
    """Solve the MILP by best-bound branch-and-bound with plunging.

    A supplied warm start must be feasible; an infeasible one raises
    ValueError with the violated rows. The search is deterministic for
    a given (model, config) whenever the time limit does not bind.
    """
    search = _Search(model, config)

    if config.warm_start is not None:
        vec = assignment_vector(model, config.warm_start)
        problems = validate_assignment(model, vec, config.feasibility_tol,
                                       config.integrality_tol)
        if problems:
            detail = "; ".join(problems[:8])
            raise ValueError(f"warm start is infeasible: {detail}")
        search.offer_incumbent(vec, "warm_start")

    heapq.heappush(search.heap, _Node(-math.inf, 0, (), 0))

    while search.heap:
        if time.monotonic() > search.deadline:
            search.timed_out = True
            search.any_unresolved = True
            break
        if search.gap(search.global_bound()) <= config.gap_tol:
            break
        node = heapq.heappop(search.heap)
        if node.bound >= search.inc_obj - 1e-9:
            continue

        plunges = 0
        while node is not None:
            sol = search.solve_node(node)
            if sol is None:
                # deadline inside the LP; keep the node open for bound honesty
                heapq.heappush(search.heap, node)
                break
            if sol.status == "unbounded":
                # an unbounded ray cannot move the boxed binaries, so the
                # verdict is decided by fixing them: branch until either a
                # fully fixed node is unbounded (the MILP is) or every
                # fixing proves infeasible
                lo, hi = _materialize(node.fixes, search.lower, search.upper)
                free = [int(c) for c in search.binaries if lo[c] < hi[c]]
                if not free:
                    raise SimplexError("MILP is unbounded")
                col = free[0]
                left = _Node(node.bound, search._next_seq(),
                             (col, 0.0, node.fixes), node.depth + 1)
                right = _Node(node.bound, search._next_seq(),
                              (col, 1.0, node.fixes), node.depth + 1)
                heapq.heappush(search.heap, right)
                if plunges < config.plunge_depth:
                    plunges += 1
                    node = left
                else:
                    heapq.heappush(search.heap, left)
                    node = None
                continue
            if sol.status != "optimal":
                node = None
                continue
            lp_bound = max(node.bound, sol.objective)
            search.log_progress(search.global_bound(lp_bound))
            if lp_bound >= search.inc_obj - 1e-9:
                node = None
                continue
            if config.heuristic_frequency > 0 and \
                    (search.nodes - 1) % config.heuristic_frequency == 0:
                search.try_heuristic(sol.values)
            if search.integral_candidate(node, sol):
                node = None
                continue
            first, second = search.branch(node, sol)
            heapq.heappush(search.heap, second)
            if plunges < config.plunge_depth:
                plunges += 1
                node = first
            else:
                heapq.heappush(search.heap, first)
                node = None
        if search.timed_out:
            break

    elapsed = time.monotonic() - search.start
    bound = search.global_bound()
    if search.incumbent is not None:
        gap = search.gap(bound)
        if not search.heap and not search.timed_out:
            status = "optimal"
            bound = search.inc_obj
            gap = 0.0
        elif gap <= config.gap_tol:
            status = "optimal"
        else:
            status = "feasible_time_limit"
        return MipSolution(status, search.incumbent, search.inc_obj, bound, gap,
                           search.nodes, elapsed)
    if search.timed_out or search.any_unresolved:
        return MipSolution("unknown_time_limit", None, math.inf, bound, math.inf,
                           search.nodes, elapsed)
    return MipSolution("infeasible", None, math.inf, math.inf, math.inf,
                       search.nodes, elapsed)
