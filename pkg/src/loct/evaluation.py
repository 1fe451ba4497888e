"""Metrics and benchmark reporting.

Balanced accuracy and sparsity score single models; performance
profiles and gap curves compare solvers or model configurations across
a problem set. Curves are emitted as sorted breakpoints in CSV form so
external tooling can plot them.
"""

from __future__ import annotations

import csv
import math
import os
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .tree import TreeModel

_ZERO_TOL = 1e-6


@dataclass(frozen=True)
class ConfusionCounts:
    """Binary confusion counts with the +1 class as positive."""

    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @classmethod
    def from_labels(cls, y_true: np.ndarray, y_pred: np.ndarray) -> "ConfusionCounts":
        y_true = np.asarray(y_true)
        y_pred = np.asarray(y_pred)
        if y_true.shape != y_pred.shape:
            raise ValueError("label arrays must have the same shape")
        pos = y_true == 1
        return cls(
            tp=int((pos & (y_pred == 1)).sum()),
            tn=int((~pos & (y_pred == -1)).sum()),
            fp=int((~pos & (y_pred == 1)).sum()),
            fn=int((pos & (y_pred == -1)).sum()),
        )


def balanced_accuracy(counts: ConfusionCounts) -> float:
    """Mean of sensitivity and specificity, in [0, 1].

    A class absent from the evaluated data contributes a recall term of
    zero, and a UserWarning is issued; with both classes present this
    is (TP/(TP+FN) + TN/(TN+FP)) / 2.
    """
    if counts.tp + counts.fn > 0:
        sens = counts.tp / (counts.tp + counts.fn)
    else:
        warnings.warn("no positive examples; sensitivity term set to 0")
        sens = 0.0
    if counts.tn + counts.fp > 0:
        spec = counts.tn / (counts.tn + counts.fp)
    else:
        warnings.warn("no negative examples; specificity term set to 0")
        spec = 0.0
    return (sens + spec) / 2.0


def sparsity(model: TreeModel, zero_tolerance: float = _ZERO_TOL) -> float:
    """Average number of features used per branch node.

    Counts weights with magnitude above ``zero_tolerance``; lower is
    sparser. A univariate tree scores at most 1, a dense one scores p.
    """
    if zero_tolerance < 0:
        raise ValueError("zero_tolerance must be non-negative")
    used = (np.abs(model.weights) > zero_tolerance).sum(axis=1)
    return float(used.mean())


@dataclass
class ProfileCurve:
    """One solver's performance profile as a right-continuous step function.

    ``taus`` are the sorted breakpoints in [1, eta_m]; ``rhos[k]`` is the
    fraction of problems with cost ratio <= taus[k]. Failures sit at the
    sentinel ratio ``eta_m``, so the value just below eta_m is the
    fraction of problems actually solved.
    """

    solver: str
    taus: np.ndarray
    rhos: np.ndarray
    eta_m: float

    def value(self, tau: float) -> float:
        """rho at the given tau (0 below the first breakpoint)."""
        k = int(np.searchsorted(self.taus, tau, side="right")) - 1
        return float(self.rhos[k]) if k >= 0 else 0.0


def performance_profiles(costs: np.ndarray,
                         solvers: Optional[Sequence[str]] = None
                         ) -> list[ProfileCurve]:
    """Dolan-More profiles of a problems x solvers cost matrix.

    NaN or infinite entries mark failures. Each finite cost must be
    positive, and every problem needs at least one non-failed solver.
    Ratios divide by the per-problem best; failures are pinned to
    eta_m = 2 * (largest finite ratio), so no curve reaches 1 before
    eta_m when its solver failed somewhere.
    """
    costs = np.asarray(costs, dtype=float)
    if costs.ndim != 2 or costs.size == 0:
        raise ValueError("costs must be a non-empty problems x solvers matrix")
    n_problems, n_solvers = costs.shape
    if solvers is None:
        solvers = [f"solver{j}" for j in range(n_solvers)]
    if len(solvers) != n_solvers:
        raise ValueError("one solver name per column required")
    finite = np.isfinite(costs)
    if (finite & (costs <= 0)).any():
        raise ValueError("finite costs must be positive")
    if not finite.any(axis=1).all():
        bad = int(np.flatnonzero(~finite.any(axis=1))[0])
        raise ValueError(f"all solvers failed on problem {bad}")

    best = np.where(finite, costs, np.inf).min(axis=1)
    ratios = np.where(finite, costs / best[:, None], np.inf)
    eta_m = 2.0 * float(ratios[np.isfinite(ratios)].max())
    ratios = np.where(np.isfinite(ratios), ratios, eta_m)

    curves = []
    for j, name in enumerate(solvers):
        taus = np.unique(ratios[:, j])
        rhos = np.searchsorted(np.sort(ratios[:, j]), taus, side="right") / n_problems
        if taus[0] > 1.0:
            taus = np.concatenate([[1.0], taus])
            rhos = np.concatenate([[0.0], rhos])
        curves.append(ProfileCurve(str(name), taus, rhos, eta_m))
    return curves


@dataclass
class GapCurve:
    """Cumulative distribution of a model's gap from the per-problem best."""

    model: str
    thresholds: np.ndarray
    fractions: np.ndarray

    def value(self, t: float) -> float:
        k = int(np.searchsorted(self.thresholds, t, side="right")) - 1
        return float(self.fractions[k]) if k >= 0 else 0.0


def gap_curve(values: np.ndarray, best: np.ndarray,
              model: str = "model") -> GapCurve:
    """Distribution of best - value over problems, for a maximization metric.

    The curve's value at threshold t is the fraction of problems whose
    gap from the best is at most t; at t=0 this is the fraction of
    problems where the model itself is best. A NaN value marks a failed
    run and never enters the counts, so the curve tops out below 1.
    """
    values = np.asarray(values, dtype=float)
    best = np.asarray(best, dtype=float)
    if values.size == 0 or values.shape != best.shape:
        raise ValueError("values and best must be equal-length non-empty arrays")
    gaps = best - values
    ok = np.isfinite(gaps)
    gaps = np.maximum(0.0, gaps[ok])
    thresholds = np.unique(gaps)
    if thresholds.size == 0 or thresholds[0] > 0.0:
        thresholds = np.concatenate([[0.0], thresholds])
    fractions = np.searchsorted(np.sort(gaps), thresholds, side="right") / values.size
    return GapCurve(model, thresholds, fractions)


@dataclass
class RunResult:
    """One benchmark run: a model configuration on one problem instance."""

    problem: str
    seed: int
    model: str
    depth: int
    bacc: float
    time_s: float
    gap: float
    sparsity: float
    failed: bool = False


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".10g")
    return str(v)


def emit_report(results: Sequence[RunResult], out_dir: str) -> dict[str, str]:
    """Write the benchmark CSVs; returns {kind: path}.

    ``results.csv`` holds one row per run with the schema
    problem,seed,model,depth,bacc,time_s,gap,sparsity. When several
    model configurations appear, ``profiles.csv`` (solver,tau,rho)
    profiles their times over the problem instances, and
    ``gap_curves.csv`` (model,t,fraction) distributes each model's test
    balanced-accuracy gap from the per-instance best. Problems where
    every model failed are dropped from the curves but kept in
    results.csv. Output is deterministic for fixed inputs.
    """
    if not results:
        raise ValueError("no results to report")
    os.makedirs(out_dir, exist_ok=True)
    paths = {}

    results_path = os.path.join(out_dir, "results.csv")
    with open(results_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["problem", "seed", "model", "depth", "bacc",
                         "time_s", "gap", "sparsity"])
        for r in results:
            writer.writerow([r.problem, r.seed, r.model, r.depth, _fmt(r.bacc),
                             _fmt(r.time_s), _fmt(r.gap), _fmt(r.sparsity)])
    paths["results"] = results_path

    models = list(dict.fromkeys(r.model for r in results))
    instances = list(dict.fromkeys((r.problem, r.seed) for r in results))
    if len(models) < 2:
        return paths

    by_key = {(r.problem, r.seed, r.model): r for r in results}

    def run_ok(r: Optional[RunResult]) -> bool:
        return r is not None and not r.failed and math.isfinite(r.bacc) \
            and math.isfinite(r.time_s)

    kept = [inst for inst in instances
            if any(run_ok(by_key.get((*inst, m))) for m in models)]
    if kept:
        cost = np.full((len(kept), len(models)), np.inf)
        bacc = np.full((len(kept), len(models)), np.nan)
        for a, inst in enumerate(kept):
            for b, m in enumerate(models):
                r = by_key.get((*inst, m))
                if run_ok(r):
                    cost[a, b] = max(r.time_s, 1e-9)
                    bacc[a, b] = r.bacc

        profiles_path = os.path.join(out_dir, "profiles.csv")
        with open(profiles_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["solver", "tau", "rho"])
            for curve in performance_profiles(cost, models):
                for tau, rho in zip(curve.taus, curve.rhos):
                    writer.writerow([curve.solver, _fmt(float(tau)), _fmt(float(rho))])
        paths["profiles"] = profiles_path

        best = np.nanmax(bacc, axis=1)
        gaps_path = os.path.join(out_dir, "gap_curves.csv")
        with open(gaps_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["model", "t", "fraction"])
            for b, m in enumerate(models):
                curve = gap_curve(bacc[:, b], best, m)
                for t, frac in zip(curve.thresholds, curve.fractions):
                    writer.writerow([m, _fmt(float(t)), _fmt(float(frac))])
        paths["gap_curves"] = gaps_path

    return paths
