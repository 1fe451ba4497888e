"""Shared fixtures and the training-run invariant checker.

Every test that trains a model goes through ``checked_train`` so the
refinement and routing invariants are asserted on each run the suite
performs, not just in the dedicated tests.
"""

from __future__ import annotations

import numpy as np
import pytest

from loct import (
    Dataset,
    LossSpec,
    RegularizerSpec,
    SolverConfig,
    TrainConfig,
    train,
)

TRAIN_RUNS: list = []


def checked_train(data: Dataset, config: TrainConfig):
    """Train and assert the invariants every run must satisfy."""
    report = train(data, config)
    assert report.routing_mismatches == 0, (
        f"decoded routing disagrees with deterministic routing on "
        f"{report.routing_mismatches} points")
    if config.refine:
        assert report.post_refine_exact <= report.post_solve_exact + 1e-9
    assert report.mip_status in (
        "optimal", "feasible_time_limit", "unknown_time_limit")
    TRAIN_RUNS.append(report)
    return report


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def tiny_blobs() -> Dataset:
    """12 points, 2 features, two well-separated class blobs."""
    gen = np.random.default_rng(7)
    a = gen.normal((1.5, 1.5), 0.3, size=(6, 2))
    b = gen.normal((-1.5, -1.5), 0.3, size=(6, 2))
    X = np.vstack([a, b])
    y = np.array([1] * 6 + [-1] * 6)
    return Dataset(X, y)


@pytest.fixture
def quick_config() -> TrainConfig:
    return TrainConfig(
        depth=2,
        loss=LossSpec("logistic_pwl", (1.0,), "V0"),
        reg=RegularizerSpec("l1"),
        solver=SolverConfig(time_limit_seconds=15.0),
        seed=0,
    )
