"""Synthetic binary classification datasets for tests and benchmarks.

The named datasets mirror the row/feature counts of a standard UCI
benchmark table so experiments run offline at realistic shapes; the
generating distributions are synthetic (cluster, near-separable, and
two-Gaussian patterns), not the original data.
"""

from __future__ import annotations

import csv

import numpy as np

from .dataset import Dataset

_XOR_CENTERS = np.array([(1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)])
_XOR_LABELS = np.array([-1, -1, 1, 1])


def make_xor(n: int = 40, noise: float = 0.1, seed: int = 0) -> Dataset:
    """Four Gaussian clusters at (+-1, +-1) with XOR labels.

    Opposite corners share a class, so no single linear split separates
    the classes but a depth-2 oblique tree does. Points are spread over
    the clusters as evenly as n allows.
    """
    if n < 4:
        raise ValueError("need at least 4 points, one per cluster")
    rng = np.random.default_rng(seed)
    counts = [n // 4] * 4
    for k in range(n % 4):
        counts[k] += 1
    X = np.vstack([
        center + noise * rng.standard_normal((c, 2))
        for center, c in zip(_XOR_CENTERS, counts)
    ])
    y = np.repeat(_XOR_LABELS, counts)
    return Dataset(X, y)


def make_near_separable(n: int, p: int, flip_fraction: float = 0.02,
                        seed: int = 0) -> Dataset:
    """Points labeled by a random hyperplane, with a few labels flipped.

    The bias is the median score, so classes are balanced up to one
    point before flipping.
    """
    if not 0.0 <= flip_fraction < 0.5:
        raise ValueError("flip_fraction must be in [0, 0.5)")
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(p)
    w /= np.linalg.norm(w)
    X = rng.standard_normal((n, p))
    scores = X @ w - np.median(X @ w)
    y = np.where(scores > 0, 1, -1)
    flips = rng.permutation(n)[: int(flip_fraction * n)]
    y[flips] = -y[flips]
    return Dataset(X, y)


def make_two_gaussians(n: int, p: int, separation: float = 2.0,
                       seed: int = 0) -> Dataset:
    """Two unit-covariance Gaussian blobs, centers ``separation`` apart
    along a random direction. Smaller separations give harder problems."""
    if separation <= 0:
        raise ValueError("separation must be positive")
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(p)
    direction /= np.linalg.norm(direction)
    mu = 0.5 * separation * direction
    n_pos = n // 2
    X = rng.standard_normal((n, p))
    X[:n_pos] += mu
    X[n_pos:] -= mu
    y = np.concatenate([np.ones(n_pos, dtype=int), -np.ones(n - n_pos, dtype=int)])
    return Dataset(X, y)


# name -> (generator, table-matched shape kwargs)
_NAMED = {
    "xor": lambda seed, n: make_xor(n or 40, 0.1, seed),
    "breast": lambda seed, n: make_near_separable(n or 568, 30, 0.02, seed),
    "parkinsons": lambda seed, n: make_near_separable(n or 194, 22, 0.08, seed),
    "haberman": lambda seed, n: make_two_gaussians(n or 305, 13, 1.0, seed),
    "wholesale": lambda seed, n: make_two_gaussians(n or 439, 7, 2.5, seed),
}


def dataset_names() -> tuple[str, ...]:
    return tuple(sorted(_NAMED))


def dataset_by_name(name: str, seed: int = 0, n: int = 0) -> Dataset:
    """Generate a named synthetic dataset.

    Default sizes match the benchmark table shapes (breast 568x30,
    parkinsons 194x22, haberman 305x13, wholesale 439x7, xor 40x2);
    pass ``n`` to override the row count.
    """
    try:
        gen = _NAMED[name]
    except KeyError:
        raise ValueError(
            f"unknown dataset {name!r}; known: {', '.join(dataset_names())}") from None
    return gen(seed, n)


def save_csv(data: Dataset, path: str) -> None:
    """Write features plus a trailing 'label' column with values -1/+1."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(data.feature_names) + ["label"])
        for i in range(data.n):
            row = [format(v, ".17g") for v in data.features[i]]
            writer.writerow(row + [str(int(data.labels[i]))])
