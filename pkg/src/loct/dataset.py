"""Dataset loading, label encoding, standardization and splitting."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np


@dataclass
class Dataset:
    """A binary classification dataset with labels in {-1, +1}.

    Parameters
    ----------
    features : ndarray of shape (n, p)
        Feature matrix, float64, all entries finite.
    labels : ndarray of shape (n,)
        Class labels, each -1 or +1.
    feature_names : tuple of str
        One name per feature column.
    standardization : (mean, std) pair or None
        Statistics that were applied to ``features``, if any.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] = ()
    standardization: Optional[tuple[np.ndarray, np.ndarray]] = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2d array")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must have one entry per feature row")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain non-finite values")
        bad = ~np.isin(self.labels, (-1, 1))
        if bad.any():
            raise ValueError(f"labels must be -1 or +1, got {self.labels[bad][:5]}")
        self.labels = self.labels.astype(int)
        if not self.feature_names:
            self.feature_names = tuple(f"x{j}" for j in range(self.features.shape[1]))
        if len(self.feature_names) != self.features.shape[1]:
            raise ValueError("feature_names length must match feature count")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def subset(self, rows: np.ndarray) -> "Dataset":
        """Return the dataset restricted to the given row indices."""
        rows = np.asarray(rows, dtype=int)
        return Dataset(
            self.features[rows],
            self.labels[rows],
            self.feature_names,
            self.standardization,
        )


@dataclass(frozen=True)
class SplitSpec:
    """Train/test split and fold configuration.

    ``test_fraction`` must lie strictly between 0 and 1, and the rounded
    test size must leave at least one point on each side.
    """

    test_fraction: float = 0.2
    seed: int = 0
    fold_count: int = 4

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must be in (0, 1)")
        if self.fold_count < 2:
            raise ValueError("fold_count must be at least 2")


def _try_float(cell: str) -> Optional[float]:
    try:
        return float(cell)
    except ValueError:
        return None


def load_csv(
    path: str,
    label_column: Union[int, str],
    positive_label: str,
) -> Dataset:
    """Load a CSV file into a Dataset.

    A header row is detected when some cell of the first row is
    non-numeric while the same column is numeric in the second row;
    columns that are non-numeric throughout (such as a textual label
    column) do not trigger header detection.

    Parameters
    ----------
    path : str
        CSV file path.
    label_column : int or str
        Column index, or column name when a header is present.
    positive_label : str
        Raw label value mapped to +1; the remaining value maps to -1.

    Raises
    ------
    ValueError
        On malformed rows, non-numeric feature cells, or a label column
        that does not contain exactly two distinct values.
    """
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError(f"{path}: file is empty")

    width = len(rows[0])
    for k, row in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"{path}: row {k} has {len(row)} cells, expected {width}")

    has_header = False
    if len(rows) > 1:
        has_header = any(
            _try_float(rows[0][j]) is None and _try_float(rows[1][j]) is not None
            for j in range(width)
        )
    header = [cell.strip() for cell in rows[0]] if has_header else None
    data_rows = rows[1:] if has_header else rows

    if isinstance(label_column, str):
        if header is None:
            raise ValueError("label column given by name but the file has no header")
        try:
            label_idx = header.index(label_column)
        except ValueError:
            raise ValueError(f"label column {label_column!r} not found in header") from None
    else:
        label_idx = int(label_column)
        if not -width <= label_idx < width:
            raise ValueError(f"label column index {label_idx} out of range for {width} columns")
        label_idx %= width

    if not data_rows:
        raise ValueError(f"{path}: no data rows")

    raw_labels = [row[label_idx].strip() for row in data_rows]
    values = sorted(set(raw_labels))
    if len(values) != 2:
        raise ValueError(f"label column must have exactly 2 distinct values, got {len(values)}: {values[:5]}")
    positive = str(positive_label).strip()
    if positive not in values:
        raise ValueError(f"positive label {positive!r} not among label values {values}")

    feat_cols = [j for j in range(width) if j != label_idx]
    features = np.empty((len(data_rows), len(feat_cols)))
    for k, row in enumerate(data_rows):
        for out_j, j in enumerate(feat_cols):
            v = _try_float(row[j].strip())
            if v is None:
                raise ValueError(f"{path}: non-numeric feature cell at data row {k}, column {j}: {row[j]!r}")
            features[k, out_j] = v

    labels = np.where(np.asarray(raw_labels) == positive, 1, -1)
    if header is not None:
        names = tuple(header[j] for j in feat_cols)
    else:
        names = tuple(f"x{j}" for j in feat_cols)
    return Dataset(features, labels, names)


def standardize(data: Dataset, stats_from: Optional[Dataset] = None) -> Dataset:
    """Return a copy with zero-mean, unit-variance features.

    Uses the population standard deviation. Constant columns (std below
    1e-12) are left centered but unscaled. When ``stats_from`` is given,
    its stored statistics are applied instead of recomputing, so test
    data can reuse the training transform.
    """
    if stats_from is not None:
        if stats_from.standardization is None:
            raise ValueError("stats_from dataset carries no standardization statistics")
        mean, std = stats_from.standardization
    else:
        mean = data.features.mean(axis=0)
        std = data.features.std(axis=0)
        std = np.where(std < 1e-12, 1.0, std)
    if mean.shape != (data.p,):
        raise ValueError("standardization statistics do not match feature count")
    scaled = (data.features - mean) / std
    return Dataset(scaled, data.labels, data.feature_names, (mean, std))


def train_test_split(data: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Split into (train, test) by a seeded permutation.

    The test size is ``round(test_fraction * n)``; a split that would
    leave either side empty raises ValueError. Row order within each
    side follows the original dataset.
    """
    n = data.n
    n_test = int(np.floor(spec.test_fraction * n + 0.5))
    if n_test == 0 or n_test == n:
        raise ValueError(f"test_fraction {spec.test_fraction} leaves an empty split for n={n}")
    rng = np.random.default_rng(spec.seed)
    perm = rng.permutation(n)
    test_rows = np.sort(perm[:n_test])
    train_rows = np.sort(perm[n_test:])
    return data.subset(train_rows), data.subset(test_rows)


def kfolds(data: Dataset, spec: SplitSpec) -> list[tuple[Dataset, Dataset]]:
    """Return ``fold_count`` (train, validation) pairs.

    Validation folds partition the dataset; sizes differ by at most one
    row. The same seed always yields the same folds.
    """
    n = data.n
    k = spec.fold_count
    if k > n:
        raise ValueError(f"cannot make {k} folds from {n} rows")
    rng = np.random.default_rng(spec.seed)
    perm = rng.permutation(n)
    folds = []
    for chunk in np.array_split(perm, k):
        val_rows = np.sort(chunk)
        mask = np.ones(n, dtype=bool)
        mask[val_rows] = False
        train_rows = np.flatnonzero(mask)
        folds.append((data.subset(train_rows), data.subset(val_rows)))
    return folds
