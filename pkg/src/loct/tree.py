"""Complete-binary-tree topology and oblique tree models.

Nodes carrying a linear classifier are numbered heap-style: node 0 is
the root and node t has children 2t+1 (left) and 2t+2 (right). A tree
of depth d has 2^d - 1 such nodes; the nodes of the last layer act as
leaves, predicting -1 on their left side and +1 on their right side.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dataset import Dataset

MODEL_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class TreeTopology:
    """Index algebra for a complete binary tree of the given depth."""

    depth: int

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be at least 1")

    @property
    def n_nodes(self) -> int:
        return 2 ** self.depth - 1

    @property
    def branch_nodes(self) -> range:
        return range(self.n_nodes)

    @property
    def last_layer(self) -> range:
        return range(2 ** (self.depth - 1) - 1, self.n_nodes)

    @property
    def inner_nodes(self) -> range:
        """Nodes with children, i.e. everything above the last layer."""
        return range(2 ** (self.depth - 1) - 1)

    def layer_of(self, t: int) -> int:
        """1-based layer index of node t (root is layer 1)."""
        if not 0 <= t < self.n_nodes:
            raise ValueError(f"node {t} out of range")
        return (t + 1).bit_length()

    def layer_nodes(self, h: int) -> range:
        """Nodes of 1-based layer h."""
        if not 1 <= h <= self.depth:
            raise ValueError(f"layer {h} out of range")
        return range(2 ** (h - 1) - 1, 2 ** h - 1)

    def children(self, t: int) -> tuple[int, int]:
        return 2 * t + 1, 2 * t + 2

    def parent(self, t: int) -> int:
        if t == 0:
            raise ValueError("root has no parent")
        return (t - 1) // 2

    def last_layer_descendants(self, t: int) -> range:
        """Last-layer nodes of the subtree rooted at t (t itself if in the last layer)."""
        h = self.layer_of(t)
        span = 2 ** (self.depth - h)
        start = (t + 1) * span - 1
        return range(start, start + span)

    def left_leaf_block(self, t: int) -> range:
        """Last-layer descendants reached through the left child of t."""
        return self.last_layer_descendants(2 * t + 1)

    def right_leaf_block(self, t: int) -> range:
        """Last-layer descendants reached through the right child of t."""
        return self.last_layer_descendants(2 * t + 2)


@dataclass
class Prediction:
    """Single-point prediction with per-node forwarding confidences.

    ``confidences[h]`` is the sigmoid of the score at the h-th node on
    the routing path, read as the probability of moving to the right
    child. ``probability`` is the sigmoid of the final node's score,
    i.e. the confidence that the label is +1; it is calibrated only for
    models trained with the logistic loss.
    """

    label: int
    probability: float
    path: tuple[int, ...]
    confidences: tuple[float, ...]
    calibrated: bool


def _sigmoid(v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v, dtype=float)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


@dataclass
class TreeModel:
    """An oblique classification tree with one linear score per node.

    Routing is deterministic: a point goes left when its score
    w_t . x + b_t is less than or equal to zero, right otherwise.
    The prediction is the sign of the score at the last-layer node,
    with sign(0) = -1.
    """

    topology: TreeTopology
    weights: np.ndarray
    biases: np.ndarray
    epsilon: float = 1e-5
    loss_kind: str = "logistic_pwl"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.biases = np.asarray(self.biases, dtype=float)
        T = self.topology.n_nodes
        if self.weights.ndim != 2 or self.weights.shape[0] != T:
            raise ValueError(f"weights must have shape ({T}, p)")
        if self.biases.shape != (T,):
            raise ValueError(f"biases must have shape ({T},)")

    @property
    def depth(self) -> int:
        return self.topology.depth

    @property
    def p(self) -> int:
        return self.weights.shape[1]

    def node_scores(self, X: np.ndarray, nodes: np.ndarray) -> np.ndarray:
        """Scores of rows of X at the per-row node indices given."""
        return np.einsum("ij,ij->i", X, self.weights[nodes]) + self.biases[nodes]

    def route(self, X: np.ndarray) -> np.ndarray:
        """Node path for each row of X, shape (n, depth).

        Column h holds the node visited in layer h+1. The point moves to
        the right child exactly when its score is strictly positive.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n = X.shape[0]
        path = np.empty((n, self.depth), dtype=int)
        node = np.zeros(n, dtype=int)
        for h in range(self.depth):
            path[:, h] = node
            if h + 1 < self.depth:
                scores = self.node_scores(X, node)
                node = 2 * node + 1 + (scores > 0)
        return path

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Predicted labels in {-1, +1} for rows of X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        leaves = self.route(X)[:, -1]
        scores = self.node_scores(X, leaves)
        return np.where(scores > 0, 1, -1)

    def predict_one(self, x: np.ndarray) -> Prediction:
        """Predict a single point, reporting the path and confidences."""
        x = np.asarray(x, dtype=float).reshape(1, -1)
        path = self.route(x)[0]
        scores = np.array([x[0] @ self.weights[t] + self.biases[t] for t in path])
        conf = _sigmoid(scores)
        label = 1 if scores[-1] > 0 else -1
        return Prediction(
            label=label,
            probability=float(conf[-1]),
            path=tuple(int(t) for t in path),
            confidences=tuple(float(c) for c in conf),
            calibrated=self.loss_kind == "logistic_pwl",
        )

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Probability of the +1 class for each row of X.

        Sigmoid of the last-layer score along the routed path. Carries
        probabilistic meaning only when ``loss_kind`` is logistic.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        leaves = self.route(X)[:, -1]
        return _sigmoid(self.node_scores(X, leaves))

    def to_json(self) -> str:
        """Serialize to the versioned JSON model format."""
        doc = {
            "version": MODEL_SCHEMA_VERSION,
            "depth": self.depth,
            "epsilon": self.epsilon,
            "loss_kind": self.loss_kind,
            "nodes": [
                {
                    "id": t,
                    "weights": [float(v) for v in self.weights[t]],
                    "bias": float(self.biases[t]),
                }
                for t in self.topology.branch_nodes
            ],
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TreeModel":
        """Parse a model serialized by :meth:`to_json`.

        Raises ValueError on version mismatch, missing or duplicate
        node ids, or ragged weight vectors.
        """
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"invalid model JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ValueError("model JSON must be an object")
        if doc.get("version") != MODEL_SCHEMA_VERSION:
            raise ValueError(f"unsupported model version {doc.get('version')!r}")
        for key in ("depth", "epsilon", "loss_kind", "nodes"):
            if key not in doc:
                raise ValueError(f"model JSON missing field {key!r}")
        depth = doc["depth"]
        if not isinstance(depth, int) or depth < 1:
            raise ValueError(f"invalid depth {depth!r}")
        topo = TreeTopology(depth)
        nodes = doc["nodes"]
        if not isinstance(nodes, list) or len(nodes) != topo.n_nodes:
            raise ValueError(f"expected {topo.n_nodes} nodes for depth {depth}")
        seen = {}
        for entry in nodes:
            if not isinstance(entry, dict) or "id" not in entry:
                raise ValueError("each node must be an object with an id")
            t = entry["id"]
            if t in seen:
                raise ValueError(f"duplicate node id {t}")
            seen[t] = entry
        if set(seen) != set(topo.branch_nodes):
            raise ValueError("node ids must cover exactly 0..2^depth-2")
        p = len(seen[0]["weights"])
        weights = np.zeros((topo.n_nodes, p))
        biases = np.zeros(topo.n_nodes)
        for t, entry in seen.items():
            wv = entry["weights"]
            if len(wv) != p:
                raise ValueError(f"node {t} has {len(wv)} weights, expected {p}")
            weights[t] = wv
            biases[t] = entry["bias"]
        return cls(topo, weights, biases, float(doc["epsilon"]), str(doc["loss_kind"]))


@dataclass
class InfluenceTable:
    """Per-node feature influence derived from a routed population.

    For each node t reached by at least one point, ``influence[t, j]``
    is the node weight w_{t,j} scaled by the population standard
    deviation of feature j among the points that reach t. Nodes that no
    point reaches have zero counts and zero influence.
    """

    counts: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    influence: np.ndarray
    feature_names: tuple[str, ...]

    def top_features(self, t: int, k: int = 5) -> list[tuple[str, float]]:
        """The k features with largest absolute influence at node t."""
        order = np.argsort(-np.abs(self.influence[t]))[:k]
        return [(self.feature_names[j], float(self.influence[t, j])) for j in order]


def feature_influence(model: TreeModel, data: Dataset) -> InfluenceTable:
    """Compute per-node influence statistics over a dataset.

    Points are routed deterministically by the model. Statistics use
    the population standard deviation of each feature restricted to the
    points reaching each node.
    """
    if data.p != model.p:
        raise ValueError("dataset feature count does not match the model")
    T = model.topology.n_nodes
    p = model.p
    paths = model.route(data.features)
    counts = np.zeros(T, dtype=int)
    means = np.zeros((T, p))
    stds = np.zeros((T, p))
    for h in range(model.depth):
        for t in model.topology.layer_nodes(h + 1):
            mask = paths[:, h] == t
            c = int(mask.sum())
            counts[t] = c
            if c > 0:
                sub = data.features[mask]
                means[t] = sub.mean(axis=0)
                stds[t] = sub.std(axis=0)
    influence = model.weights * stds
    return InfluenceTable(counts, means, stds, influence, data.feature_names)
