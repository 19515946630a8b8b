"""Core graph representation: labeled, weighted, undirected graphs.

A graph carries per-node labels, starting/stopping probabilities of a
random-walk process, and weighted (optionally labeled) edges stored once per
unordered pair.  The stopping probability enters the degree,
``d_i = sum_j w_ij + q_i``, which keeps the walk's generalized Laplacian
positive definite as long as every ``q_i > 0``.

Instances are treated as immutable after construction and are safe to share
across worker threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

DEFAULT_STOP_PROB = 0.05
MIN_STOP_PROB = 0.0005  # smallest supported default stopping probability


@dataclass
class LabeledGraph:
    """Undirected weighted graph with optional node/edge labels.

    Edges are stored once per unordered pair with ``edges_i < edges_j``
    whenever possible (self-loops, which validation rejects, are kept as
    given so they can be reported).  Node labels are either an int64 array
    of categorical tokens of shape ``(n,)`` or a float64 array of shape
    ``(n, d)``; edge labels follow the same convention aligned with the
    edge arrays.
    """

    node_count: int
    edges_i: np.ndarray
    edges_j: np.ndarray
    weights: np.ndarray
    start_prob: np.ndarray
    stop_prob: np.ndarray
    node_labels: Optional[np.ndarray] = None
    edge_labels: Optional[np.ndarray] = None
    name: str = ""

    @staticmethod
    def from_edges(
        node_count: int,
        edges,
        *,
        node_labels=None,
        edge_labels=None,
        start_prob=None,
        stop_prob=None,
        default_q: float = DEFAULT_STOP_PROB,
        name: str = "",
    ) -> "LabeledGraph":
        """Build a graph from ``(i, j, w)`` triples.

        ``start_prob`` defaults to the uniform vector and ``stop_prob`` to
        the constant ``default_q``, which must lie in
        ``[MIN_STOP_PROB, 1]``.
        """
        n = int(node_count)
        if n <= 0:
            raise ValueError("node_count must be positive")
        edges = list(edges)
        ei = np.array([e[0] for e in edges], dtype=np.int64)
        ej = np.array([e[1] for e in edges], dtype=np.int64)
        w = np.array([e[2] for e in edges], dtype=np.float64)
        # normalize unordered pairs to i < j; keep self-loops for validation
        lo = np.minimum(ei, ej)
        hi = np.maximum(ei, ej)
        ei, ej = lo, hi
        if start_prob is None:
            p = np.full(n, 1.0 / n)
        else:
            p = np.asarray(start_prob, dtype=np.float64).copy()
        if stop_prob is None:
            if not (MIN_STOP_PROB <= default_q <= 1.0):
                raise ValueError(
                    f"default stopping probability must be in "
                    f"[{MIN_STOP_PROB}, 1], got {default_q}"
                )
            q = np.full(n, float(default_q))
        else:
            q = np.asarray(stop_prob, dtype=np.float64).copy()
        return LabeledGraph(
            node_count=n,
            edges_i=ei,
            edges_j=ej,
            weights=w,
            start_prob=p,
            stop_prob=q,
            node_labels=_normalize_labels(node_labels, n, "node"),
            edge_labels=_normalize_labels(edge_labels, len(edges), "edge"),
            name=name,
        )

    @property
    def edge_count(self) -> int:
        return len(self.weights)

    @property
    def node_label_kind(self) -> str:
        return _label_kind(self.node_labels)

    @property
    def edge_label_kind(self) -> str:
        return _label_kind(self.edge_labels)

    def dense_adjacency(self) -> np.ndarray:
        """Full symmetric weight matrix (zero diagonal for valid graphs)."""
        a = np.zeros((self.node_count, self.node_count))
        a[self.edges_i, self.edges_j] = self.weights
        a[self.edges_j, self.edges_i] = self.weights
        return a

    def with_probabilities(self, start_prob=None, stop_prob=None) -> "LabeledGraph":
        new_p = self.start_prob if start_prob is None else np.asarray(start_prob, float)
        new_q = self.stop_prob if stop_prob is None else np.asarray(stop_prob, float)
        return replace(self, start_prob=new_p, stop_prob=new_q)


def _normalize_labels(labels, count: int, what: str) -> Optional[np.ndarray]:
    if labels is None:
        return None
    arr = np.asarray(labels)
    if arr.dtype.kind in "iu":
        arr = arr.astype(np.int64)
        if arr.shape != (count,):
            raise ValueError(f"categorical {what} labels must have shape ({count},)")
        return arr
    arr = arr.astype(np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] != count:
        raise ValueError(f"vector {what} labels must have shape ({count}, d)")
    return arr


def _label_kind(labels: Optional[np.ndarray]) -> str:
    if labels is None:
        return "none"
    return "categorical" if labels.dtype.kind in "iu" else "vector"


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_graph(g: LabeledGraph) -> ValidationReport:
    """Check the structural invariants required for a positive-definite
    walk Laplacian.  Returns a report instead of raising, so callers can
    surface every violation at once.
    """
    v: list[str] = []
    n = g.node_count
    if n <= 0:
        v.append("node count must be positive")
    if len(g.start_prob) != n:
        v.append(f"start_prob length {len(g.start_prob)} != node count {n}")
    if len(g.stop_prob) != n:
        v.append(f"stop_prob length {len(g.stop_prob)} != node count {n}")
    for idx in np.nonzero(np.asarray(g.start_prob) < 0)[0]:
        v.append(f"starting probability must be >= 0 at node {idx}")
    q = np.asarray(g.stop_prob)
    for idx in np.nonzero(~((q > 0) & (q <= 1)))[0]:
        if q[idx] <= 0:
            v.append(f"stopping probability must be > 0 at node {idx}")
        else:
            v.append(f"stopping probability must be <= 1 at node {idx}")
    out_of_range = (g.edges_i < 0) | (g.edges_i >= n) | (g.edges_j < 0) | (g.edges_j >= n)
    for k in np.nonzero(out_of_range)[0]:
        v.append(f"edge ({g.edges_i[k]},{g.edges_j[k]}) references unknown node")
    for k in np.nonzero(g.edges_i == g.edges_j)[0]:
        v.append(f"self-loop at node {g.edges_i[k]}")
    for k in np.nonzero(g.weights <= 0)[0]:
        v.append(f"edge weight must be > 0 at edge {k}")
    pairs = set()
    for k in range(g.edge_count):
        key = (int(g.edges_i[k]), int(g.edges_j[k]))
        if key in pairs:
            v.append(f"duplicate edge ({key[0]},{key[1]})")
        pairs.add(key)
    if g.node_labels is not None and len(g.node_labels) != n:
        v.append("node label count does not match node count")
    if g.edge_labels is not None and len(g.edge_labels) != g.edge_count:
        v.append("edge label count does not match edge count")
    return ValidationReport(v)


def degree_vector(g: LabeledGraph) -> np.ndarray:
    """d_i = sum_j w_ij + q_i; strictly positive whenever q is.

    Incident weights are combined with correctly-rounded summation, so the
    result is independent of edge storage order and exactly permutation
    consistent.
    """
    buckets: list[list[float]] = [[] for _ in range(g.node_count)]
    for i, j, w in zip(g.edges_i.tolist(), g.edges_j.tolist(), g.weights.tolist()):
        buckets[i].append(w)
        buckets[j].append(w)
    q = np.asarray(g.stop_prob, dtype=np.float64)
    return np.array([math.fsum(b) + q[k] for k, b in enumerate(buckets)])


def transition_matrix(g: LabeledGraph) -> np.ndarray:
    """Walk transition probabilities ``P = D^-1 A``.

    Rows sum to ``1 - q_i / d_i`` (< 1), the survival probability of the
    walk at node i.
    """
    d = degree_vector(g)
    return g.dense_adjacency() / d[:, None]
