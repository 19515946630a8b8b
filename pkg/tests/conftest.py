import numpy as np
import pytest

from mgksolver import KroneckerDelta, LabeledGraph, SquareExponential


def make_random_graph(rng, n, density=0.3, labeled=False, weight_range=(0.2, 2.0),
                      q_range=(0.2, 0.9)):
    """Erdos-Renyi style test graph; labeled adds categorical node tokens and
    scalar edge labels."""
    edges, edge_labels = [], []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                edges.append((i, j, float(rng.uniform(*weight_range))))
                edge_labels.append(float(rng.uniform(0.0, 2.0)))
    node_labels = rng.integers(0, 3, size=n) if labeled else None
    return LabeledGraph.from_edges(
        n,
        edges,
        node_labels=node_labels,
        edge_labels=np.array(edge_labels) if labeled else None,
        start_prob=rng.uniform(0.1, 1.0, size=n),
        stop_prob=rng.uniform(*q_range, size=n),
    )


def canonical_edges(g):
    rows = []
    for k in range(g.edge_count):
        label = None
        if g.edge_labels is not None:
            label = tuple(np.atleast_1d(g.edge_labels[k]).tolist())
        rows.append((int(g.edges_i[k]), int(g.edges_j[k]), float(g.weights[k]), label))
    return sorted(rows)


def graphs_equal(a, b):
    if a.node_count != b.node_count:
        return False
    if not np.array_equal(a.start_prob, b.start_prob):
        return False
    if not np.array_equal(a.stop_prob, b.stop_prob):
        return False
    if (a.node_labels is None) != (b.node_labels is None):
        return False
    if a.node_labels is not None and not np.array_equal(a.node_labels, b.node_labels):
        return False
    return canonical_edges(a) == canonical_edges(b)


@pytest.fixture
def vk_delta():
    return KroneckerDelta(0.5).with_role("vertex")


@pytest.fixture
def ek_se():
    return SquareExponential(1.0).with_role("edge")
