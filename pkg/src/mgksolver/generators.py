"""Synthetic graph generators with portable determinism.

Both generators draw from :class:`mgksolver.rng.SplitMix64`, so a seed pins
the edge set across platforms.  Graphs come out unlabeled with unit weights
and default probability vectors.
"""

from __future__ import annotations

from .graphs import LabeledGraph
from .rng import SplitMix64


def gen_nws(n: int, k: int, p: float, seed: int) -> LabeledGraph:
    """Small-world graph: ring lattice plus random shortcuts.

    Node i connects to (i + j) mod n for j = 1..ceil(k/2).  Each lattice
    edge, visited in (j, i) ascending order, then adds (never rewires) a
    shortcut with probability ``p``: endpoints are drawn uniformly until one
    differs from i and is not already a neighbor; a node adjacent to all
    others skips its shortcut.
    """
    if n <= k:
        raise ValueError("need n > k")
    if not (0 <= p <= 1):
        raise ValueError("shortcut probability must be in [0, 1]")
    rng = SplitMix64(seed)
    edges: set[tuple[int, int]] = set()
    lattice: list[tuple[int, int]] = []
    for j in range(1, -(-k // 2) + 1):
        for i in range(n):
            a, b = i, (i + j) % n
            if a == b:
                continue
            key = (min(a, b), max(a, b))
            if key not in edges:
                edges.add(key)
                lattice.append((i, b))
    degree = [0] * n
    for a, b in edges:
        degree[a] += 1
        degree[b] += 1
    for u, _ in lattice:
        if rng.random() >= p:
            continue
        while degree[u] < n - 1:
            w = rng.randint(n)
            key = (min(u, w), max(u, w))
            if w != u and key not in edges:
                edges.add(key)
                degree[u] += 1
                degree[w] += 1
                break
    triples = [(a, b, 1.0) for a, b in sorted(edges)]
    return LabeledGraph.from_edges(n, triples, name=f"nws_{n}_{k}_{p}_{seed}")


def gen_ba(n: int, m: int, seed: int) -> LabeledGraph:
    """Scale-free graph by preferential attachment.

    The seed component is the complete graph on ``m`` nodes; each new node
    attaches ``m`` edges to distinct existing nodes drawn from the degree
    multiset (uniform over endpoint occurrences, redrawing on duplicates).
    While the multiset is empty (m = 1), targets fall back to a uniform
    draw over existing nodes.
    """
    if not (1 <= m < n):
        raise ValueError("need n > m >= 1")
    rng = SplitMix64(seed)
    edges: list[tuple[int, int]] = [
        (a, b) for a in range(m) for b in range(a + 1, m)
    ]
    endpoints: list[int] = [v for e in edges for v in e]
    for source in range(m, n):
        targets: set[int] = set()
        while len(targets) < m:
            if endpoints:
                cand = endpoints[rng.randint(len(endpoints))]
            else:
                cand = rng.randint(source)
            targets.add(cand)
        for t in sorted(targets):
            edges.append((t, source))
            endpoints.extend((t, source))
    triples = [(a, b, 1.0) for a, b in edges]
    return LabeledGraph.from_edges(n, triples, name=f"ba_{n}_{m}_{seed}")
