"""Dataset ingestion: JSON graph files, plain edge lists, and point clouds.

The JSON schema mirrors :class:`mgksolver.graphs.LabeledGraph`::

    {
      "name": "g0",
      "node_count": 3,
      "node_label_kind": "none" | "categorical" | "vector",
      "edge_label_kind": "none" | "categorical" | "vector",
      "nodes": [{"id": 0, "label": 6}, ...],
      "edges": [{"i": 0, "j": 1, "w": 1.0, "label": 1.45}, ...],
      "start_prob": [...] | null,
      "stop_prob":  [...] | null
    }

Node ids must be dense 0..n-1; categorical labels are integer tokens;
vector labels are fixed-length lists of floats.  Floats are serialized with
``repr``, whose shortest round-trip representation makes save->load exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graphs import DEFAULT_STOP_PROB, LabeledGraph


class GraphFileError(ValueError):
    """Malformed graph file; the message carries the offending field."""


@dataclass
class PointCloud:
    """2D/3D coordinates with per-point categorical labels."""

    points: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] not in (2, 3):
            raise ValueError("points must be an (n, 2) or (n, 3) array")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (len(self.points),):
                raise ValueError("labels must align with points")


def _encode_label(value, kind: str):
    if kind == "categorical":
        return int(value)
    return [float(v) for v in np.atleast_1d(value)]


def save_graph(g: LabeledGraph, path) -> None:
    nk, ek = g.node_label_kind, g.edge_label_kind
    doc = {
        "name": g.name,
        "node_count": g.node_count,
        "node_label_kind": nk,
        "edge_label_kind": ek,
        "nodes": [
            {"id": i}
            if nk == "none"
            else {"id": i, "label": _encode_label(g.node_labels[i], nk)}
            for i in range(g.node_count)
        ],
        "edges": [
            {
                "i": int(g.edges_i[k]),
                "j": int(g.edges_j[k]),
                "w": float(g.weights[k]),
                **(
                    {}
                    if ek == "none"
                    else {"label": _encode_label(g.edge_labels[k], ek)}
                ),
            }
            for k in range(g.edge_count)
        ],
        "start_prob": [float(v) for v in g.start_prob],
        "stop_prob": [float(v) for v in g.stop_prob],
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def _decode_labels(entries, kind: str, field: str, count: int):
    if kind == "none":
        return None
    if kind == "categorical":
        try:
            return np.array([int(e) for e in entries], dtype=np.int64)
        except (TypeError, ValueError) as exc:
            raise GraphFileError(
                f"{field}: categorical labels must be integer tokens"
            ) from exc
    rows = []
    width = None
    for e in entries:
        row = np.atleast_1d(np.asarray(e, dtype=np.float64))
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise GraphFileError(f"{field}: vector label dimensionality varies")
        rows.append(row)
    if not rows:
        return np.zeros((0, 1))
    return np.stack(rows)


def load_graph(path, *, default_q: float = DEFAULT_STOP_PROB) -> LabeledGraph:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise GraphFileError(f"{path}: line {exc.lineno}: {exc.msg}") from exc

    for key in ("node_count", "nodes", "edges"):
        if key not in doc:
            raise GraphFileError(f"{path}: missing field {key!r}")
    n = int(doc["node_count"])
    nodes = doc["nodes"]
    if len(nodes) != n:
        raise GraphFileError(f"{path}: nodes: expected {n} entries, got {len(nodes)}")
    ids = [int(node["id"]) for node in nodes]
    if sorted(ids) != list(range(n)):
        raise GraphFileError(f"{path}: nodes: ids must be dense 0..{n - 1}")
    nk = doc.get("node_label_kind", "none")
    ek = doc.get("edge_label_kind", "none")
    if nk not in ("none", "categorical", "vector") or ek not in (
        "none",
        "categorical",
        "vector",
    ):
        raise GraphFileError(f"{path}: unknown label kind")

    by_id = sorted(nodes, key=lambda d: int(d["id"]))
    if nk != "none":
        missing = [d["id"] for d in by_id if "label" not in d]
        if missing:
            raise GraphFileError(f"{path}: node {missing[0]}: missing declared label")
        node_labels = _decode_labels([d["label"] for d in by_id], nk, "nodes", n)
    else:
        node_labels = None

    triples = []
    edge_label_entries = []
    for pos, edge in enumerate(doc["edges"]):
        try:
            i, j, w = int(edge["i"]), int(edge["j"]), float(edge["w"])
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphFileError(f"{path}: edge {pos}: needs integer i, j and float w") from exc
        if not (0 <= i < n) or not (0 <= j < n):
            raise GraphFileError(f"{path}: edge {pos}: unknown node id {max(i, j)}")
        triples.append((i, j, w))
        if ek != "none":
            if "label" not in edge:
                raise GraphFileError(f"{path}: edge {pos}: missing declared label")
            edge_label_entries.append(edge["label"])
        elif "label" in edge:
            raise GraphFileError(f"{path}: edge {pos}: label present but kind is none")
    edge_labels = (
        _decode_labels(edge_label_entries, ek, "edges", len(triples))
        if ek != "none"
        else None
    )

    return LabeledGraph.from_edges(
        n,
        triples,
        node_labels=node_labels,
        edge_labels=edge_labels,
        start_prob=doc.get("start_prob"),
        stop_prob=doc.get("stop_prob"),
        default_q=default_q,
        name=doc.get("name", Path(path).stem),
    )


def load_edge_list(path, *, default_q: float = DEFAULT_STOP_PROB) -> LabeledGraph:
    """Plain text importer for unlabeled graphs: lines of ``i j [w]``.

    ``#`` starts a comment; node count is one past the largest id.
    """
    triples = []
    max_id = -1
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphFileError(f"{path}: line {lineno}: expected 'i j [w]'")
        try:
            i, j = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError as exc:
            raise GraphFileError(f"{path}: line {lineno}: {exc}") from exc
        triples.append((i, j, w))
        max_id = max(max_id, i, j)
    if max_id < 0:
        raise GraphFileError(f"{path}: no edges found")
    return LabeledGraph.from_edges(
        max_id + 1, triples, default_q=default_q, name=Path(path).stem
    )


def spatial_graph(pc: PointCloud, cutoff: float,
                  *, default_q: float = DEFAULT_STOP_PROB) -> LabeledGraph:
    """Connect points closer than ``cutoff``.

    Weights follow ``w(d) = (1 - (d / cutoff)^2)^2``: 1 at zero separation,
    smoothly 0 with zero slope at the cutoff.  Edges are labeled with the
    separation distance.
    """
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    pts = pc.points
    n = len(pts)
    diffs = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt(np.sum(diffs * diffs, axis=-1))
    triples = []
    labels = []
    for i in range(n):
        for j in range(i + 1, n):
            d = dist[i, j]
            if d < cutoff:
                triples.append((i, j, (1.0 - (d / cutoff) ** 2) ** 2))
                labels.append(d)
    return LabeledGraph.from_edges(
        n,
        triples,
        node_labels=pc.labels,
        edge_labels=np.array(labels, dtype=np.float64) if labels else None,
        default_q=default_q,
        name="spatial",
    )
