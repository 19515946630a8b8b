"""Marshalling between numpy arrays and the solver's external interfaces.

This package contains no algorithmic logic: graphs are serialized to the
JSON graph schema, the ``mgk`` command line is invoked as a subprocess, and
its delimited outputs (key-value lines, node-wise CSV, GRAM binary) are
parsed back into numpy arrays.  Values survive the trip bit-for-bit because
both sides serialize floats with shortest round-trip decimal strings.
"""

from __future__ import annotations

import json
import struct
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

_CLI = [sys.executable, "-m", "mgksolver"]


class SolverError(RuntimeError):
    """The solver CLI rejected the input; carries the core's message."""


@dataclass
class BoundGraph:
    """Graph described by plain arrays.

    ``adjacency`` is either a dense symmetric 2D weight matrix (strict upper
    triangle is scanned; asymmetry is rejected) or a triplet of arrays
    ``(i, j, w)``.  Labels are optional: integer arrays are categorical
    tokens, float arrays are vectors.  With a dense adjacency, edge labels
    are given as a dense matrix sampled at the edge positions.
    """

    adjacency: object
    node_labels: Optional[np.ndarray] = None
    edge_labels: Optional[np.ndarray] = None
    start_prob: Optional[np.ndarray] = None
    stop_prob: Optional[np.ndarray] = None
    name: str = ""

    def edge_arrays(self):
        adj = self.adjacency
        if isinstance(adj, tuple) and len(adj) == 3:
            i, j, w = (np.asarray(x) for x in adj)
            labels = None if self.edge_labels is None else np.asarray(self.edge_labels)
            n = int(max(i.max(initial=-1), j.max(initial=-1))) + 1
            if self.node_labels is not None:
                n = max(n, len(self.node_labels))
            if self.stop_prob is not None:
                n = max(n, len(self.stop_prob))
            return n, i, j, w, labels
        dense = np.asarray(adj, dtype=np.float64)
        if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
            raise ValueError("dense adjacency must be square")
        if not np.array_equal(dense, dense.T):
            raise ValueError("dense adjacency must be symmetric")
        i, j = np.nonzero(np.triu(dense, k=1))
        w = dense[i, j]
        labels = None
        if self.edge_labels is not None:
            label_matrix = np.asarray(self.edge_labels)
            if label_matrix.shape[:2] != dense.shape:
                raise ValueError("dense edge labels must mirror the adjacency shape")
            labels = label_matrix[i, j]
        return dense.shape[0], i, j, w, labels


def _label_kind(labels) -> str:
    if labels is None:
        return "none"
    return "categorical" if np.asarray(labels).dtype.kind in "iu" else "vector"


def _encode(value, kind):
    if kind == "categorical":
        return int(value)
    return [float(v) for v in np.atleast_1d(value)]


def write_graph_json(g: BoundGraph, path) -> None:
    """Serialize a BoundGraph to the solver's JSON graph schema."""
    n, ei, ej, w, elabs = g.edge_arrays()
    nk = _label_kind(g.node_labels)
    ek = _label_kind(elabs)
    doc = {
        "name": g.name,
        "node_count": int(n),
        "node_label_kind": nk,
        "edge_label_kind": ek,
        "nodes": [
            {"id": idx} if nk == "none" else {"id": idx, "label": _encode(g.node_labels[idx], nk)}
            for idx in range(n)
        ],
        "edges": [
            {
                "i": int(ei[k]),
                "j": int(ej[k]),
                "w": float(w[k]),
                **({} if ek == "none" else {"label": _encode(elabs[k], ek)}),
            }
            for k in range(len(w))
        ],
    }
    if g.start_prob is not None:
        doc["start_prob"] = [float(v) for v in g.start_prob]
    if g.stop_prob is not None:
        doc["stop_prob"] = [float(v) for v in g.stop_prob]
    Path(path).write_text(json.dumps(doc))


def read_graph_json(path) -> BoundGraph:
    """Parse a solver graph file back into arrays."""
    doc = json.loads(Path(path).read_text())
    nk = doc.get("node_label_kind", "none")
    ek = doc.get("edge_label_kind", "none")
    nodes = sorted(doc["nodes"], key=lambda d: d["id"])
    node_labels = None
    if nk != "none":
        raw = [d["label"] for d in nodes]
        node_labels = (
            np.array(raw, dtype=np.int64) if nk == "categorical" else np.array(raw, dtype=np.float64)
        )
    edges = doc["edges"]
    i = np.array([e["i"] for e in edges], dtype=np.int64)
    j = np.array([e["j"] for e in edges], dtype=np.int64)
    w = np.array([e["w"] for e in edges], dtype=np.float64)
    edge_labels = None
    if ek != "none":
        raw = [e["label"] for e in edges]
        edge_labels = (
            np.array(raw, dtype=np.int64) if ek == "categorical" else np.array(raw, dtype=np.float64)
        )
    return BoundGraph(
        adjacency=(i, j, w),
        node_labels=node_labels,
        edge_labels=edge_labels,
        start_prob=np.array(doc["start_prob"]) if doc.get("start_prob") else None,
        stop_prob=np.array(doc["stop_prob"]) if doc.get("stop_prob") else None,
        name=doc.get("name", ""),
    )


def run_cli(args: list[str]) -> str:
    proc = subprocess.run(_CLI + args, capture_output=True, text=True)
    if proc.returncode != 0:
        message = proc.stderr.strip().splitlines()
        raise SolverError(message[-1] if message else f"exit code {proc.returncode}")
    return proc.stdout


def parse_key_values(out: str) -> dict:
    pairs = {}
    for line in out.splitlines():
        parts = line.split(maxsplit=1)
        if len(parts) == 2 and parts[0] not in pairs:
            pairs[parts[0]] = parts[1]
    return pairs


def read_nodewise_csv(path) -> np.ndarray:
    rows = [
        [float(v) for v in line.split(",")]
        for line in Path(path).read_text().splitlines()
        if line
    ]
    return np.array(rows)


GRAM_MAGIC = b"GRAM"


def read_gram_binary(path) -> np.ndarray:
    """Reader for the GRAM container: magic, version byte, u64 LE count,
    row-major float64 LE payload."""
    raw = Path(path).read_bytes()
    if raw[:4] != GRAM_MAGIC:
        raise ValueError(f"bad magic {raw[:4]!r}; not a GRAM file")
    if raw[4] != 1:
        raise ValueError(f"unsupported GRAM version {raw[4]}")
    (count,) = struct.unpack("<Q", raw[5:13])
    data = np.frombuffer(raw[13 : 13 + count * count * 8], dtype="<f8")
    if data.size != count * count:
        raise ValueError("truncated GRAM payload")
    return data.reshape(count, count).copy()


def kernel_options_to_flags(options: dict) -> list[str]:
    """Translate option names (mirroring CLI flags) to argv strings."""
    flags = []
    mapping = {
        "vkernel": "--vkernel",
        "ekernel": "--ekernel",
        "q": "--q",
        "tol": "--tol",
        "reorder": "--reorder",
    }
    for key, flag in mapping.items():
        if key in options and options[key] is not None:
            flags += [flag, str(options[key])]
    if options.get("unlabeled"):
        flags.append("--unlabeled")
    return flags


def workdir() -> tempfile.TemporaryDirectory:
    return tempfile.TemporaryDirectory(prefix="mgkbind-")
