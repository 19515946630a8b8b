"""All-pairs Gram matrix over a dataset, with cost-aware scheduling.

Pairs are ordered longest-job-first using the estimate
``c(a, b) = n_a * n_b * (nnz_a / n_a) * (nnz_b / n_b)`` and consumed from a
shared queue by worker threads; every unordered pair (including the
diagonal) is solved once and mirrored.  The solve for one pair is
deterministic, so the resulting matrix is bit-identical for any worker
count.  Pairs that fail to converge are recorded as NaN with a flag and
never abort the batch.
"""

from __future__ import annotations

import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .basekernels import BaseKernel
from .graphs import LabeledGraph, validate_graph
from .solver import SolverConfig, kernel

GRAM_MAGIC = b"GRAM"
GRAM_VERSION = 1


@dataclass
class GramResult:
    matrix: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    wall_time: float
    order: list[tuple[int, int]]


def schedule_pairs(sizes, nnzs) -> list[tuple[int, int]]:
    """All unordered pairs (a <= b) by descending cost estimate.

    Ties break lexicographically on (a, b), so uniform datasets come out in
    plain index order.
    """
    sizes = list(sizes)
    nnzs = list(nnzs)
    if len(sizes) != len(nnzs):
        raise ValueError("sizes and nnzs must align")
    pairs = [(a, b) for a in range(len(sizes)) for b in range(a, len(sizes))]

    def cost(pair):
        a, b = pair
        return sizes[a] * sizes[b] * (nnzs[a] / sizes[a]) * (nnzs[b] / sizes[b])

    return sorted(pairs, key=lambda ab: (-cost(ab), ab))


def compute_gram(dataset: list[LabeledGraph],
                 vertex_kernel: BaseKernel | None = None,
                 edge_kernel: BaseKernel | None = None,
                 cfg: SolverConfig | None = None,
                 workers: int = 1,
                 deterministic: bool = True) -> GramResult:
    cfg = cfg or SolverConfig()
    for idx, g in enumerate(dataset):
        report = validate_graph(g)
        if not report.ok:
            raise ValueError(f"graph {idx} invalid: " + "; ".join(report.violations))
    count = len(dataset)
    order = schedule_pairs(
        [g.node_count for g in dataset], [2 * g.edge_count for g in dataset]
    )
    matrix = np.zeros((count, count))
    iterations = np.zeros((count, count), dtype=np.int64)
    converged = np.zeros((count, count), dtype=bool)

    def solve_pair(pair):
        a, b = pair
        return a, b, kernel(dataset[a], dataset[b], vertex_kernel, edge_kernel, cfg)

    start = time.perf_counter()
    if workers <= 1:
        results = map(solve_pair, order)
    else:
        pool = ThreadPoolExecutor(max_workers=workers)
        results = pool.map(solve_pair, order)
    for a, b, res in results:
        value = res.value if res.converged else float("nan")
        matrix[a, b] = matrix[b, a] = value
        iterations[a, b] = iterations[b, a] = res.iterations
        converged[a, b] = converged[b, a] = res.converged
    if workers > 1:
        pool.shutdown()
    wall = time.perf_counter() - start

    return GramResult(matrix, iterations, converged, wall, order)


def normalize_gram(matrix: np.ndarray) -> np.ndarray:
    """K[a,b] / sqrt(K[a,a] K[b,b]); unit diagonal, NaN entries propagate."""
    matrix = np.asarray(matrix, dtype=np.float64)
    diag = np.diagonal(matrix)
    if np.any(~np.isnan(diag) & (diag <= 0)):
        raise ValueError("Gram diagonal must be strictly positive")
    scale = np.sqrt(np.outer(diag, diag))
    out = matrix / scale
    np.fill_diagonal(out, np.where(np.isnan(diag), np.nan, 1.0))
    return out


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save_gram_csv(matrix: np.ndarray, ids: list[str], path) -> None:
    """Header row of graph ids, then one row of values per graph."""
    with open(path, "w") as fh:
        fh.write(",".join(ids) + "\n")
        for row in np.asarray(matrix):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_gram_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        ids = fh.readline().strip().split(",")
        rows = [[float(v) for v in line.strip().split(",")] for line in fh if line.strip()]
    matrix = np.array(rows)
    if matrix.shape != (len(ids), len(ids)):
        raise ValueError("CSV Gram matrix is not square against its header")
    return ids, matrix


def save_gram_binary(matrix: np.ndarray, path) -> None:
    """Raw format: magic 'GRAM', version byte 1, u64 LE count, row-major
    float64 LE values."""
    matrix = np.asarray(matrix, dtype=np.float64)
    count = matrix.shape[0]
    if matrix.shape != (count, count):
        raise ValueError("Gram matrix must be square")
    with open(path, "wb") as fh:
        fh.write(GRAM_MAGIC)
        fh.write(bytes([GRAM_VERSION]))
        fh.write(struct.pack("<Q", count))
        fh.write(matrix.astype("<f8").tobytes(order="C"))


def load_gram_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != GRAM_MAGIC:
            raise ValueError(f"bad magic {magic!r}; not a GRAM file")
        version = fh.read(1)[0]
        if version != GRAM_VERSION:
            raise ValueError(f"unsupported GRAM version {version}")
        (count,) = struct.unpack("<Q", fh.read(8))
        data = np.frombuffer(fh.read(count * count * 8), dtype="<f8")
    if data.size != count * count:
        raise ValueError("truncated GRAM payload")
    return data.reshape(count, count).copy()
