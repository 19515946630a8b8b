"""Kernel evaluation: preconditioned conjugate gradient plus dense oracles.

The similarity of two labeled graphs is ``K = px^T x`` where ``x`` solves
``(D V^-1 - A (x) A' . ke(E, E')) x = D qx`` over node pairs, ``px``/``qx``
being the Kronecker products of the starting/stopping probabilities.  The
solution field ``x``, reshaped over node pairs, is the node-wise similarity.

``solve_pcg`` is the production path: standard PCG with the Jacobi
preconditioner ``M = diag(D V^-1)`` and the relative stopping rule
``r^T r < eps^2 * b^T b``.  Two independent oracles cross-check it: a dense
Cholesky solve of the same system, and a fixed-point sweep
``R <- qx + T R`` whose k-th iterate equals the walk-similarity series
truncated at walk length k+1 (``T`` couples node pairs through transition
probabilities and both base kernels).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .basekernels import BaseKernel
from .graphs import LabeledGraph, degree_vector, validate_graph
from .product import (
    DEFAULT_VERTEX_FLOOR,
    NAIVE_GUARD,
    ProductOperator,
    build_operator,
    dense_offdiag_matrix,
    vertex_similarity_matrix,
)
from .reorder import Permutation, apply_permutation, morton_reorder, pbr_reorder, rcm_reorder


@dataclass
class SolverConfig:
    tolerance: float = 1e-10  # relative: stop when r.r < tol^2 * b.b
    max_iterations: Optional[int] = None  # default 10 * n * m
    oracle_guard: int = NAIVE_GUARD
    deterministic: bool = True
    v_min: float = DEFAULT_VERTEX_FLOOR

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class KernelResult:
    value: float
    nodewise: np.ndarray
    iterations: int
    final_residual: float
    converged: bool
    wall_time: float = 0.0
    counters: Optional[object] = field(default=None, repr=False)


class NoContractionError(RuntimeError):
    """Fixed-point sweeps diverged; base kernel ranges are likely invalid."""


def _product_vectors(g_a: LabeledGraph, g_b: LabeledGraph):
    d_a, d_b = degree_vector(g_a), degree_vector(g_b)
    px = np.outer(g_a.start_prob, g_b.start_prob).ravel()
    qx = np.outer(g_a.stop_prob, g_b.stop_prob).ravel()
    b = np.outer(d_a * g_a.stop_prob, d_b * g_b.stop_prob).ravel()
    return d_a, d_b, px, qx, b


def solve_pcg(op: ProductOperator, g_a: LabeledGraph, g_b: LabeledGraph,
              cfg: SolverConfig | None = None) -> KernelResult:
    """Jacobi-preconditioned CG on the tensor-product walk system.

    Non-convergence is reported via ``converged=False`` with the best
    iterate, so batch computations can record and continue.
    """
    cfg = cfg or SolverConfig()
    _, _, px, _, b = _product_vectors(g_a, g_b)
    size = op.size
    max_iter = cfg.max_iterations or 10 * size
    eps_abs = cfg.tolerance**2 * float(b @ b)

    start = time.perf_counter()
    x = np.zeros(size)
    r = b.copy()
    z = r / op.diag
    p = z.copy()
    rho = float(r @ z)
    converged = bool(r @ r < eps_abs)
    iterations = 0
    while not converged and iterations < max_iter:
        a = op.apply(p)
        iterations += 1
        alpha = rho / float(p @ a)
        x += alpha * p
        r -= alpha * a
        if float(r @ r) < eps_abs:
            converged = True
            break
        z = r / op.diag
        rho_next = float(r @ z)
        p = z + (rho_next / rho) * p
        rho = rho_next
    wall = time.perf_counter() - start

    return KernelResult(
        value=float(px @ x),
        nodewise=x.reshape(op.n, op.m),
        iterations=iterations,
        final_residual=float(np.sqrt(r @ r)),
        converged=converged,
        wall_time=wall,
        counters=op.counter_report(),
    )


def direct_solve_oracle(g_a: LabeledGraph, g_b: LabeledGraph,
                        vertex_kernel: BaseKernel | None = None,
                        edge_kernel: BaseKernel | None = None,
                        cfg: SolverConfig | None = None) -> KernelResult:
    """Dense SPD factorization of the materialized system."""
    cfg = cfg or SolverConfig()
    n, m = g_a.node_count, g_b.node_count
    if n * m > cfg.oracle_guard:
        raise ValueError(f"system size {n * m} exceeds oracle guard {cfg.oracle_guard}")
    d_a, d_b, px, _, b = _product_vectors(g_a, g_b)
    kv = vertex_similarity_matrix(g_a, g_b, vertex_kernel, cfg.v_min)
    diag = (np.outer(d_a, d_b) / kv).ravel()
    system = np.diag(diag) - dense_offdiag_matrix(g_a, g_b, edge_kernel)
    try:
        factor = scipy.linalg.cho_factor(system)
    except scipy.linalg.LinAlgError as exc:
        raise ValueError(
            "system is not positive definite; check kernel ranges and q > 0"
        ) from exc
    x = scipy.linalg.cho_solve(factor, b)
    residual = float(np.linalg.norm(b - system @ x))
    return KernelResult(
        value=float(px @ x),
        nodewise=x.reshape(n, m),
        iterations=0,
        final_residual=residual,
        converged=True,
    )


def fixed_point_oracle(g_a: LabeledGraph, g_b: LabeledGraph,
                       vertex_kernel: BaseKernel | None = None,
                       edge_kernel: BaseKernel | None = None,
                       max_sweeps: int = 20000,
                       tol: float = 1e-12,
                       cfg: SolverConfig | None = None) -> KernelResult:
    """Iterate ``R <- qx + T R`` from ``R = qx``.

    After k sweeps the iterate equals the walk series truncated at walk
    length k+1, so convergence of the sweeps is convergence of the kernel's
    defining sum.  Five consecutive growing updates abort with
    :class:`NoContractionError`.
    """
    cfg = cfg or SolverConfig()
    n, m = g_a.node_count, g_b.node_count
    if n * m > cfg.oracle_guard:
        raise ValueError(f"system size {n * m} exceeds oracle guard {cfg.oracle_guard}")
    d_a, d_b, px, qx, _ = _product_vectors(g_a, g_b)
    kv_flat = vertex_similarity_matrix(g_a, g_b, vertex_kernel, cfg.v_min).ravel()
    dx = np.outer(d_a, d_b).ravel()
    transition = dense_offdiag_matrix(g_a, g_b, edge_kernel) / dx[:, None] * kv_flat[None, :]

    r = qx.copy()
    change = 0.0
    previous = np.inf
    growing = 0
    sweeps = 0
    converged = False
    for sweeps in range(1, max_sweeps + 1):
        r_next = qx + transition @ r
        change = float(np.max(np.abs(r_next - r)))
        r = r_next
        if change < tol:
            converged = True
            break
        if change > previous:
            growing += 1
            if growing >= 5:
                raise NoContractionError(
                    f"update norm grew for {growing} consecutive sweeps"
                )
        else:
            growing = 0
        previous = change

    x = kv_flat * r
    return KernelResult(
        value=float(px @ x),
        nodewise=x.reshape(n, m),
        iterations=sweeps,
        final_residual=change,
        converged=converged,
    )


_REORDER_METHODS = ("pbr", "rcm", "morton", "none", None)


def kernel(g_a: LabeledGraph, g_b: LabeledGraph,
           vertex_kernel: BaseKernel | None = None,
           edge_kernel: BaseKernel | None = None,
           cfg: SolverConfig | None = None,
           *,
           reorder: str | None = None,
           seed: int = 0,
           operator_options: dict | None = None) -> KernelResult:
    """Validate, optionally reorder, build the operator, and solve.

    The node-wise field is mapped back to the input node order, so a
    reordering choice changes performance only.
    """
    cfg = cfg or SolverConfig()
    for name, g in (("first", g_a), ("second", g_b)):
        report = validate_graph(g)
        if not report.ok:
            raise ValueError(f"{name} graph invalid: " + "; ".join(report.violations))
    if reorder not in _REORDER_METHODS:
        raise ValueError(f"unknown reorder method {reorder!r}")

    perm_a = perm_b = None
    ga, gb = g_a, g_b
    if reorder and reorder != "none":
        perm_a = _reorder_for(g_a, reorder, seed)
        perm_b = _reorder_for(g_b, reorder, seed)
        ga = apply_permutation(g_a, perm_a)
        gb = apply_permutation(g_b, perm_b)

    op = build_operator(ga, gb, vertex_kernel, edge_kernel,
                        v_min=cfg.v_min, **(operator_options or {}))
    result = solve_pcg(op, ga, gb, cfg)
    if perm_a is not None:
        result.nodewise = result.nodewise[perm_a.forward[:, None], perm_b.forward[None, :]]
    return result


def _reorder_for(g: LabeledGraph, method: str, seed: int) -> Permutation:
    if method == "pbr":
        return pbr_reorder(g, seed=seed)
    if method == "rcm":
        return rcm_reorder(g)
    if method == "morton":
        labels = g.node_labels
        if labels is None or labels.ndim != 2 or labels.shape[1] not in (2, 3):
            raise ValueError("morton reordering needs 2D/3D coordinate node labels")
        return morton_reorder(labels)
    raise ValueError(f"unknown reorder method {method!r}")
