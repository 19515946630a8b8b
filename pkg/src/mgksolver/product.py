"""Matrix-free operator for the tensor-product walk system.

For a graph pair the generalized Laplacian ``D V^-1 - A (x) A' . ke(E, E')``
is never materialized.  The diagonal ``D V^-1`` is cached as a vector; the
off-diagonal product with a vector is evaluated by enumerating all pairs of
stored non-empty octiles of the two graphs (empty pairs contribute exactly
zero and are skipped) and running one of three tile-level micro-kernels:

* ``tile_product_dense_dense``   -- both tiles expanded, all 64 x 64 fused
  contributions in fixed (i, i', j, j') order;
* ``tile_product_sparse_sparse`` -- iterate only set-bit pairs of the two
  bitmaps;
* ``tile_product_dense_sparse``  -- one side expanded, bit-scan the other.

``select_tile_kernel`` chooses among them from the two tile populations;
the choice affects performance and counters, never values.  At build time
the operator compiles the tile-pair enumeration into batched numpy payloads
(the same fused contributions the micro-kernels define, grouped for
vectorized execution); counters still account for each apply as if the
tiles were streamed per pair, which is what the abstract cost model prices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basekernels import BaseKernel, ConstantOne, KernelShapeError
from .costs import CostModel, CounterReport
from .graphs import LabeledGraph, degree_vector
from .tiles import TILE_SIZE, Tile, TiledMatrix, build_tiles, expand_tile

DEFAULT_VERTEX_FLOOR = 1e-12
DEFAULT_CACHE_LIMIT = 64 * 2**20  # product-cache budget; beyond it, recompute per apply


@dataclass
class SelectionThresholds:
    """Crossover points between the tile micro-kernels.

    sparse x sparse wins while both tiles are thin (up to 8-10 nonzeros
    unlabeled, up to 16 labeled); dense x dense wins once both are dense;
    dense x sparse covers the middle ground.
    """

    sparse_min_max: int  # sparse iff min(nnz) <= this ...
    sparse_max_max: int  # ... and max(nnz) <= this
    dense_min: int  # dense iff both nnz >= this

    @staticmethod
    def for_mode(mode: str) -> "SelectionThresholds":
        if mode == "unlabeled":
            return SelectionThresholds(10, 16, 32)
        return SelectionThresholds(16, 24, 32)


def select_tile_kernel(nnz_a: int, nnz_b: int, mode: str,
                       thresholds: SelectionThresholds | None = None) -> str:
    th = thresholds or SelectionThresholds.for_mode(mode)
    lo, hi = min(nnz_a, nnz_b), max(nnz_a, nnz_b)
    if lo <= th.sparse_min_max and hi <= th.sparse_max_max:
        return "sparse-sparse"
    if lo >= th.dense_min:
        return "dense-dense"
    return "dense-sparse"


# ---------------------------------------------------------------------------
# Tile-level micro-kernels
# ---------------------------------------------------------------------------


def _pairwise_or_ones(edge_kernel, lab_a, lab_b, na, nb):
    if edge_kernel is None or lab_a is None or lab_b is None:
        return None
    flat_a = lab_a.reshape(na, -1) if lab_a.ndim > 1 else lab_a.reshape(na)
    flat_b = lab_b.reshape(nb, -1) if lab_b.ndim > 1 else lab_b.reshape(nb)
    return edge_kernel.pairwise(flat_a, flat_b)


def tile_product_dense_dense(w_a, lab_a, w_b, lab_b, p_block, acc,
                             edge_kernel: BaseKernel | None = None) -> None:
    """Accumulate all 64 x 64 fused contributions of two expanded tiles.

    acc[i, i'] += sum_{j, j'} w_a[i,j] * w_b[i',j'] * ke(lab_a[i,j],
    lab_b[i',j']) * p[j, j'], in ascending (i, i', j, j') order.
    """
    t = TILE_SIZE
    ke = _pairwise_or_ones(edge_kernel, None if lab_a is None else lab_a.reshape((t * t,) + lab_a.shape[2:]),
                           None if lab_b is None else lab_b.reshape((t * t,) + lab_b.shape[2:]),
                           t * t, t * t)
    if ke is None:
        acc += w_a @ p_block @ w_b.T
    else:
        ke4 = ke.reshape(t, t, t, t)  # axes (i, j, i', j')
        acc += np.einsum("ij,kl,jl,ijkl->ik", w_a, w_b, p_block, ke4)


def tile_product_sparse_sparse(tile_a: Tile, tile_b: Tile, p_block, acc,
                               edge_kernel: BaseKernel | None = None) -> None:
    """Fuse only the set-bit pairs of two compact tiles."""
    t = TILE_SIZE
    ia, ja = tile_a.local_rows, tile_a.local_cols
    ib, jb = tile_b.local_rows, tile_b.local_cols
    vals = tile_a.weights[:, None] * tile_b.weights[None, :]
    ke = _pairwise_or_ones(edge_kernel, tile_a.labels, tile_b.labels,
                           len(ia), len(ib))
    if ke is not None:
        vals = vals * ke
    vals = vals * p_block[ja[:, None], jb[None, :]]
    out_idx = (ia[:, None] * t + ib[None, :]).ravel()
    acc += np.bincount(out_idx, weights=vals.ravel(), minlength=t * t).reshape(t, t)


def tile_product_dense_sparse(w_dense, lab_dense, sparse_tile: Tile, p_block, acc,
                              edge_kernel: BaseKernel | None = None,
                              dense_is_a: bool = True) -> None:
    """One expanded tile against one compact tile.

    The dense side is scanned in full; the sparse side contributes one
    fused column (or row) per set bit.
    """
    t = TILE_SIZE
    isp, jsp = sparse_tile.local_rows, sparse_tile.local_cols
    nnz = len(isp)
    ke = _pairwise_or_ones(
        edge_kernel,
        None if lab_dense is None else lab_dense.reshape((t * t,) + lab_dense.shape[2:]),
        sparse_tile.labels,
        t * t,
        nnz,
    )
    ke3 = np.ones((t, t, nnz)) if ke is None else ke.reshape(t, t, nnz)
    fused = w_dense[:, :, None] * ke3
    if dense_is_a:
        # acc[i, isp_b] += sum_j w_dense[i,j] * ke(i,j,b) * w_b * p[j, jsp_b]
        cols = np.einsum("ijb,jb->ib", fused, p_block[:, jsp])
        cols = cols * sparse_tile.weights[None, :]
        np.add.at(acc, (np.arange(t)[:, None], isp[None, :]), cols)
    else:
        # sparse side is the first operand: rows of the output
        rows = np.einsum("ijb,bj->bi", fused, p_block[jsp, :])
        rows = rows * sparse_tile.weights[:, None]
        np.add.at(acc, (isp[:, None], np.arange(t)[None, :]), rows)


# ---------------------------------------------------------------------------
# Operator construction
# ---------------------------------------------------------------------------


def _edge_mode(g_a: LabeledGraph, g_b: LabeledGraph) -> str:
    """Label presence must agree, except that an edgeless graph carries no
    evidence either way."""
    la = g_a.edge_label_kind != "none"
    lb = g_b.edge_label_kind != "none"
    if g_a.edge_count and g_b.edge_count and la != lb:
        raise KernelShapeError("edge label presence must be uniform across a pair")
    labeled = (la and g_a.edge_count > 0) or (lb and g_b.edge_count > 0)
    return "labeled" if labeled else "unlabeled"


def vertex_similarity_matrix(g_a: LabeledGraph, g_b: LabeledGraph,
                             vertex_kernel: BaseKernel | None,
                             v_min: float = DEFAULT_VERTEX_FLOOR) -> np.ndarray:
    """kv(v_i, v'_i') for all node pairs, floored at ``v_min`` before any
    inversion downstream; all-ones when node labels are absent."""
    la, lb = g_a.node_labels, g_b.node_labels
    if (la is None) != (lb is None):
        raise KernelShapeError("node label presence must be uniform across a pair")
    if la is None or vertex_kernel is None or isinstance(vertex_kernel, ConstantOne):
        return np.ones((g_a.node_count, g_b.node_count))
    kv = vertex_kernel.pairwise(la, lb)
    kv = np.maximum(kv, v_min)
    if np.any(kv <= 0):
        raise ValueError("vertex kernel produced non-positive similarity")
    return kv


class ProductOperator:
    """Matrix-free ``D V^-1 - A (x) A' . ke(E, E')`` for one graph pair."""

    def __init__(self, g_a: LabeledGraph, g_b: LabeledGraph,
                 vertex_kernel: BaseKernel | None = None,
                 edge_kernel: BaseKernel | None = None,
                 *,
                 tiles_a: TiledMatrix | None = None,
                 tiles_b: TiledMatrix | None = None,
                 cost_model: CostModel | None = None,
                 thresholds: SelectionThresholds | None = None,
                 v_min: float = DEFAULT_VERTEX_FLOOR,
                 force_dense_stream: bool = False,
                 cache_limit_bytes: int = DEFAULT_CACHE_LIMIT):
        self.g_a, self.g_b = g_a, g_b
        self.n, self.m = g_a.node_count, g_b.node_count
        self.size = self.n * self.m
        self.mode = _edge_mode(g_a, g_b)
        self.vertex_kernel = vertex_kernel
        self.edge_kernel = edge_kernel if self.mode == "labeled" else None
        self.tiles_a = tiles_a if tiles_a is not None else build_tiles(g_a)
        self.tiles_b = tiles_b if tiles_b is not None else build_tiles(g_b)
        self.thresholds = thresholds or SelectionThresholds.for_mode(self.mode)
        self.force_dense_stream = force_dense_stream
        self.cache_limit_bytes = cache_limit_bytes

        self.d_a = degree_vector(g_a)
        self.d_b = degree_vector(g_b)
        kv = vertex_similarity_matrix(g_a, g_b, vertex_kernel, v_min)
        self.diag = (np.outer(self.d_a, self.d_b) / kv).ravel()

        if cost_model is None:
            comps = 0
            if self.mode == "labeled":
                lab = g_a.edge_labels if g_a.edge_labels is not None else g_b.edge_labels
                comps = 1 if lab.ndim == 1 else lab.shape[1]
            x = 3 if self.mode == "unlabeled" else 3 + (
                edge_kernel.flop_count if edge_kernel is not None else 0)
            cost_model = CostModel(E=4 * comps, F=4, X=x)
        self.model = cost_model
        self.counters = CounterReport()
        self._build_plan()

    # -- plan compilation ---------------------------------------------------

    def _variant(self, ta: Tile, tb: Tile) -> str:
        if self.force_dense_stream:
            return "dense-dense"
        return select_tile_kernel(ta.nnz, tb.nnz, self.mode, self.thresholds)

    def _build_plan(self):
        t = TILE_SIZE
        na_t = -(-self.n // t)
        mb_t = -(-self.m // t)
        self._na, self._mb = na_t * t, mb_t * t
        model = self.model
        E, F, X, r = model.E, model.F, model.X, model.r

        # first pass: per-apply counter increments and the cache footprint,
        # without allocating anything proportional to the pair count
        per_apply = CounterReport()
        out_blocks = set()
        cache_bytes = 0
        for ta in self.tiles_a.tiles:
            for tb in self.tiles_b.tiles:
                per_apply.tile_pairs += 1
                out_blocks.add((ta.tile_row, tb.tile_row))
                variant = self._variant(ta, tb)
                if self.force_dense_stream:
                    per_apply.flops += t**4 * X
                    per_apply.t1_load += t * t * (E + 2 * F)
                    per_apply.t2_store += t * t * (E + F)
                    per_apply.t2_load += t**4 * (E + F) * (1 / t + 1 / r)
                else:
                    per_apply.t1_load += 8 + tb.nnz * (E + F) + t * t * F
                    if variant == "dense-dense":
                        contrib = t**4
                        per_apply.t2_store += t * t * (E + F)
                    elif variant == "dense-sparse":
                        contrib = t * t * min(ta.nnz, tb.nnz)
                        per_apply.t2_store += t * t * (E + F)
                    else:
                        contrib = ta.nnz * tb.nnz
                        per_apply.t2_store += (ta.nnz + tb.nnz) * (E + F)
                    per_apply.flops += contrib * X
                    per_apply.t2_load += contrib * (E + 2 * F)
                if variant == "dense-dense":
                    cache_bytes += t**4 * 8 if self.edge_kernel is not None else 2 * t * t * 8 + 32
                else:
                    cache_bytes += ta.nnz * tb.nnz * 24
        per_apply.t1_store = len(out_blocks) * t * t * F
        self._per_apply = per_apply

        # expanded blocks per tile: proportional to the input, not to pairs
        self._expanded_a = [expand_tile(tile) for tile in self.tiles_a.tiles]
        self._expanded_b = [expand_tile(tile) for tile in self.tiles_b.tiles]

        # second pass: precompute per-pair products only while that cache
        # stays within budget; otherwise fall back to evaluating the tile
        # micro-kernels on the fly so memory stays O(nm + nnz)
        self.cached = cache_bytes <= self.cache_limit_bytes
        self._dense_idx = None
        self._coo = None
        if not self.cached:
            return

        dense_entries = []
        coo_out, coo_p, coo_vals = [], [], []
        for ia, ta in enumerate(self.tiles_a.tiles):
            for ib, tb in enumerate(self.tiles_b.tiles):
                if self._variant(ta, tb) == "dense-dense":
                    dense_entries.append((ta, tb, ia, ib))
                else:
                    self._append_coo(ta, tb, coo_out, coo_p, coo_vals)

        if dense_entries:
            self._dense_idx = (
                np.array([e[0].tile_row for e in dense_entries]),
                np.array([e[1].tile_row for e in dense_entries]),
                np.array([e[0].tile_col for e in dense_entries]),
                np.array([e[1].tile_col for e in dense_entries]),
            )
            if self.edge_kernel is None:
                self._dense_wa = np.stack([self._expanded_a[e[2]][0] for e in dense_entries])
                self._dense_wb = np.stack([self._expanded_b[e[3]][0] for e in dense_entries])
                self._dense_q = None
            else:
                qs = []
                for ta, tb, ia, ib in dense_entries:
                    wa, la = self._expanded_a[ia]
                    wb, lb = self._expanded_b[ib]
                    ke = self.edge_kernel.pairwise(
                        la.reshape((t * t,) + la.shape[2:]),
                        lb.reshape((t * t,) + lb.shape[2:]),
                    ).reshape(t, t, t, t)
                    m4 = np.einsum("ij,kl,ijkl->ikjl", wa, wb, ke)
                    qs.append(m4.reshape(t * t, t * t))
                self._dense_q = np.stack(qs)

        if coo_vals:
            self._coo = (
                np.concatenate(coo_out),
                np.concatenate(coo_p),
                np.concatenate(coo_vals),
            )

    def _append_coo(self, ta: Tile, tb: Tile, coo_out, coo_p, coo_vals):
        """Flatten one tile pair's fused contributions into global COO terms."""
        t = TILE_SIZE
        mb = self._mb
        vals = ta.weights[:, None] * tb.weights[None, :]
        ke = _pairwise_or_ones(self.edge_kernel, ta.labels, tb.labels,
                               ta.nnz, tb.nnz)
        if ke is not None:
            vals = vals * ke
        out_rows = ta.tile_row * t + ta.local_rows
        out_cols = tb.tile_row * t + tb.local_rows
        p_rows = ta.tile_col * t + ta.local_cols
        p_cols = tb.tile_col * t + tb.local_cols
        coo_out.append((out_rows[:, None] * mb + out_cols[None, :]).ravel())
        coo_p.append((p_rows[:, None] * mb + p_cols[None, :]).ravel())
        coo_vals.append(vals.ravel())

    # -- application ---------------------------------------------------------

    def _padded(self, p: np.ndarray) -> np.ndarray:
        buf = np.zeros((self._na, self._mb))
        buf[: self.n, : self.m] = p.reshape(self.n, self.m)
        return buf

    def apply_offdiag(self, p: np.ndarray) -> np.ndarray:
        """(A (x) A' . ke(E, E')) p over stored tile pairs only."""
        if len(p) != self.size:
            raise ValueError(f"vector length {len(p)} != operator size {self.size}")
        t = TILE_SIZE
        pad = self._padded(np.asarray(p, dtype=np.float64))
        out = np.zeros((self._na, self._mb))

        if not self.cached:
            self._apply_onthefly(pad, out)
            self._accumulate_counters()
            return out[: self.n, : self.m].ravel()

        if self._dense_idx is not None:
            rows_a, rows_b, cols_a, cols_b = self._dense_idx
            p4 = pad.reshape(self._na // t, t, self._mb // t, t).transpose(0, 2, 1, 3)
            blocks = p4[cols_a, cols_b]
            if self._dense_q is None:
                contrib = np.einsum("pij,pjk,plk->pil", self._dense_wa, blocks,
                                    self._dense_wb)
            else:
                flat = np.einsum("pij,pj->pi", self._dense_q,
                                 blocks.reshape(len(blocks), t * t))
                contrib = flat.reshape(-1, t, t)
            out4 = np.zeros((self._na // t, self._mb // t, t, t))
            np.add.at(out4, (rows_a, rows_b), contrib)
            out += out4.transpose(0, 2, 1, 3).reshape(self._na, self._mb)

        if self._coo is not None:
            idx_out, idx_p, vals = self._coo
            terms = vals * pad.ravel()[idx_p]
            out += np.bincount(idx_out, weights=terms,
                               minlength=self._na * self._mb).reshape(out.shape)

        self._accumulate_counters()
        return out[: self.n, : self.m].ravel()

    def _apply_onthefly(self, pad: np.ndarray, out: np.ndarray) -> None:
        """Evaluate the tile micro-kernels per pair without cached products."""
        t = TILE_SIZE
        for ia, ta in enumerate(self.tiles_a.tiles):
            wa, la = self._expanded_a[ia]
            out_rows = slice(ta.tile_row * t, ta.tile_row * t + t)
            p_rows = slice(ta.tile_col * t, ta.tile_col * t + t)
            for ib, tb in enumerate(self.tiles_b.tiles):
                pblk = pad[p_rows, tb.tile_col * t : tb.tile_col * t + t]
                acc = out[out_rows, tb.tile_row * t : tb.tile_row * t + t]
                variant = self._variant(ta, tb)
                if variant == "dense-dense":
                    wb, lb = self._expanded_b[ib]
                    tile_product_dense_dense(wa, la, wb, lb, pblk, acc, self.edge_kernel)
                elif variant == "sparse-sparse":
                    tile_product_sparse_sparse(ta, tb, pblk, acc, self.edge_kernel)
                elif ta.nnz >= tb.nnz:
                    tile_product_dense_sparse(wa, la, tb, pblk, acc, self.edge_kernel,
                                              dense_is_a=True)
                else:
                    wb, lb = self._expanded_b[ib]
                    tile_product_dense_sparse(wb, lb, ta, pblk, acc, self.edge_kernel,
                                              dense_is_a=False)

    def apply_diag(self, p: np.ndarray) -> np.ndarray:
        if len(p) != self.size:
            raise ValueError(f"vector length {len(p)} != operator size {self.size}")
        return self.diag * np.asarray(p, dtype=np.float64)

    def apply(self, p: np.ndarray) -> np.ndarray:
        """Full operator: diagonal part minus off-diagonal part."""
        return self.apply_diag(p) - self.apply_offdiag(p)

    # -- counters -------------------------------------------------------------

    def _accumulate_counters(self):
        c, inc = self.counters, self._per_apply
        c.flops += inc.flops
        c.t1_load += inc.t1_load
        c.t1_store += inc.t1_store
        c.t2_load += inc.t2_load
        c.t2_store += inc.t2_store
        c.tile_pairs += inc.tile_pairs

    def reset_counters(self) -> None:
        self.counters.reset()

    def counter_report(self) -> CounterReport:
        return self.counters.finalize()


def build_operator(g_a: LabeledGraph, g_b: LabeledGraph,
                   vertex_kernel: BaseKernel | None = None,
                   edge_kernel: BaseKernel | None = None,
                   **kwargs) -> ProductOperator:
    """Construct the matrix-free operator; memory stays O(nm + nnz)."""
    return ProductOperator(g_a, g_b, vertex_kernel, edge_kernel, **kwargs)


# ---------------------------------------------------------------------------
# Dense reference path
# ---------------------------------------------------------------------------

NAIVE_GUARD = 4096


def dense_offdiag_matrix(g_a: LabeledGraph, g_b: LabeledGraph,
                         edge_kernel: BaseKernel | None = None) -> np.ndarray:
    """Explicit (nm x nm) product matrix ``(A (x) A') . ke(E, E')``.

    Row/column index convention: pair (i, i') lives at flat index i*m + i'.
    """
    n, m = g_a.node_count, g_b.node_count
    mode = _edge_mode(g_a, g_b)
    if mode == "unlabeled" or edge_kernel is None:
        return np.kron(g_a.dense_adjacency(), g_b.dense_adjacency())
    out = np.zeros((n, m, n, m))
    if g_a.edge_count and g_b.edge_count:
        ai = np.concatenate([g_a.edges_i, g_a.edges_j])
        aj = np.concatenate([g_a.edges_j, g_a.edges_i])
        aw = np.concatenate([g_a.weights, g_a.weights])
        alab = np.concatenate([g_a.edge_labels, g_a.edge_labels])
        bi = np.concatenate([g_b.edges_i, g_b.edges_j])
        bj = np.concatenate([g_b.edges_j, g_b.edges_i])
        bw = np.concatenate([g_b.weights, g_b.weights])
        blab = np.concatenate([g_b.edge_labels, g_b.edge_labels])
        ke = edge_kernel.pairwise(alab, blab)
        out[ai[:, None], bi[None, :], aj[:, None], bj[None, :]] = (
            aw[:, None] * bw[None, :] * ke
        )
    return out.reshape(n * m, n * m)


def naive_dense_apply(g_a: LabeledGraph, g_b: LabeledGraph,
                      vertex_kernel: BaseKernel | None,
                      edge_kernel: BaseKernel | None,
                      p: np.ndarray, *, guard: int = NAIVE_GUARD) -> np.ndarray:
    """Form the product matrix explicitly and multiply; oracle and baseline.

    The vertex kernel does not enter the off-diagonal block; it is accepted
    for interface symmetry with the matrix-free path.
    """
    size = g_a.node_count * g_b.node_count
    if size > guard:
        raise ValueError(f"system size {size} exceeds materialization guard {guard}")
    if len(p) != size:
        raise ValueError("vector length does not match system size")
    return dense_offdiag_matrix(g_a, g_b, edge_kernel) @ np.asarray(p, dtype=np.float64)
