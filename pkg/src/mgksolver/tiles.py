"""Two-level sparse storage built on 8x8 octiles.

The adjacency (and edge label) matrix is cut into 8x8 tiles; only non-empty
tiles are kept, as a coordinate list sorted by (tile_row, tile_col).  Within
a tile, occupancy is a 64-bit bitmap with bit ``local_row * 8 + local_col``
set for every nonzero, and the values are compacted in ascending bit order.
Matrices are logically zero-padded to the next multiple of 8.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .graphs import LabeledGraph

TILE_SIZE = 8
_FULL_MASK = (1 << 64) - 1


@dataclass
class Tile:
    tile_row: int
    tile_col: int
    bitmap: int
    weights: np.ndarray
    labels: Optional[np.ndarray] = None
    # bit coordinates, derived from the bitmap once at construction
    local_rows: np.ndarray = field(init=False)
    local_cols: np.ndarray = field(init=False)

    def __post_init__(self):
        if not (0 < self.bitmap <= _FULL_MASK):
            raise ValueError("tile bitmap must be a nonzero 64-bit mask")
        bits = _set_bits(self.bitmap)
        if len(self.weights) != len(bits):
            raise ValueError("weight count does not match bitmap population")
        if self.labels is not None and len(self.labels) != len(bits):
            raise ValueError("label count does not match bitmap population")
        self.local_rows = bits // TILE_SIZE
        self.local_cols = bits % TILE_SIZE

    @property
    def nnz(self) -> int:
        return self.bitmap.bit_count()


@dataclass
class TiledMatrix:
    node_count: int
    tile_size: int
    tiles: list[Tile]

    def __post_init__(self):
        if self.tile_size != TILE_SIZE:
            raise ValueError(f"only tile_size={TILE_SIZE} is supported")

    @property
    def tile_count(self) -> int:
        return len(self.tiles)

    @property
    def padded_size(self) -> int:
        return -(-self.node_count // self.tile_size) * self.tile_size

    def offdiag_tile_count(self) -> int:
        return sum(1 for t in self.tiles if t.tile_row != t.tile_col)


@dataclass
class TileHistogram:
    """Non-empty tile counts bucketed by tile population (1..64)."""

    buckets: np.ndarray  # length 65, index = nnz, index 0 unused
    total: int
    mean_density: float


def _set_bits(bitmap: int) -> np.ndarray:
    return np.array([b for b in range(64) if bitmap >> b & 1], dtype=np.int64)


def build_tiles(g: LabeledGraph) -> TiledMatrix:
    """Cut the symmetric weight/label matrix of ``g`` into octiles.

    Each undirected edge contributes its two symmetric positions, so the
    expansion of the result reproduces the dense symmetric matrix exactly
    and the total stored weight count is twice the edge count.
    """
    t = TILE_SIZE
    rows = np.concatenate([g.edges_i, g.edges_j])
    cols = np.concatenate([g.edges_j, g.edges_i])
    w = np.concatenate([g.weights, g.weights])
    labels = None
    if g.edge_labels is not None:
        labels = np.concatenate([g.edge_labels, g.edge_labels])

    if len(rows) == 0:
        return TiledMatrix(g.node_count, t, [])

    trow, tcol = rows // t, cols // t
    bit = (rows % t) * t + (cols % t)
    order = np.lexsort((bit, tcol, trow))
    trow, tcol, bit, w = trow[order], tcol[order], bit[order], w[order]
    if labels is not None:
        labels = labels[order]

    tiles: list[Tile] = []
    key = trow * (max(tcol.max(), 0) + 1) + tcol
    boundaries = np.flatnonzero(np.diff(key)) + 1
    for lo, hi in zip(
        np.concatenate([[0], boundaries]), np.concatenate([boundaries, [len(key)]])
    ):
        bits = bit[lo:hi]
        bitmap = int(np.sum(1 << bits.astype(object)))
        tiles.append(
            Tile(
                tile_row=int(trow[lo]),
                tile_col=int(tcol[lo]),
                bitmap=bitmap,
                weights=w[lo:hi].copy(),
                labels=None if labels is None else labels[lo:hi].copy(),
            )
        )
    return TiledMatrix(g.node_count, t, tiles)


def expand_tile(tile: Tile):
    """Decompress a tile to a dense 8x8 weight block (and label block).

    Positions whose bit is clear hold exact zeros; for categorical labels
    the cleared positions hold -1 so they can never alias a real token.
    """
    t = TILE_SIZE
    wblock = np.zeros((t, t))
    wblock[tile.local_rows, tile.local_cols] = tile.weights
    lblock = None
    if tile.labels is not None:
        if tile.labels.dtype.kind in "iu":
            lblock = np.full((t, t), -1, dtype=np.int64)
        else:
            lblock = np.zeros((t, t) + tile.labels.shape[1:])
        lblock[tile.local_rows, tile.local_cols] = tile.labels
    return wblock, lblock


def compact_tile(tile_row: int, tile_col: int, wblock: np.ndarray, lblock=None) -> Tile:
    """Inverse of :func:`expand_tile`; nonzero weights define the bitmap."""
    t = TILE_SIZE
    rows, cols = np.nonzero(wblock)
    order = np.argsort(rows * t + cols)
    rows, cols = rows[order], cols[order]
    bitmap = int(np.sum(1 << (rows * t + cols).astype(object))) if len(rows) else 0
    labels = None if lblock is None else lblock[rows, cols]
    return Tile(tile_row, tile_col, bitmap, wblock[rows, cols].copy(), labels)


def expand_full(m: TiledMatrix) -> np.ndarray:
    """Dense padded weight matrix assembled from all stored tiles."""
    t = m.tile_size
    size = m.padded_size
    out = np.zeros((size, size))
    for tile in m.tiles:
        wblock, _ = expand_tile(tile)
        out[tile.tile_row * t : (tile.tile_row + 1) * t,
            tile.tile_col * t : (tile.tile_col + 1) * t] = wblock
    return out


def tile_histogram(m: TiledMatrix) -> TileHistogram:
    buckets = np.zeros(65, dtype=np.int64)
    for tile in m.tiles:
        buckets[tile.nnz] += 1
    total = int(buckets.sum())
    mean_density = float(np.mean([t.nnz for t in m.tiles]) / 64.0) if m.tiles else 0.0
    return TileHistogram(buckets=buckets, total=total, mean_density=mean_density)


def dump_tiles(m: TiledMatrix) -> str:
    """Debug dump, one line per tile: ``r c 0x<16 hex digits> <nnz>``."""
    return "\n".join(
        f"{t.tile_row} {t.tile_col} 0x{t.bitmap:016x} {t.nnz}" for t in m.tiles
    )
