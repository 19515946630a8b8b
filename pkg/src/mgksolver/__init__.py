"""Matrix-free marginalized graph kernel solver.

Computes the random-walk similarity between labeled, weighted graphs by
preconditioned conjugate gradient over the tensor-product graph's
generalized Laplacian, never materializing the product system.  Sparsity is
exploited at two levels: only non-empty 8x8 octiles are stored (pruned
further by partition-based node reordering), and each octile keeps a 64-bit
occupancy bitmap with compacted values.  Abstract (E, F, X) cost counters
instrument the product kernels, and dense brute-force oracles back every
numerical path.
"""

from .basekernels import (
    BaseKernel,
    CompactPolynomial,
    ConstantOne,
    KernelRangeError,
    KernelShapeError,
    KroneckerDelta,
    ProductComposite,
    RConvolution,
    SquareExponential,
    kernel_from_spec,
)
from .costs import CostModel, CounterReport, PRIMITIVES, predict_costs
from .generators import gen_ba, gen_nws
from .gram import (
    GramResult,
    compute_gram,
    load_gram_binary,
    load_gram_csv,
    normalize_gram,
    save_gram_binary,
    save_gram_csv,
    schedule_pairs,
)
from .graphio import (
    GraphFileError,
    PointCloud,
    load_edge_list,
    load_graph,
    save_graph,
    spatial_graph,
)
from .graphs import (
    DEFAULT_STOP_PROB,
    LabeledGraph,
    ValidationReport,
    degree_vector,
    transition_matrix,
    validate_graph,
)
from .product import (
    ProductOperator,
    SelectionThresholds,
    build_operator,
    dense_offdiag_matrix,
    naive_dense_apply,
    select_tile_kernel,
    tile_product_dense_dense,
    tile_product_dense_sparse,
    tile_product_sparse_sparse,
)
from .reorder import (
    PartitionState,
    Permutation,
    apply_permutation,
    fm_refine,
    morton_reorder,
    objective,
    partition_objective,
    pbr_reorder,
    rcm_reorder,
)
from .rng import SplitMix64
from .solver import (
    KernelResult,
    NoContractionError,
    SolverConfig,
    direct_solve_oracle,
    fixed_point_oracle,
    kernel,
    solve_pcg,
)
from .tiles import (
    TILE_SIZE,
    Tile,
    TiledMatrix,
    TileHistogram,
    build_tiles,
    compact_tile,
    dump_tiles,
    expand_full,
    expand_tile,
    tile_histogram,
)

__version__ = "0.1.0"
