import numpy as np
import pytest

from mgksolver import (
    ConstantOne,
    KernelShapeError,
    KroneckerDelta,
    LabeledGraph,
    ProductComposite,
    SelectionThresholds,
    SquareExponential,
    Tile,
    build_operator,
    build_tiles,
    compact_tile,
    dense_offdiag_matrix,
    expand_tile,
    naive_dense_apply,
    select_tile_kernel,
    tile_product_dense_dense,
    tile_product_dense_sparse,
    tile_product_sparse_sparse,
)

from conftest import make_random_graph


def single_node(q, label):
    return LabeledGraph.from_edges(
        1, [], node_labels=np.array([label]), stop_prob=[q], start_prob=[1.0]
    )


def p2(q=0.5):
    return LabeledGraph.from_edges(2, [(0, 1, 1.0)], stop_prob=[q, q])


def random_tile(rng, nnz, labeled=False, row=0, col=0):
    bits = rng.choice(64, size=nnz, replace=False)
    bits.sort()
    bitmap = int(np.sum(1 << bits.astype(object)))
    weights = rng.uniform(0.2, 2.0, size=nnz)
    labels = rng.uniform(0.0, 2.0, size=(nnz, 1)) if labeled else None
    return Tile(row, col, bitmap, weights, labels)


# -- operator construction ---------------------------------------------------


def test_diagonal_cache_single_node_pair(vk_delta):
    vk = KroneckerDelta(0.8).with_role("vertex")
    op = build_operator(single_node(0.3, 0), single_node(0.3, 1), vk)
    assert np.allclose(op.diag, [0.3 * 0.3 / 0.8], rtol=0, atol=1e-16)


def test_diagonal_cache_p2_unlabeled():
    op = build_operator(p2(), p2())
    assert np.array_equal(op.diag, np.full(4, 2.25))


def test_build_rejects_label_dimension_mismatch():
    rng = np.random.default_rng(0)
    g = make_random_graph(rng, 6, density=0.5, labeled=True)
    # vector edge labels are 1-dimensional; a 3-component composite cannot apply
    ek = ProductComposite([ConstantOne(), ConstantOne(), ConstantOne()]).with_role("edge")
    with pytest.raises(KernelShapeError):
        build_operator(g, g, None, ek)


# -- apply -------------------------------------------------------------------


def test_offdiag_edgeless_is_zero(ek_se):
    ga = LabeledGraph.from_edges(3, [])
    gb = p2()
    op = build_operator(ga, gb)
    assert np.array_equal(op.apply_offdiag(np.ones(6)), np.zeros(6))
    rep = op.counter_report()
    assert rep.flops == rep.t1_load == rep.t1_store == 0
    assert rep.tile_pairs == 0


def test_offdiag_p2_pair_ones():
    op = build_operator(p2(), p2())
    assert np.allclose(op.apply_offdiag(np.ones(4)), np.ones(4), rtol=0, atol=0)


def test_apply_diag_and_full_apply():
    op = build_operator(p2(), p2())
    assert np.allclose(op.apply(np.ones(4)), np.full(4, 1.25), rtol=1e-15)
    assert np.array_equal(op.apply_diag(np.zeros(4)), np.zeros(4))
    sn = build_operator(single_node(0.3, 0), single_node(0.3, 1),
                        KroneckerDelta(0.8).with_role("vertex"))
    assert np.allclose(sn.apply_diag(np.array([2.0])), [0.225])


def test_apply_dimension_mismatch():
    op = build_operator(p2(), p2())
    with pytest.raises(ValueError):
        op.apply(np.ones(5))


def test_offdiag_matches_naive_randomized(vk_delta, ek_se):
    rng = np.random.default_rng(100)
    worst = 0.0
    for trial in range(100):
        labeled = trial % 2 == 0
        ga = make_random_graph(rng, int(rng.integers(1, 21)), labeled=labeled)
        gb = make_random_graph(rng, int(rng.integers(1, 21)), labeled=labeled)
        p = rng.standard_normal(ga.node_count * gb.node_count)
        kernels = (vk_delta, ek_se) if labeled else (None, None)
        op = build_operator(ga, gb, *kernels)
        got = op.apply_offdiag(p)
        want = naive_dense_apply(ga, gb, *kernels, p)
        scale = max(np.max(np.abs(want)), 1e-300)
        worst = max(worst, float(np.max(np.abs(got - want)) / scale))
    assert worst <= 1e-13


def test_operator_bilinear_form_symmetry(vk_delta, ek_se):
    rng = np.random.default_rng(101)
    for _ in range(20):
        ga = make_random_graph(rng, int(rng.integers(2, 15)), labeled=True)
        gb = make_random_graph(rng, int(rng.integers(2, 15)), labeled=True)
        op = build_operator(ga, gb, vk_delta, ek_se)
        u = rng.standard_normal(op.size)
        v = rng.standard_normal(op.size)
        left = float(u @ op.apply(v))
        right = float(v @ op.apply(u))
        assert left == pytest.approx(right, rel=1e-12)


# -- micro-kernels ------------------------------------------------------------


def quad_loop_reference(w_a, lab_a, w_b, lab_b, p_block, kernel):
    """Scalar reference: plain Python accumulation in (i, i', j, j') order."""
    acc = np.zeros((8, 8))
    for i in range(8):
        for ip in range(8):
            s = 0.0
            for j in range(8):
                for jp in range(8):
                    ke = 1.0
                    if kernel is not None and lab_a is not None:
                        ke = kernel(lab_a[i, j], lab_b[ip, jp])
                    s += w_a[i, j] * w_b[ip, jp] * ke * p_block[j, jp]
            acc[i, ip] = s
    return acc


def test_dense_dense_full_ones():
    w = np.ones((8, 8))
    p = np.ones((8, 8))
    acc = np.zeros((8, 8))
    tile_product_dense_dense(w, None, w, None, p, acc)
    assert np.array_equal(acc, np.full((8, 8), 64.0))


def test_dense_dense_zero_block_noop():
    acc = np.zeros((8, 8))
    tile_product_dense_dense(np.zeros((8, 8)), None, np.ones((8, 8)), None,
                             np.ones((8, 8)), acc)
    assert np.array_equal(acc, np.zeros((8, 8)))


def test_dense_dense_matches_quad_loop():
    rng = np.random.default_rng(7)
    ek = SquareExponential(0.8)
    for labeled in (False, True):
        for _ in range(5):
            wa = rng.uniform(0.1, 2.0, size=(8, 8))
            wb = rng.uniform(0.1, 2.0, size=(8, 8))
            la = rng.uniform(0, 2, size=(8, 8, 1)) if labeled else None
            lb = rng.uniform(0, 2, size=(8, 8, 1)) if labeled else None
            p = rng.uniform(-1, 1, size=(8, 8))
            acc = np.zeros((8, 8))
            tile_product_dense_dense(wa, la, wb, lb, p, acc, ek if labeled else None)
            ref = quad_loop_reference(wa, la, wb, lb, p, ek if labeled else None)
            scale = np.max(np.abs(ref))
            assert np.max(np.abs(acc - ref)) <= 1e-15 * scale


def test_sparse_sparse_single_bit_each():
    rng = np.random.default_rng(8)
    ta = Tile(0, 0, 1 << 10, np.array([1.5]))  # local (1, 2)
    tb = Tile(0, 0, 1 << 26, np.array([2.0]))  # local (3, 2)
    p = rng.uniform(-1, 1, size=(8, 8))
    acc = np.zeros((8, 8))
    tile_product_sparse_sparse(ta, tb, p, acc)
    expected = np.zeros((8, 8))
    expected[1, 3] = 1.5 * 2.0 * p[2, 2]
    assert np.allclose(acc, expected, rtol=0, atol=0)


def test_sparse_sparse_matches_dense_dense():
    rng = np.random.default_rng(9)
    ek = SquareExponential(1.0)
    for labeled in (False, True):
        for _ in range(10):
            ta = random_tile(rng, int(rng.integers(1, 11)), labeled)
            tb = random_tile(rng, int(rng.integers(1, 11)), labeled)
            p = rng.uniform(-1, 1, size=(8, 8))
            acc_sparse = np.zeros((8, 8))
            tile_product_sparse_sparse(ta, tb, p, acc_sparse, ek if labeled else None)
            wa, la = expand_tile(ta)
            wb, lb = expand_tile(tb)
            acc_dense = np.zeros((8, 8))
            tile_product_dense_dense(wa, la, wb, lb, p, acc_dense, ek if labeled else None)
            scale = max(np.max(np.abs(acc_dense)), 1e-300)
            assert np.max(np.abs(acc_sparse - acc_dense)) <= 1e-12 * scale


def test_dense_sparse_examples_and_agreement():
    rng = np.random.default_rng(10)
    ek = SquareExponential(1.0)
    # sparse side one bit, dense side full: one fused column of contributions
    dense_w = np.ones((8, 8))
    sparse = Tile(0, 0, 1 << 5, np.array([1.0]))  # local (0, 5)
    p = np.ones((8, 8))
    acc = np.zeros((8, 8))
    tile_product_dense_sparse(dense_w, None, sparse, p, acc)
    assert acc.sum() == 64.0  # 8 rows x 8 dense columns, one sparse bit
    assert np.array_equal(acc[:, 0], np.full(8, 8.0))

    # sparse side full bitmap degenerates to dense x dense
    full = compact_tile(0, 0, rng.uniform(0.1, 1.0, size=(8, 8)))
    p = rng.uniform(-1, 1, size=(8, 8))
    wa = rng.uniform(0.1, 2.0, size=(8, 8))
    acc1 = np.zeros((8, 8))
    acc2 = np.zeros((8, 8))
    wfull, _ = expand_tile(full)
    tile_product_dense_sparse(wa, None, full, p, acc1)
    tile_product_dense_dense(wa, None, wfull, None, p, acc2)
    assert np.max(np.abs(acc1 - acc2)) <= 1e-12 * np.max(np.abs(acc2))

    # random mixed tiles, both orientations, labeled and unlabeled
    for labeled in (False, True):
        for _ in range(8):
            ta = random_tile(rng, int(rng.integers(1, 64)), labeled)
            tb = random_tile(rng, int(rng.integers(1, 64)), labeled)
            p = rng.uniform(-1, 1, size=(8, 8))
            kernel = ek if labeled else None
            wa, la = expand_tile(ta)
            wb, lb = expand_tile(tb)
            ref = np.zeros((8, 8))
            tile_product_dense_dense(wa, la, wb, lb, p, ref, kernel)
            scale = max(np.max(np.abs(ref)), 1e-300)

            acc_b_sparse = np.zeros((8, 8))
            tile_product_dense_sparse(wa, la, tb, p, acc_b_sparse, kernel, dense_is_a=True)
            assert np.max(np.abs(acc_b_sparse - ref)) <= 1e-12 * scale

            acc_a_sparse = np.zeros((8, 8))
            tile_product_dense_sparse(wb, lb, ta, p, acc_a_sparse, kernel, dense_is_a=False)
            assert np.max(np.abs(acc_a_sparse - ref)) <= 1e-12 * scale


def test_micro_kernel_agreement_over_nnz_grid():
    rng = np.random.default_rng(11)
    ek = KroneckerDelta(0.5)
    for nnz_a in (1, 4, 9, 17, 33, 64):
        for nnz_b in (1, 6, 16, 32, 64):
            labeled = (nnz_a + nnz_b) % 2 == 0
            ta = random_tile(rng, nnz_a, labeled)
            tb = random_tile(rng, nnz_b, labeled)
            kernel = ek if labeled else None
            p = rng.uniform(-1, 1, size=(8, 8))
            wa, la = expand_tile(ta)
            wb, lb = expand_tile(tb)
            results = []
            for which in ("dd", "ss", "ds"):
                acc = np.zeros((8, 8))
                if which == "dd":
                    tile_product_dense_dense(wa, la, wb, lb, p, acc, kernel)
                elif which == "ss":
                    tile_product_sparse_sparse(ta, tb, p, acc, kernel)
                else:
                    tile_product_dense_sparse(wa, la, tb, p, acc, kernel)
                results.append(acc)
            scale = max(np.max(np.abs(results[0])), 1e-300)
            for other in results[1:]:
                assert np.max(np.abs(other - results[0])) <= 1e-12 * scale


# -- selection -----------------------------------------------------------------


def test_selection_examples():
    assert select_tile_kernel(4, 4, "unlabeled") == "sparse-sparse"
    assert select_tile_kernel(16, 16, "labeled") == "sparse-sparse"
    assert select_tile_kernel(64, 64, "unlabeled") == "dense-dense"
    assert select_tile_kernel(64, 64, "labeled") == "dense-dense"
    assert select_tile_kernel(4, 40, "unlabeled") == "dense-sparse"


def test_selection_threshold_transparency(vk_delta, ek_se):
    rng = np.random.default_rng(12)
    forced = [
        SelectionThresholds(64, 64, 65),  # everything sparse-sparse
        SelectionThresholds(0, 0, 1),  # everything dense-dense
        SelectionThresholds(0, 0, 65),  # everything dense-sparse
        None,  # defaults
    ]
    for labeled in (False, True):
        ga = make_random_graph(rng, 20, density=0.3, labeled=labeled)
        gb = make_random_graph(rng, 17, density=0.3, labeled=labeled)
        p = rng.standard_normal(20 * 17)
        kernels = (vk_delta, ek_se) if labeled else (None, None)
        outs = []
        for th in forced:
            op = build_operator(ga, gb, *kernels, thresholds=th)
            outs.append(op.apply_offdiag(p))
        scale = max(np.max(np.abs(outs[0])), 1e-300)
        for other in outs[1:]:
            assert np.max(np.abs(other - outs[0])) <= 1e-12 * scale


def test_onthefly_fallback_matches_cached_plan(vk_delta, ek_se):
    # tiny cache budget forces per-apply micro-kernel evaluation; memory then
    # stays proportional to the inputs instead of the product's nonzeros
    rng = np.random.default_rng(14)
    for labeled in (False, True):
        ga = make_random_graph(rng, 22, density=0.4, labeled=labeled)
        gb = make_random_graph(rng, 19, density=0.4, labeled=labeled)
        kernels = (vk_delta, ek_se) if labeled else (None, None)
        p = rng.standard_normal(22 * 19)
        cached = build_operator(ga, gb, *kernels)
        lazy = build_operator(ga, gb, *kernels, cache_limit_bytes=0)
        assert cached.cached and not lazy.cached
        a, b = cached.apply_offdiag(p), lazy.apply_offdiag(p)
        scale = max(np.max(np.abs(a)), 1e-300)
        assert np.max(np.abs(a - b)) <= 1e-12 * scale
        # counters are execution-strategy independent
        assert cached.counter_report().flops == lazy.counter_report().flops
        assert cached.counter_report().t1_load == lazy.counter_report().t1_load


def test_onthefly_fallback_in_dense_stream_mode():
    n = 16
    g = LabeledGraph.from_edges(
        n, [(i, j, 1.0) for i in range(n) for j in range(i + 1, n)]
    )
    lazy = build_operator(g, g, force_dense_stream=True, cache_limit_bytes=0)
    cached = build_operator(g, g, force_dense_stream=True)
    p = np.linspace(-1, 1, n * n)
    assert np.allclose(lazy.apply_offdiag(p), cached.apply_offdiag(p), rtol=1e-13)
    assert lazy.counter_report().flops == n**4 * 3


# -- naive reference -----------------------------------------------------------


def test_naive_single_node_pair():
    ga, gb = single_node(0.3, 0), single_node(0.3, 1)
    assert dense_offdiag_matrix(ga, gb).shape == (1, 1)
    assert naive_dense_apply(ga, gb, None, None, np.array([1.0])) == np.array([0.0])


def test_naive_p2_antidiagonal():
    L = dense_offdiag_matrix(p2(), p2())
    expected = np.zeros((4, 4))
    expected[0, 3] = expected[1, 2] = expected[2, 1] = expected[3, 0] = 1.0
    assert np.array_equal(L, expected)


def test_naive_guard():
    rng = np.random.default_rng(13)
    ga = make_random_graph(rng, 70)
    gb = make_random_graph(rng, 70)
    with pytest.raises(ValueError):
        naive_dense_apply(ga, gb, None, None, np.ones(4900))
