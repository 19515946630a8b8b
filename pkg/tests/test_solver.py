import itertools

import numpy as np
import pytest

from mgksolver import (
    KroneckerDelta,
    LabeledGraph,
    NoContractionError,
    Permutation,
    SolverConfig,
    SquareExponential,
    apply_permutation,
    direct_solve_oracle,
    fixed_point_oracle,
    kernel,
    solve_pcg,
    build_operator,
    transition_matrix,
)

from conftest import make_random_graph


def single_node(q, label=None):
    labels = None if label is None else np.array([label])
    return LabeledGraph.from_edges(1, [], node_labels=labels, stop_prob=[q],
                                   start_prob=[1.0])


def p2(q=0.5):
    return LabeledGraph.from_edges(2, [(0, 1, 1.0)], stop_prob=[q, q])


# -- closed forms -------------------------------------------------------------


def test_single_node_closed_form_everywhere():
    vk = KroneckerDelta(0.8).with_role("vertex")
    ga, gb = single_node(0.3, 0), single_node(0.3, 1)
    expected = 1.0 * 1.0 * 0.8 * 0.3 * 0.3
    res = kernel(ga, gb, vk)
    assert res.value == pytest.approx(expected, rel=1e-14)
    assert res.iterations == 1 and res.converged
    assert direct_solve_oracle(ga, gb, vk).value == pytest.approx(expected, rel=1e-14)
    fp = fixed_point_oracle(ga, gb, vk)
    assert fp.value == pytest.approx(expected, rel=1e-14)
    assert fp.iterations == 1  # transition term is empty; one sweep settles


def p2_pair_reference_value(q=0.5):
    # independent 4x4 assembly: (D - A (x) A) x = D qx, K = px . x
    a = np.array([[0.0, 1.0], [1.0, 0.0]])
    d = a.sum(axis=1) + q
    dx = np.diag(np.kron(d, d))
    ax = np.kron(a, a)
    qx = np.kron([q, q], [q, q])
    px = np.kron([0.5, 0.5], [0.5, 0.5])
    x = np.linalg.solve(dx - ax, dx @ qx)
    return float(px @ x)


def test_p2_pair_value():
    reference = p2_pair_reference_value()
    assert reference == pytest.approx(0.45, rel=1e-12)
    res = kernel(p2(), p2())
    assert res.value == pytest.approx(0.45, rel=1e-10)
    assert direct_solve_oracle(p2(), p2()).value == pytest.approx(0.45, rel=1e-12)
    assert fixed_point_oracle(p2(), p2()).value == pytest.approx(0.45, rel=1e-10)


# -- oracle triad --------------------------------------------------------------


def test_oracles_agree_on_random_pairs(vk_delta, ek_se):
    rng = np.random.default_rng(200)
    for trial in range(40):
        labeled = trial % 2 == 0
        ga = make_random_graph(rng, int(rng.integers(1, 25)), labeled=labeled)
        gb = make_random_graph(rng, int(rng.integers(1, 25)), labeled=labeled)
        kernels = (vk_delta, ek_se) if labeled else (None, None)
        res_pcg = kernel(ga, gb, *kernels)
        res_direct = direct_solve_oracle(ga, gb, *kernels)
        res_fixed = fixed_point_oracle(ga, gb, *kernels)
        ref = abs(res_direct.value)
        assert abs(res_pcg.value - res_direct.value) <= 1e-8 * ref
        assert abs(res_fixed.value - res_direct.value) <= 1e-8 * ref
        assert res_pcg.converged


# -- walk-sum semantics ---------------------------------------------------------


def enumerate_walks(g, length):
    """All node sequences of the given walk length (edge count length-1)."""
    adj = [[] for _ in range(g.node_count)]
    for i, j in zip(g.edges_i.tolist(), g.edges_j.tolist()):
        adj[i].append(j)
        adj[j].append(i)
    walks = [[v] for v in range(g.node_count)]
    for _ in range(length - 1):
        walks = [w + [nxt] for w in walks for nxt in adj[w[-1]]]
    return walks


def truncated_walk_sum(ga, gb, vk, ek, max_len):
    """Brute-force expectation of path-pair similarities up to a walk length."""
    pa, pb = transition_matrix(ga), transition_matrix(gb)
    la = {}
    for k in range(ga.edge_count):
        i, j = int(ga.edges_i[k]), int(ga.edges_j[k])
        la[(i, j)] = la[(j, i)] = ga.edge_labels[k]
    lb = {}
    for k in range(gb.edge_count):
        i, j = int(gb.edges_i[k]), int(gb.edges_j[k])
        lb[(i, j)] = lb[(j, i)] = gb.edge_labels[k]
    qa, qb = ga.stop_prob, gb.stop_prob
    sa, sb = ga.start_prob, gb.start_prob
    va, vb = ga.node_labels, gb.node_labels

    total = 0.0
    for length in range(1, max_len + 1):
        for wa in enumerate_walks(ga, length):
            for wb in enumerate_walks(gb, length):
                term = sa[wa[0]] * sb[wb[0]] * vk(va[wa[0]], vb[wb[0]])
                term *= qa[wa[-1]] * qb[wb[-1]]
                for k in range(1, length):
                    term *= pa[wa[k - 1], wa[k]] * pb[wb[k - 1], wb[k]]
                    term *= vk(va[wa[k]], vb[wb[k]])
                    term *= ek(la[(wa[k - 1], wa[k])], lb[(wb[k - 1], wb[k])])
                total += term
    return total


def labeled_p3(seed):
    rng = np.random.default_rng(seed)
    return LabeledGraph.from_edges(
        3,
        [(0, 1, 1.0), (1, 2, 1.0)],
        node_labels=rng.integers(0, 2, size=3),
        edge_labels=rng.uniform(0, 1, size=2),
        stop_prob=[0.6] * 3,
    )


def test_fixed_point_iterates_are_truncated_walk_sums(vk_delta, ek_se):
    ga, gb = labeled_p3(1), labeled_p3(2)
    # in-test recursion R_k = qx + T R_{k-1}; compare against enumeration
    pa, pb = transition_matrix(ga), transition_matrix(gb)
    kv = vk_delta.pairwise(ga.node_labels, gb.node_labels)
    ea = np.zeros((3, 3))
    eb = np.zeros((3, 3))
    lab_a = np.zeros((3, 3))
    lab_b = np.zeros((3, 3))
    for k in range(ga.edge_count):
        i, j = int(ga.edges_i[k]), int(ga.edges_j[k])
        lab_a[i, j] = lab_a[j, i] = ga.edge_labels[k][0]
        ea[i, j] = ea[j, i] = 1
    for k in range(gb.edge_count):
        i, j = int(gb.edges_i[k]), int(gb.edges_j[k])
        lab_b[i, j] = lab_b[j, i] = gb.edge_labels[k][0]
        eb[i, j] = eb[j, i] = 1
    t_mat = np.zeros((9, 9))
    for h1, h2, i, j in itertools.product(range(3), repeat=4):
        if ea[h1, i] and eb[h2, j]:
            t_mat[h1 * 3 + h2, i * 3 + j] = (
                pa[h1, i] * pb[h2, j] * kv[i, j] * ek_se(lab_a[h1, i], lab_b[h2, j])
            )
    qx = np.kron(ga.stop_prob, gb.stop_prob)
    px = np.kron(ga.start_prob, gb.start_prob)
    r = qx.copy()
    for k in range(5):
        walk_value = truncated_walk_sum(ga, gb, vk_delta, ek_se, k + 1)
        assert float(px @ (kv.ravel() * r)) == pytest.approx(walk_value, rel=1e-12)
        r = qx + t_mat @ r

    # iterate the recursion to its limit: the enumeration's infinite sum
    for _ in range(400):
        r = qx + t_mat @ r
    limit = float(px @ (kv.ravel() * r))
    assert direct_solve_oracle(ga, gb, vk_delta, ek_se).value == pytest.approx(
        limit, rel=1e-10
    )
    assert kernel(ga, gb, vk_delta, ek_se).value == pytest.approx(limit, rel=1e-8)
    assert fixed_point_oracle(ga, gb, vk_delta, ek_se).value == pytest.approx(
        limit, rel=1e-9
    )


# -- result bookkeeping ----------------------------------------------------------


def test_nodewise_contraction_identity(vk_delta, ek_se):
    rng = np.random.default_rng(201)
    for _ in range(10):
        ga = make_random_graph(rng, int(rng.integers(2, 12)), labeled=True)
        gb = make_random_graph(rng, int(rng.integers(2, 12)), labeled=True)
        res = kernel(ga, gb, vk_delta, ek_se)
        px = np.outer(ga.start_prob, gb.start_prob)
        recomputed = float((px * res.nodewise).sum())
        assert recomputed == pytest.approx(res.value, rel=1e-12)
        assert res.value > 0


def test_pcg_iteration_bound_and_residual():
    rng = np.random.default_rng(202)
    for _ in range(10):
        ga = make_random_graph(rng, int(rng.integers(2, 16)))
        gb = make_random_graph(rng, int(rng.integers(2, 16)))
        cfg = SolverConfig()
        op = build_operator(ga, gb)
        res = solve_pcg(op, ga, gb, cfg)
        size = ga.node_count * gb.node_count
        assert res.converged
        assert res.iterations <= size + 50
        from mgksolver import degree_vector

        b = np.outer(degree_vector(ga) * ga.stop_prob,
                     degree_vector(gb) * gb.stop_prob).ravel()
        assert res.final_residual**2 <= cfg.tolerance**2 * float(b @ b) * (1 + 1e-9)


def test_non_convergence_is_flagged_not_raised():
    rng = np.random.default_rng(203)
    ga = make_random_graph(rng, 12, density=0.5, q_range=(0.05, 0.1))
    gb = make_random_graph(rng, 12, density=0.5, q_range=(0.05, 0.1))
    res = kernel(ga, gb, cfg=SolverConfig(max_iterations=1))
    assert not res.converged
    assert res.iterations == 1
    assert np.isfinite(res.value)


def test_validation_errors_surface():
    bad = LabeledGraph.from_edges(2, [(0, 0, 1.0)])
    with pytest.raises(ValueError, match="self-loop"):
        kernel(bad, p2())


def test_fixed_point_detects_divergence():
    # a vertex "kernel" exceeding 1 breaks the contraction; the sweep must
    # notice instead of looping to max_sweeps
    from mgksolver import ConstantOne, RConvolution

    g = LabeledGraph.from_edges(
        4,
        [(i, j, 1.0) for i in range(4) for j in range(i + 1, 4)],
        node_labels=np.ones((4, 3)),
        stop_prob=[0.01] * 4,
    )
    oversized = RConvolution(ConstantOne()).with_role("vertex")  # evaluates to 9
    with pytest.raises(NoContractionError):
        fixed_point_oracle(g, g, oversized, max_sweeps=500, tol=1e-15)


# -- facade paths ------------------------------------------------------------------


def test_unlabeled_path_equals_constant_one_kernels():
    rng = np.random.default_rng(204)
    from mgksolver import ConstantOne

    for _ in range(10):
        g1 = make_random_graph(rng, int(rng.integers(2, 14)), labeled=True)
        g2 = make_random_graph(rng, int(rng.integers(2, 14)), labeled=True)
        labeled = kernel(g1, g2, ConstantOne().with_role("vertex"),
                         ConstantOne().with_role("edge"))
        from dataclasses import replace

        s1 = replace(g1, node_labels=None, edge_labels=None)
        s2 = replace(g2, node_labels=None, edge_labels=None)
        unlabeled = kernel(s1, s2)
        assert unlabeled.value == pytest.approx(labeled.value, rel=1e-10)


def test_operand_swap_symmetry(vk_delta, ek_se):
    rng = np.random.default_rng(205)
    for trial in range(10):
        labeled = trial % 2 == 0
        ga = make_random_graph(rng, int(rng.integers(1, 15)), labeled=labeled)
        gb = make_random_graph(rng, int(rng.integers(1, 15)), labeled=labeled)
        kernels = (vk_delta, ek_se) if labeled else (None, None)
        ab = kernel(ga, gb, *kernels)
        ba = kernel(gb, ga, *kernels)
        assert ab.value == pytest.approx(ba.value, rel=1e-10)
        assert np.allclose(ab.nodewise, ba.nodewise.T, rtol=1e-9, atol=1e-14)


def test_permutation_invariance(vk_delta, ek_se):
    rng = np.random.default_rng(206)
    for _ in range(10):
        ga = make_random_graph(rng, int(rng.integers(2, 15)), labeled=True)
        gb = make_random_graph(rng, int(rng.integers(2, 15)), labeled=True)
        base = kernel(ga, gb, vk_delta, ek_se)
        perm = Permutation.from_forward(rng.permutation(ga.node_count))
        permuted = kernel(apply_permutation(ga, perm), gb, vk_delta, ek_se)
        assert permuted.value == pytest.approx(base.value, rel=1e-8)
        # node-wise field follows the relabeling
        assert np.allclose(permuted.nodewise[perm.forward], base.nodewise,
                           rtol=1e-6, atol=1e-12)


def test_reorder_options_preserve_value():
    rng = np.random.default_rng(207)
    g1 = make_random_graph(rng, 24, density=0.15)
    g2 = make_random_graph(rng, 18, density=0.2)
    base = kernel(g1, g2)
    for method in ("pbr", "rcm"):
        res = kernel(g1, g2, reorder=method, seed=3)
        assert res.value == pytest.approx(base.value, rel=1e-8)
        assert np.allclose(res.nodewise, base.nodewise, rtol=1e-6, atol=1e-12)


def test_morton_reorder_needs_coordinates():
    rng = np.random.default_rng(208)
    g = make_random_graph(rng, 6)
    with pytest.raises(ValueError, match="morton"):
        kernel(g, g, reorder="morton")


def test_morton_reorder_with_coordinates():
    rng = np.random.default_rng(209)
    from dataclasses import replace

    from mgksolver import PointCloud, spatial_graph

    pts1 = rng.uniform(0, 1, size=(10, 2))
    pts2 = rng.uniform(0, 1, size=(8, 2))
    # coordinates double as vector node labels, which morton consumes
    g1 = replace(spatial_graph(PointCloud(pts1), cutoff=0.6), node_labels=pts1)
    g2 = replace(spatial_graph(PointCloud(pts2), cutoff=0.6), node_labels=pts2)
    ek = SquareExponential(1.0).with_role("edge")
    base = kernel(g1, g2, None, ek)
    res = kernel(g1, g2, None, ek, reorder="morton")
    assert res.value == pytest.approx(base.value, rel=1e-8)
