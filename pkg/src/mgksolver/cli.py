"""Command-line interface.

Subcommands: ``kernel`` (one pair), ``gram`` (all pairs), ``reorder``,
``tiles``, ``bench`` (cost model), ``gen`` (synthetic graphs).  Report-style
subcommands can render a figure next to their delimited output via
``--plot``.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .basekernels import kernel_from_spec
from .costs import CostModel, PRIMITIVES, predict_costs
from .generators import gen_ba, gen_nws
from .gram import (
    compute_gram,
    load_gram_binary,
    normalize_gram,
    save_gram_binary,
    save_gram_csv,
)
from .graphio import load_graph, save_graph
from .graphs import DEFAULT_STOP_PROB, LabeledGraph
from .product import build_operator
from .reorder import apply_permutation, morton_reorder, objective, pbr_reorder, rcm_reorder
from .solver import SolverConfig, kernel
from .tiles import build_tiles, dump_tiles, tile_histogram


def _strip_labels(g: LabeledGraph) -> LabeledGraph:
    return replace(g, node_labels=None, edge_labels=None)


def _load(path: str, q0: float, unlabeled: bool) -> LabeledGraph:
    g = load_graph(path, default_q=q0)
    return _strip_labels(g) if unlabeled else g


def _fmt(value: float) -> str:
    return repr(float(value))


# ---------------------------------------------------------------------------


def _cmd_kernel(args) -> int:
    g_a = _load(args.graph_a, args.q, args.unlabeled)
    g_b = _load(args.graph_b, args.q, args.unlabeled)
    vk = kernel_from_spec(args.vkernel).with_role("vertex")
    ek = kernel_from_spec(args.ekernel).with_role("edge")
    cfg = SolverConfig(tolerance=args.tol)
    reorder = None if args.reorder == "none" else args.reorder
    result = kernel(g_a, g_b, vk, ek, cfg, reorder=reorder, seed=args.seed)
    print(f"value {_fmt(result.value)}")
    print(f"iterations {result.iterations}")
    print(f"residual {_fmt(result.final_residual)}")
    print(f"converged {'true' if result.converged else 'false'}")
    if args.nodewise:
        with open(args.nodewise, "w") as fh:
            for row in result.nodewise:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
        print(f"nodewise {args.nodewise}")
    return 0


def _collect_dataset(spec: str) -> list[Path]:
    path = Path(spec)
    if path.is_dir():
        files = sorted(path.glob("*.json"))
        if not files:
            raise SystemExit(f"no .json graphs under {path}")
        return files
    return [Path(p) for p in spec.split(",")]


def _cmd_gram(args) -> int:
    files = _collect_dataset(args.dataset)
    graphs = [_load(str(f), args.q, args.unlabeled) for f in files]
    vk = kernel_from_spec(args.vkernel).with_role("vertex")
    ek = kernel_from_spec(args.ekernel).with_role("edge")
    cfg = SolverConfig(tolerance=args.tol, deterministic=args.deterministic)
    result = compute_gram(graphs, vk, ek, cfg, workers=args.workers,
                          deterministic=args.deterministic)
    matrix = normalize_gram(result.matrix) if args.normalize else result.matrix
    ids = [g.name or f.stem for g, f in zip(graphs, files)]
    if args.format == "csv":
        save_gram_csv(matrix, ids, args.out)
    else:
        save_gram_binary(matrix, args.out)
    failures = int((~result.converged).sum() // 2)
    print(f"graphs {len(graphs)}")
    print(f"pairs {len(result.order)}")
    print(f"failures {failures}")
    print(f"wall_time {result.wall_time:.3f}")
    print(f"out {args.out}")
    if args.plot:
        from .plots import plot_gram_heatmap

        plot_gram_heatmap(matrix, args.plot)
        print(f"plot {args.plot}")
    return 0


def _reorder_perm(g: LabeledGraph, method: str, seed: int):
    if method == "pbr":
        return pbr_reorder(g, seed=seed)
    if method == "rcm":
        return rcm_reorder(g)
    if method == "morton":
        if g.node_labels is None or g.node_labels.ndim != 2 or g.node_labels.shape[1] not in (2, 3):
            raise SystemExit("morton reordering needs 2D/3D coordinate node labels")
        return morton_reorder(g.node_labels)
    raise SystemExit(f"unknown reorder method {method}")


def _cmd_reorder(args) -> int:
    g = load_graph(args.graph)
    start = time.perf_counter()
    perm = _reorder_perm(g, args.method, args.seed)
    wall = time.perf_counter() - start
    before_obj = objective(g, type(perm).identity(g.node_count))
    after_obj = objective(g, perm)
    before_tiles = build_tiles(g).tile_count
    after_tiles = build_tiles(apply_permutation(g, perm)).tile_count
    print(f"method {args.method}")
    print(f"objective_before {before_obj}")
    print(f"objective_after {after_obj}")
    print(f"octiles_before {before_tiles}")
    print(f"octiles_after {after_tiles}")
    print(f"wall_time {wall:.6f}")
    return 0


def _cmd_tiles(args) -> int:
    g = load_graph(args.graph)
    if args.reorder and args.reorder != "none":
        g = apply_permutation(g, _reorder_perm(g, args.reorder, args.seed))
    tiled = build_tiles(g)
    hist = tile_histogram(tiled)
    print(f"tiles {hist.total}")
    print(f"mean_density {hist.mean_density:.6f}")
    for nnz in range(1, 65):
        if hist.buckets[nnz]:
            print(f"bucket {nnz} {hist.buckets[nnz]}")
    dump = dump_tiles(tiled)
    if dump:
        print(dump)
    if args.plot:
        from .plots import plot_tile_histogram

        plot_tile_histogram(hist, args.plot, title=g.name or "graph")
        print(f"plot {args.plot}")
    return 0


_BENCH_CSV_HEADER = "primitive,n,m,E,F,X,flops,t1_load,t1_store,t2_load,t2_store,AI1,AI2"


def _report_csv(label: str, args, rep) -> str:
    ai1 = "" if rep.ai1 is None else _fmt(rep.ai1)
    ai2 = "" if rep.ai2 is None else _fmt(rep.ai2)
    return ",".join(
        [
            label,
            str(args.n),
            str(args.m),
            str(args.E),
            str(args.F),
            str(args.X),
            _fmt(rep.flops),
            _fmt(rep.t1_load),
            _fmt(rep.t1_store),
            _fmt(rep.t2_load),
            _fmt(rep.t2_store),
            ai1,
            ai2,
        ]
    )


def _print_report(name: str, rep) -> None:
    print(f"{name}_flops {_fmt(rep.flops)}")
    print(f"{name}_t1_load {_fmt(rep.t1_load)}")
    print(f"{name}_t1_store {_fmt(rep.t1_store)}")
    print(f"{name}_t2_load {_fmt(rep.t2_load)}")
    print(f"{name}_t2_store {_fmt(rep.t2_store)}")
    print(f"{name}_AI1 {'' if rep.ai1 is None else _fmt(rep.ai1)}")
    print(f"{name}_AI2 {'' if rep.ai2 is None else _fmt(rep.ai2)}")


def _cmd_bench(args) -> int:
    model = CostModel(E=args.E, F=args.F, X=args.X, t=args.t, r=args.r)
    predicted = predict_costs(model, args.n, args.m, args.primitive)
    rows = [("predicted", predicted)]
    print(f"primitive {args.primitive}")
    _print_report("predicted", predicted)
    if args.measure:
        if args.primitive != "tiling-blocking":
            raise SystemExit(
                "--measure instruments the tile double-loop pipeline; "
                "use --primitive tiling-blocking"
            )
        if args.t != 8:
            raise SystemExit("--measure requires the octile size t=8")
        op = build_operator(_complete_graph(args.n), _complete_graph(args.m),
                            cost_model=model, force_dense_stream=True)
        op.apply_offdiag(np.ones(args.n * args.m))
        measured = op.counter_report()
        rows.append(("measured", measured))
        _print_report("measured", measured)
        print(f"measured_tile_pairs {measured.tile_pairs}")
    print(_BENCH_CSV_HEADER)
    for label, rep in rows:
        print(_report_csv(label, args, rep))
    if args.plot:
        from .plots import plot_counter_reports

        plot_counter_reports(rows, args.plot)
        print(f"plot {args.plot}")
    return 0


def _complete_graph(n: int) -> LabeledGraph:
    edges = [(i, j, 1.0) for i in range(n) for j in range(i + 1, n)]
    return LabeledGraph.from_edges(n, edges, name=f"complete_{n}")


def _cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for idx in range(args.count):
        seed = args.seed + idx
        if args.model == "nws":
            if args.k is None or args.p is None:
                raise SystemExit("nws needs --k and --p")
            g = gen_nws(args.n, args.k, args.p, seed)
        else:
            if args.m is None:
                raise SystemExit("ba needs --m")
            g = gen_ba(args.n, args.m, seed)
        path = out / f"{args.model}_{args.n}_{idx:03d}.json"
        save_graph(g, path)
        written.append(path)
        print(path)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mgk",
        description="Marginalized graph kernel solver (matrix-free PCG over octiles)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_kernel_opts(p):
        p.add_argument("--unlabeled", action="store_true",
                       help="ignore labels; random-walk kernel path")
        p.add_argument("--vkernel", default="const1", help="vertex kernel spec")
        p.add_argument("--ekernel", default="const1", help="edge kernel spec")
        p.add_argument("--q", type=float, default=DEFAULT_STOP_PROB,
                       help="default stopping probability for files without one")
        p.add_argument("--tol", type=float, default=1e-10)

    p = sub.add_parser("kernel", help="kernel value for one graph pair")
    p.add_argument("--graph-a", required=True)
    p.add_argument("--graph-b", required=True)
    add_kernel_opts(p)
    p.add_argument("--reorder", choices=["pbr", "rcm", "morton", "none"], default="none")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nodewise", help="write the node-wise similarity matrix as CSV")
    p.set_defaults(func=_cmd_kernel)

    p = sub.add_parser("gram", help="all-pairs Gram matrix for a dataset")
    p.add_argument("--dataset", required=True, help="directory of .json graphs or comma list")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["csv", "bin"], default="csv")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--deterministic", action="store_true")
    add_kernel_opts(p)
    p.add_argument("--plot", help="also render a heatmap PNG")
    p.set_defaults(func=_cmd_gram)

    p = sub.add_parser("reorder", help="reorder a graph and report tile savings")
    p.add_argument("--graph", required=True)
    p.add_argument("--method", choices=["pbr", "rcm", "morton"], required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_reorder)

    p = sub.add_parser("tiles", help="octile histogram and debug dump")
    p.add_argument("--graph", required=True)
    p.add_argument("--reorder", choices=["pbr", "rcm", "morton", "none"], default="none")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--plot", help="also render the histogram PNG")
    p.set_defaults(func=_cmd_tiles)

    p = sub.add_parser("bench", help="cost-model prediction (and measurement)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--primitive", choices=list(PRIMITIVES), required=True)
    p.add_argument("--E", type=int, default=0)
    p.add_argument("--F", type=int, default=4)
    p.add_argument("--X", type=int, default=3)
    p.add_argument("--t", type=int, default=8)
    p.add_argument("--r", type=int, default=8)
    p.add_argument("--measure", action="store_true",
                   help="run one instrumented off-diagonal product on dense graphs")
    p.add_argument("--plot", help="also render the counter bars PNG")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("gen", help="generate synthetic graphs")
    p.add_argument("--model", choices=["nws", "ba"], required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--m", type=int)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
