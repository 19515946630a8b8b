"""Array-friendly bindings for the marginalized graph kernel solver.

The solver is consumed strictly through its public surfaces: graphs travel
as JSON files, computations run through the ``mgk`` command line, and
results come back from its delimited outputs.  Inputs and outputs on this
side are plain numpy arrays, so the package drops into ML pipelines without
any file handling by the caller.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .marshal import (
    BoundGraph,
    SolverError,
    kernel_options_to_flags,
    parse_key_values,
    read_gram_binary,
    read_graph_json,
    read_nodewise_csv,
    run_cli,
    workdir,
    write_graph_json,
)

__all__ = [
    "BoundGraph",
    "SolverError",
    "kernel",
    "gram",
    "gen_nws",
    "gen_ba",
    "load_graph",
    "read_gram_binary",
]


def kernel(g_a: BoundGraph, g_b: BoundGraph, **options):
    """Similarity of two graphs.

    Returns ``(value, nodewise, diagnostics)`` where ``nodewise`` is the
    n x m node-pair similarity field and ``diagnostics`` carries iteration
    count, final residual, and the convergence flag.  Options mirror the
    CLI flags: ``vkernel``, ``ekernel``, ``q``, ``tol``, ``reorder``,
    ``unlabeled``.
    """
    with workdir() as tmp:
        tmp = Path(tmp)
        write_graph_json(g_a, tmp / "a.json")
        write_graph_json(g_b, tmp / "b.json")
        nodewise_path = tmp / "nodewise.csv"
        out = run_cli(
            ["kernel", "--graph-a", str(tmp / "a.json"), "--graph-b",
             str(tmp / "b.json"), "--nodewise", str(nodewise_path)]
            + kernel_options_to_flags(options)
        )
        kv = parse_key_values(out)
        nodewise = read_nodewise_csv(nodewise_path)
    diagnostics = {
        "iterations": int(kv["iterations"]),
        "residual": float(kv["residual"]),
        "converged": kv["converged"] == "true",
    }
    return float(kv["value"]), nodewise, diagnostics


def gram(graphs: list[BoundGraph], *, normalize: bool = False, workers: int = 1,
         deterministic: bool = True, **options):
    """All-pairs similarity matrix.

    Returns ``(matrix, converged)``; pairs that failed to converge are NaN
    in the matrix and False in the flag matrix.
    """
    with workdir() as tmp:
        tmp = Path(tmp)
        data = tmp / "dataset"
        data.mkdir()
        for idx, g in enumerate(graphs):
            write_graph_json(g, data / f"{idx:04d}.json")
        out_path = tmp / "gram.bin"
        args = ["gram", "--dataset", str(data), "--out", str(out_path),
                "--format", "bin", "--workers", str(workers)]
        if normalize:
            args.append("--normalize")
        if deterministic:
            args.append("--deterministic")
        run_cli(args + kernel_options_to_flags(options))
        matrix = read_gram_binary(out_path)
    return matrix, ~np.isnan(matrix)


def gen_nws(n: int, k: int, p: float, seed: int) -> BoundGraph:
    """Small-world test graph from the solver's portable generator."""
    return _generate(["--model", "nws", "--n", str(n), "--k", str(k), "--p", str(p)],
                     seed)


def gen_ba(n: int, m: int, seed: int) -> BoundGraph:
    """Scale-free test graph from the solver's portable generator."""
    return _generate(["--model", "ba", "--n", str(n), "--m", str(m)], seed)


def _generate(model_args: list[str], seed: int) -> BoundGraph:
    with workdir() as tmp:
        out = Path(tmp) / "gen"
        run_cli(["gen", *model_args, "--count", "1", "--seed", str(seed),
                 "--out", str(out)])
        path = next(out.glob("*.json"))
        return read_graph_json(path)


def load_graph(path) -> BoundGraph:
    """Read a solver graph file into arrays."""
    return read_graph_json(path)
