"""Figure rendering for the CLI report paths.

Each report subcommand can drop a PNG next to its delimited output; these
helpers own the matplotlib usage so the core stays import-light.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_tile_histogram(hist, path, title: str = "Octile occupancy") -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    nnz = np.arange(1, 65)
    ax.bar(nnz, hist.buckets[1:65], width=0.9, color="#39648c")
    ax.set_xlabel("nonzeros per octile")
    ax.set_ylabel("tile count")
    ax.set_title(f"{title} ({hist.total} tiles, mean density {hist.mean_density:.2f})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_counter_reports(rows: list[tuple[str, object]], path) -> None:
    """Grouped byte/flop bars for a set of labeled counter reports."""
    labels = [name for name, _ in rows]
    fields = ["flops", "t1_load", "t1_store", "t2_load", "t2_store"]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    x = np.arange(len(labels))
    width = 0.16
    for k, fieldname in enumerate(fields):
        vals = [getattr(rep, fieldname) for _, rep in rows]
        ax.bar(x + (k - 2) * width, vals, width, label=fieldname)
    ax.set_yscale("log")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=15, ha="right")
    ax.set_ylabel("count (flops / bytes)")
    ax.legend(fontsize=8)
    for i, (_, rep) in enumerate(rows):
        if rep.ai1 is not None:
            ax.annotate(f"AI1={rep.ai1:.3g}", (x[i], ax.get_ylim()[1]),
                        ha="center", va="top", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_gram_heatmap(matrix: np.ndarray, path, title: str = "Gram matrix") -> None:
    fig, ax = plt.subplots(figsize=(5.5, 5))
    im = ax.imshow(matrix, cmap="viridis")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
