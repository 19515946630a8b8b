"""Abstract cost model and counters for the product matrix-vector kernels.

The model is parameterized by ``E`` (bytes per edge label), ``F`` (bytes per
float), and ``X`` (flops per fused edge-kernel contribution), plus the tile
size ``t`` and chunk length ``r``.  Two memory tiers are tracked: tier 1 is
the graph/tile storage streamed per tile pair, tier 2 is the expanded
scratch blocks the micro-kernels read from.

``predict_costs`` evaluates the closed-form per-iteration totals of the four
multiplication strategies.  The tier-1 load formulas keep only the dominant
inner-loop streaming terms (second-operand tile plus right-hand-side block
per tile pair); the first operand is amortized across the inner loop and its
lower-order traffic is dropped.  The measured counters follow the same
convention so that dense inputs reproduce the predictions exactly.  The
``ai1``/``ai2`` fields of a prediction are the asymptotic closed forms,
which differ from ``flops / bytes`` of the same prediction by the
lower-order output-store term.
"""

from __future__ import annotations

from dataclasses import dataclass, field

PRIMITIVES = ("naive", "shared-tiling", "register-blocking", "tiling-blocking")


@dataclass
class CostModel:
    """(E, F, X) parameters; defaults follow the single-precision unlabeled
    convention E=0, F=4, X=3."""

    E: int = 0
    F: int = 4
    X: int = 3
    t: int = 8
    r: int = 8

    def __post_init__(self):
        if self.E < 0 or self.F <= 0 or self.X <= 0:
            raise ValueError("require E >= 0, F > 0, X > 0")
        if self.t <= 0 or self.r <= 0 or self.t % self.r:
            raise ValueError("chunk length r must divide tile size t")


@dataclass
class CounterReport:
    """Measured (or predicted) totals for one pass of the off-diagonal
    product."""

    flops: float = 0.0
    t1_load: float = 0.0
    t1_store: float = 0.0
    t2_load: float = 0.0
    t2_store: float = 0.0
    tile_pairs: int = 0
    ai1: float | None = field(default=None)
    ai2: float | None = field(default=None)

    def finalize(self) -> "CounterReport":
        """Derive arithmetic intensities from the accumulated byte counts."""
        t1 = self.t1_load + self.t1_store
        t2 = self.t2_load + self.t2_store
        self.ai1 = self.flops / t1 if t1 > 0 else None
        self.ai2 = self.flops / t2 if t2 > 0 else None
        return self

    def reset(self) -> None:
        self.flops = self.t1_load = self.t1_store = 0.0
        self.t2_load = self.t2_store = 0.0
        self.tile_pairs = 0
        self.ai1 = self.ai2 = None


def predict_costs(model: CostModel, n: int, m: int, primitive: str) -> CounterReport:
    """Closed-form per-iteration totals for a dense n x m node pair.

    Exact when t divides both n and m.
    """
    E, F, X = model.E, model.F, model.X
    t, r = model.t, model.r
    n2m2 = float(n) * n * m * m
    nm = float(n) * m

    if primitive == "naive":
        return CounterReport(
            flops=2 * n2m2,
            t1_load=n2m2 * F,
            t1_store=nm * F,
            t2_load=0.0,
            t2_store=0.0,
            tile_pairs=0,
            ai1=2 / F,
            ai2=None,
        )
    if primitive == "shared-tiling":
        return CounterReport(
            flops=n2m2 * X,
            t1_load=n2m2 * ((t / r) * E + ((r + t) / r) * F) / t**2,
            t1_store=nm * F,
            t2_load=n2m2 * (((r + 1) / r) * E + ((2 * r + 1) / r) * F),
            t2_store=n2m2 * ((t / r) * E + ((r + t) / r) * F) / t**2,
            tile_pairs=_dense_tile_pairs(n, m, t),
            ai1=t**2 * X / ((t / r) * E + (1 + t / r) * F),
            ai2=X / ((1 + 1 / r) * E + (2 + 1 / r) * F),
        )
    if primitive == "register-blocking":
        return CounterReport(
            flops=n2m2 * X,
            t1_load=n2m2 * ((t / r) * E + ((t + r) / r) * F) / t**2,
            t1_store=nm * F,
            t2_load=n2m2 * F,
            t2_store=n2m2 * F / t**2,
            tile_pairs=_dense_tile_pairs(n, m, t),
            ai1=t**2 * X / ((t / r) * E + (1 + t / r) * F),
            ai2=X / ((1 + 1 / t**2) * F),
        )
    if primitive == "tiling-blocking":
        return CounterReport(
            flops=n2m2 * X,
            t1_load=n2m2 * (E + 2 * F) / t**2,
            t1_store=nm * F,
            t2_load=n2m2 * ((r + t) / (r * t)) * (E + F),
            t2_store=n2m2 * (E + F) / t**2,
            tile_pairs=_dense_tile_pairs(n, m, t),
            ai1=t**2 * X / (E + 2 * F),
            ai2=X / ((1 / r + 1 / t) * E + (1 / r + 1 / t) * F),
        )
    raise ValueError(f"unknown primitive {primitive!r}; expected one of {PRIMITIVES}")


def _dense_tile_pairs(n: int, m: int, t: int) -> int:
    nt = -(-n // t)
    mt = -(-m // t)
    return nt * nt * mt * mt
