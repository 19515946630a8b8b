"""Base kernels comparing node or edge labels.

Every variant is a symmetric positive-definite similarity with range inside
``(0, 1]`` for vertex kernels and ``[0, 1]`` for edge kernels.  Besides the
scalar ``__call__`` form, each kernel offers a vectorized ``pairwise`` used
by the product operator to evaluate all label pairs of two tiles at once.

``flop_count`` declares the abstract per-evaluation floating-point cost that
feeds the cost model's ``X`` parameter.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class KernelShapeError(ValueError):
    """Label payload does not match what the kernel variant expects."""


class KernelRangeError(ValueError):
    """Kernel evaluated outside its admissible range in validation mode."""


class BaseKernel:
    role: str = "edge"  # "vertex" kernels must stay within (0, 1]
    flop_count: int = 1

    def __call__(self, a, b) -> float:
        raise NotImplementedError

    def pairwise(self, A, B) -> np.ndarray:
        """All-pairs evaluation; default falls back to the scalar form."""
        A, B = list(A), list(B)
        out = np.empty((len(A), len(B)))
        for i, a in enumerate(A):
            for j, b in enumerate(B):
                out[i, j] = self(a, b)
        return out

    def with_role(self, role: str) -> "BaseKernel":
        if role not in ("vertex", "edge"):
            raise ValueError(f"unknown kernel role {role!r}")
        self.role = role
        return self

    def check_range(self, values: np.ndarray) -> None:
        values = np.asarray(values)
        lo_ok = values > 0 if self.role == "vertex" else values >= 0
        if not np.all(lo_ok & (values <= 1)):
            bad = float(values[~(lo_ok & (values <= 1))].flat[0])
            raise KernelRangeError(
                f"{self.role} kernel value {bad} outside admissible range"
            )


@dataclass
class ConstantOne(BaseKernel):
    """kappa(a, b) = 1; the unlabeled degenerate case."""

    flop_count: int = 0

    def __call__(self, a, b) -> float:
        return 1.0

    def pairwise(self, A, B) -> np.ndarray:
        return np.ones((len(A), len(B)))


@dataclass
class KroneckerDelta(BaseKernel):
    """1 when the categorical tokens match, ``h`` otherwise, h in (0, 1]."""

    h: float
    flop_count: int = 1

    def __post_init__(self):
        if not (0 < self.h <= 1):
            raise ValueError(f"delta baseline h must be in (0, 1], got {self.h}")

    def __call__(self, a, b) -> float:
        equal = np.array_equal(a, b) if isinstance(a, np.ndarray) else a == b
        return 1.0 if equal else self.h

    def pairwise(self, A, B) -> np.ndarray:
        A = np.asarray(A)
        B = np.asarray(B)
        if A.ndim == 1:
            eq = A[:, None] == B[None, :]
        else:
            eq = np.all(A[:, None, :] == B[None, :, :], axis=-1)
        return np.where(eq, 1.0, self.h)


@dataclass
class SquareExponential(BaseKernel):
    """exp(-alpha * |a - b|^2); squared Euclidean distance for vectors."""

    alpha: float
    flop_count: int = 4  # 3 multiplies + 1 exponentiation

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")

    def __call__(self, a, b) -> float:
        diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        return float(np.exp(-self.alpha * np.sum(diff * diff)))

    def pairwise(self, A, B) -> np.ndarray:
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        if A.ndim == 1:
            A = A[:, None]
        if B.ndim == 1:
            B = B[:, None]
        if A.shape[1] != B.shape[1]:
            raise KernelShapeError(
                f"label dimensions differ: {A.shape[1]} vs {B.shape[1]}"
            )
        d2 = np.sum((A[:, None, :] - B[None, :, :]) ** 2, axis=-1)
        return np.exp(-self.alpha * d2)


@dataclass
class CompactPolynomial(BaseKernel):
    """sum_i coeffs[i] * (a - b)^i on scalar labels.

    The raw polynomial is not range-limited, so outputs are clamped to
    [0, 1] by default; with ``validate=True`` an out-of-range value raises
    instead of being clamped.
    """

    coeffs: Sequence[float]
    validate: bool = False

    def __post_init__(self):
        self.coeffs = tuple(float(c) for c in self.coeffs)
        if not self.coeffs:
            raise ValueError("need at least one coefficient")
        self.flop_count = max(len(self.coeffs) - 1, 1)

    def _raw(self, delta: np.ndarray) -> np.ndarray:
        acc = np.zeros_like(delta, dtype=float)
        for c in reversed(self.coeffs):  # Horner on the difference
            acc = acc * delta + c
        return acc

    def _finish(self, raw: np.ndarray) -> np.ndarray:
        if self.validate:
            if np.any((raw < 0) | (raw > 1)):
                bad = float(raw[(raw < 0) | (raw > 1)].flat[0])
                raise KernelRangeError(f"polynomial kernel value {bad} not in [0, 1]")
            return raw
        return np.clip(raw, 0.0, 1.0)

    def __call__(self, a, b) -> float:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.size != 1 or b.size != 1:
            raise KernelShapeError("polynomial kernel expects scalar labels")
        # symmetric by construction: even/odd terms of |a-b| would differ,
        # so evaluate on the absolute difference
        return float(self._finish(self._raw(np.abs(a - b).reshape(()))))

    def pairwise(self, A, B) -> np.ndarray:
        A = np.asarray(A, dtype=float).reshape(-1)
        B = np.asarray(B, dtype=float).reshape(-1)
        return self._finish(self._raw(np.abs(A[:, None] - B[None, :])))


@dataclass
class ProductComposite(BaseKernel):
    """Component-wise product of sub-kernels, one per label component."""

    components: Sequence[BaseKernel]

    def __post_init__(self):
        self.components = tuple(self.components)
        self.flop_count = sum(k.flop_count for k in self.components) + max(
            len(self.components) - 1, 0
        )

    def _check(self, a):
        a = np.asarray(a, dtype=float)
        if a.ndim != 1 or a.shape[0] != len(self.components):
            raise KernelShapeError(
                f"composite kernel expects {len(self.components)} components, "
                f"got shape {a.shape}"
            )
        return a

    def __call__(self, a, b) -> float:
        a, b = self._check(a), self._check(b)
        out = 1.0
        for k, x, y in zip(self.components, a, b):
            out *= k(x, y)
        return out

    def pairwise(self, A, B) -> np.ndarray:
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        if A.ndim != 2 or A.shape[1] != len(self.components) or B.shape[1] != A.shape[1]:
            raise KernelShapeError("composite kernel component count mismatch")
        out = np.ones((A.shape[0], B.shape[0]))
        for c, k in enumerate(self.components):
            out *= k.pairwise(A[:, c], B[:, c])
        return out


@dataclass
class RConvolution(BaseKernel):
    """sum_i sum_j inner(a_i, b_j) over label components.

    The only listed variant whose diagonal is not automatically maximal and
    whose range may exceed 1; range compliance is the caller's concern.
    """

    inner: BaseKernel

    def __post_init__(self):
        self.flop_count = self.inner.flop_count + 1

    def __call__(self, a, b) -> float:
        a = np.atleast_1d(np.asarray(a, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        # canonicalize operand order so symmetry holds to the last bit
        if tuple(b.tolist()) < tuple(a.tolist()):
            a, b = b, a
        return float(np.sum(self.inner.pairwise(a, b)))

    def pairwise(self, A, B) -> np.ndarray:
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        if A.ndim == 1:
            A = A[:, None]
        if B.ndim == 1:
            B = B[:, None]
        m = self.inner.pairwise(A.reshape(-1), B.reshape(-1))
        m = m.reshape(A.shape[0], A.shape[1], B.shape[0], B.shape[1])
        return m.sum(axis=(1, 3))


def kernel_from_spec(spec: str) -> BaseKernel:
    """Parse the CLI kernel grammar.

    ``const1`` | ``delta:H`` | ``se:ALPHA`` | ``poly:C0,C1,...``
    """
    head, _, rest = spec.partition(":")
    if head == "const1":
        return ConstantOne()
    if head == "delta":
        return KroneckerDelta(h=float(rest))
    if head == "se":
        return SquareExponential(alpha=float(rest))
    if head == "poly":
        return CompactPolynomial(coeffs=[float(c) for c in rest.split(",")])
    raise ValueError(f"unknown kernel spec {spec!r}")
