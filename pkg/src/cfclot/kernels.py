"""Bounded kernels, bandwidth selection, and Gram block computation.

Every statistic in this package evaluates one shared kernel on model
outputs. The built-in families are bounded by construction, which is what
keeps the normalized closeness statistic inside [0, 1]:

    gaussian-rbf    k(x, y) = exp(-||x - y||^2 / (2 * bandwidth^2))
    laplacian       k(x, y) = exp(-||x - y||_1 / bandwidth)

Both take values in [0, 1] with k(x, x) = 1, so their bound is fixed at 1.
A custom kernel may declare its own bound; evaluations are checked against
it and a violation is an error, never a silent clamp.

Bandwidth defaults to the median heuristic computed on the pooled factual
and counterfactual outputs, see :func:`median_heuristic_bandwidth`.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial.distance import cdist, pdist

GAUSSIAN = "gaussian-rbf"
LAPLACIAN = "laplacian"
CUSTOM = "custom-bounded"

_BUILTIN_FAMILIES = (GAUSSIAN, LAPLACIAN)

KernelFunc = Callable[[np.ndarray, np.ndarray], float]


@dataclass(frozen=True)
class KernelSpec:
    """A fully resolved kernel: family, bandwidth, and upper bound.

    ``func`` is only consulted for the ``custom-bounded`` family; it must be
    symmetric in its arguments and return values in [0, bound_k].
    """

    family: str
    bandwidth: float
    bound_k: float = 1.0
    func: KernelFunc | None = None

    def __post_init__(self) -> None:
        if self.family not in (*_BUILTIN_FAMILIES, CUSTOM):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not np.isfinite(self.bandwidth) or self.bandwidth <= 0.0:
            raise ValueError("bandwidth must be a positive finite real")
        if not np.isfinite(self.bound_k) or self.bound_k <= 0.0:
            raise ValueError("bound_k must be a positive finite real")
        if self.family in _BUILTIN_FAMILIES:
            if self.bound_k != 1.0:
                raise ValueError(f"{self.family} is bounded by 1 exactly")
            if self.func is not None:
                raise ValueError("func is only allowed for custom-bounded kernels")
        elif self.func is None:
            raise ValueError("custom-bounded kernels require func")


@dataclass(frozen=True)
class GramBlock:
    """Kernel matrix between two row samples, tagged with their sources."""

    values: np.ndarray
    row_source: str
    col_source: str


@dataclass(frozen=True)
class KernelPolicy:
    """How to obtain a KernelSpec once data is available.

    ``bandwidth`` is either a positive number or the string ``"median"``,
    in which case the median heuristic runs on the pooled sample handed to
    :meth:`resolve`.
    """

    family: str = GAUSSIAN
    bandwidth: float | str = "median"
    bound_k: float = 1.0
    func: KernelFunc | None = None

    def __post_init__(self) -> None:
        if isinstance(self.bandwidth, str):
            if self.bandwidth != "median":
                raise ValueError(f"unknown bandwidth rule {self.bandwidth!r}")
        elif not np.isfinite(self.bandwidth) or self.bandwidth <= 0.0:
            raise ValueError("fixed bandwidth must be a positive finite real")

    def resolve(self, pooled: np.ndarray) -> KernelSpec:
        if isinstance(self.bandwidth, str):
            bandwidth = median_heuristic_bandwidth(pooled)
        else:
            bandwidth = float(self.bandwidth)
        return KernelSpec(self.family, bandwidth, self.bound_k, self.func)


def _as_matrix(rows: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, np.newaxis]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 1-d or 2-d array of rows")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _as_vector(point: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(point, dtype=float)
    if arr.ndim == 0:
        arr = arr[np.newaxis]
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a scalar or 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _checked_custom(spec: KernelSpec, x: np.ndarray, y: np.ndarray) -> float:
    assert spec.func is not None
    value = float(spec.func(x, y))
    if not np.isfinite(value) or value < 0.0 or value > spec.bound_k:
        raise ValueError(
            f"custom kernel value {value!r} outside [0, {spec.bound_k}]"
        )
    return value


def kernel_eval(spec: KernelSpec, x: np.ndarray, y: np.ndarray) -> float:
    """Evaluate the kernel on a single pair of points."""
    xv = _as_vector(x, "x")
    yv = _as_vector(y, "y")
    if xv.shape != yv.shape:
        raise ValueError(f"dimension mismatch: {xv.shape} vs {yv.shape}")
    if spec.family == GAUSSIAN:
        diff = xv - yv
        return float(np.exp(-np.dot(diff, diff) / (2.0 * spec.bandwidth**2)))
    if spec.family == LAPLACIAN:
        return float(np.exp(-np.sum(np.abs(xv - yv)) / spec.bandwidth))
    return _checked_custom(spec, xv, yv)


def gram_block(
    spec: KernelSpec,
    rows: np.ndarray,
    cols: np.ndarray,
    row_source: str = "rows",
    col_source: str = "cols",
) -> GramBlock:
    """Kernel matrix with entry (i, j) = k(rows[i], cols[j]).

    A self block (``cols is rows``) of a custom kernel is evaluated on the
    upper triangle only and mirrored, so its symmetry is exact by
    construction. Built-in families are exactly symmetric anyway because
    the underlying distances are.
    """
    x = _as_matrix(rows, "rows")
    y = _as_matrix(cols, "cols")
    if x.shape[1] != y.shape[1]:
        raise ValueError(
            f"dimension mismatch: rows have d={x.shape[1]}, cols d={y.shape[1]}"
        )
    if spec.family == GAUSSIAN:
        values = np.exp(-cdist(x, y, "sqeuclidean") / (2.0 * spec.bandwidth**2))
    elif spec.family == LAPLACIAN:
        values = np.exp(-cdist(x, y, "cityblock") / spec.bandwidth)
    else:
        values = _custom_matrix(spec, x, y, self_block=cols is rows)
    return GramBlock(values=values, row_source=row_source, col_source=col_source)


def _custom_matrix(
    spec: KernelSpec, x: np.ndarray, y: np.ndarray, self_block: bool
) -> np.ndarray:
    out = np.empty((x.shape[0], y.shape[0]))
    if self_block and x.shape[0] == y.shape[0]:
        for i in range(x.shape[0]):
            for j in range(i, y.shape[0]):
                value = _checked_custom(spec, x[i], y[j])
                out[i, j] = value
                out[j, i] = value
    else:
        for i in range(x.shape[0]):
            for j in range(y.shape[0]):
                out[i, j] = _checked_custom(spec, x[i], y[j])
    return out


def kernel_rowwise(spec: KernelSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Vector of k(x[i], y[i]) over aligned rows (no cross terms)."""
    xm = _as_matrix(x, "x")
    ym = _as_matrix(y, "y")
    if xm.shape != ym.shape:
        raise ValueError(f"shape mismatch: {xm.shape} vs {ym.shape}")
    if spec.family == GAUSSIAN:
        d2 = np.sum((xm - ym) ** 2, axis=1)
        return np.exp(-d2 / (2.0 * spec.bandwidth**2))
    if spec.family == LAPLACIAN:
        d1 = np.sum(np.abs(xm - ym), axis=1)
        return np.exp(-d1 / spec.bandwidth)
    return np.array([_checked_custom(spec, a, b) for a, b in zip(xm, ym)])


def median_heuristic_bandwidth(pooled: np.ndarray) -> float:
    """Median pairwise Euclidean distance over distinct row pairs.

    Falls back to the smallest nonzero pairwise distance when the median is
    zero (heavy ties). If every row is identical there is no usable scale:
    the value 1.0 is returned and a degenerate-sample warning is emitted.
    """
    rows = _as_matrix(pooled, "pooled")
    if rows.shape[0] < 2:
        raise ValueError("median heuristic needs at least two rows")
    distances = pdist(rows, "euclidean")
    median = float(np.median(distances))
    if median > 0.0:
        return median
    nonzero = distances[distances > 0.0]
    if nonzero.size:
        return float(nonzero.min())
    warnings.warn("all pooled rows identical; falling back to bandwidth 1.0")
    return 1.0
