"""Wild bootstrap and permutation resampling for the closeness statistics.

Replicate r of a run with master seed s always draws from generator
substream (s, r), so replicate sets are bit-identical whether they are
computed serially or on a thread pool (CLOT_THREADS workers).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._util import map_indexed, substream, sym_offdiag_sum
from .kernels import KernelSpec, gram_block
from .stats import HStatSummary, PairedOutcomes, h_summary

# Weight centering choices for the wild bootstrap. "uniform" subtracts the
# cell probability 1/m from each multinomial count; "unit" subtracts the
# expected count 1 instead, and exists for calibration studies only.
CENTER_UNIFORM = "uniform"
CENTER_UNIT = "unit"
_CENTERINGS = (CENTER_UNIFORM, CENTER_UNIT)


@dataclass(frozen=True)
class BootstrapDraw:
    """One multinomial weight vector W ~ Mult(m; 1/m, ..., 1/m)."""

    weights: np.ndarray
    centering_offset: float

    def __post_init__(self) -> None:
        weights = np.asarray(self.weights)
        if weights.ndim != 1 or weights.size < 2:
            raise ValueError("weights must be a vector of length >= 2")
        if int(weights.sum()) != weights.size:
            raise ValueError("multinomial weights must sum to m")
        object.__setattr__(self, "weights", weights)

    @property
    def m(self) -> int:
        return self.weights.size

    @property
    def centered(self) -> np.ndarray:
        return self.weights.astype(float) - self.centering_offset

    @property
    def phi(self) -> np.ndarray:
        """Pair weights phi[i, j] = (w_i - c)(w_j - c), derived on demand."""
        v = self.centered
        return np.outer(v, v)


@dataclass(frozen=True)
class ReplicateSet:
    """Sorted replicate values plus the master seed that produced them."""

    values: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise ValueError("values must be a non-empty vector")
        if np.any(np.diff(values) < 0.0):
            raise ValueError("values must be sorted ascending")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def size(self) -> int:
        return self.values.size


def _offset(m: int, centering: str) -> float:
    if centering not in _CENTERINGS:
        raise ValueError(f"unknown centering {centering!r}")
    return 1.0 / m if centering == CENTER_UNIFORM else 1.0


def multinomial_weights(
    m: int, rng: np.random.Generator, centering: str = CENTER_UNIFORM
) -> BootstrapDraw:
    """Draw one wild-bootstrap weight vector for a sample of size m."""
    if m < 2:
        raise ValueError("need m >= 2")
    weights = rng.multinomial(m, np.full(m, 1.0 / m))
    return BootstrapDraw(weights=weights, centering_offset=_offset(m, centering))


def bootstrap_statistic(summary: HStatSummary, draw: BootstrapDraw) -> float:
    """One weighted replicate, sum of phi[i, j] * H[i, j] / denom_sum.

    The denominator is the observed normalizer, deliberately not
    reweighted. Because H has a zero diagonal the pair sum collapses to
    the quadratic form v' H v with v the centered weights.
    """
    if draw.m != summary.m:
        raise ValueError(f"weight length {draw.m} != sample size {summary.m}")
    v = draw.centered
    return float(v @ summary.h_matrix @ v) / summary.denom_sum


def bootstrap_distribution(
    spec: KernelSpec,
    paired: PairedOutcomes,
    replicates: int,
    seed: int,
    centering: str = CENTER_UNIFORM,
) -> ReplicateSet:
    """Wild-bootstrap replicate set for the normalized statistic."""
    _check_replicates(replicates)
    offset = _offset(paired.m, centering)
    summary = h_summary(spec, paired)

    def one(index: int) -> float:
        rng = substream(seed, index)
        weights = rng.multinomial(summary.m, np.full(summary.m, 1.0 / summary.m))
        draw = BootstrapDraw(weights=weights, centering_offset=offset)
        return bootstrap_statistic(summary, draw)

    values = np.array(map_indexed(one, replicates))
    _check_replicate_bound(values, summary, offset)
    return ReplicateSet(values=np.sort(values), seed=seed)


def _check_replicates(replicates: int) -> None:
    if replicates < 100:
        raise ValueError(
            "need at least 100 replicates for usable resampling quantiles"
        )


def _check_replicate_bound(
    values: np.ndarray, summary: HStatSummary, offset: float
) -> None:
    # Internal guard: |v' H v| <= max(phi) * sum|H|, up to rounding dust.
    max_phi = (summary.m - offset) ** 2
    bound = max_phi * np.abs(summary.h_matrix).sum() / summary.denom_sum
    if np.abs(values).max(initial=0.0) > bound * (1.0 + 1e-9) + 1e-12:
        raise RuntimeError("bootstrap replicate exceeded its algebraic bound")


def permutation_split(
    pooled_size: int, seed: int, index: int
) -> tuple[np.ndarray, np.ndarray]:
    """Index split used by permutation replicate ``index``.

    Exposed so a replicate can be recomputed directly from its split when
    cross-checking the fast path.
    """
    if pooled_size < 4 or pooled_size % 2:
        raise ValueError("pooled size must be an even number >= 4")
    perm = substream(seed, index).permutation(pooled_size)
    half = pooled_size // 2
    return perm[:half], perm[half:]


def _mte_from_pooled_gram(gram: np.ndarray, idx1: np.ndarray, idx2: np.ndarray) -> float:
    """Unnormalized discrepancy of a two-group split of a pooled Gram matrix.

    Slicing the pooled Gram gives bit-identical entries to recomputing the
    per-group blocks from the raw rows, so this matches h_summary plus
    mte_estimate on the split exactly.
    """
    g11 = gram[np.ix_(idx1, idx1)]
    g22 = gram[np.ix_(idx2, idx2)]
    g12 = gram[np.ix_(idx1, idx2)]
    cross = g12 + g12.T
    m = idx1.size
    h_sum = (sym_offdiag_sum(g11) + sym_offdiag_sum(g22)) - sym_offdiag_sum(cross)
    return h_sum / (m * (m - 1))


def permutation_distribution(
    spec: KernelSpec,
    paired: PairedOutcomes,
    replicates: int,
    seed: int,
) -> ReplicateSet:
    """Two-sample permutation replicates of the unnormalized discrepancy.

    Pools the 2m rows, recomputes the discrepancy on random half splits.
    The pooled Gram matrix is computed once and sliced per replicate.
    """
    _check_replicates(replicates)
    pooled = paired.pooled()
    gram = gram_block(spec, pooled, pooled, "pooled", "pooled").values

    def one(index: int) -> float:
        idx1, idx2 = permutation_split(pooled.shape[0], seed, index)
        return _mte_from_pooled_gram(gram, idx1, idx2)

    values = np.array(map_indexed(one, replicates))
    return ReplicateSet(values=np.sort(values), seed=seed)


def upper_quantile(replicates: ReplicateSet, alpha: float) -> float:
    """Conservative empirical (1 - alpha)-quantile of a replicate set.

    Order-statistic convention matched to the (1 + count) / (B + 1)
    p-value: the ceil((1 - alpha) * (B + 1))-th smallest value, capped at
    the maximum.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    b = replicates.size
    rank = math.ceil((1.0 - alpha) * (b + 1))
    return float(replicates.values[min(max(rank, 1), b) - 1])
