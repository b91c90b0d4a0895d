"""Closeness statistics between factual and counterfactual outcome samples.

Given aligned samples (y_1..y_m) and (y'_1..y'_m) of model outputs and a
bounded kernel k with bound K, every statistic here derives from the
pairwise comparison

    H[i, j] = k(y_i, y_j) + k(y'_i, y'_j) - k(y_i, y'_j) - k(y'_i, y_j)

summed over ordered index pairs i != j (the diagonal is excluded
everywhere, including the cross terms that pair row i with row i). Two
estimators are exposed:

* ``mte_estimate``: the raw kernel discrepancy, sum(H) / (m * (m - 1)),
  an unbiased estimate of the squared mean-embedding distance between the
  two outcome distributions. Lives in [-2K, 2K].
* ``nte_estimate``: the same sum normalized by its attainable maximum,
  sum(H) / sum(4K - k(y_i, y_j) - k(y'_i, y'_j)). The population version
  lives in [0, 1], which is what makes one closeness budget comparable
  across kernels and models. Sampling noise can push the estimate slightly
  negative; it is reported as computed, never clamped.

All scalar aggregates use exactly rounded sums, so relabeling the sample
indices (the same relabeling applied to both samples) and swapping the two
samples leave results bit-identical.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._util import sym_offdiag_sum
from .kernels import KernelSpec, gram_block, kernel_rowwise


@dataclass(frozen=True)
class PairedOutcomes:
    """Row-aligned factual and counterfactual model outputs.

    Row i of both arrays belongs to the same unit: the counterfactual row
    is the model's output after the do-style intervention on that unit.
    """

    factual: np.ndarray
    counterfactual: np.ndarray

    def __post_init__(self) -> None:
        fac = self._coerce(self.factual, "factual")
        cf = self._coerce(self.counterfactual, "counterfactual")
        if fac.shape != cf.shape:
            raise ValueError(
                f"shape mismatch: factual {fac.shape} vs counterfactual {cf.shape}"
            )
        if fac.shape[0] < 2:
            raise ValueError("need at least two paired rows")
        object.__setattr__(self, "factual", fac)
        object.__setattr__(self, "counterfactual", cf)

    @staticmethod
    def _coerce(rows: np.ndarray, name: str) -> np.ndarray:
        arr = np.asarray(rows, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, np.newaxis]
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise ValueError(f"{name} must be an (m, d) array")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{name} contains non-finite values")
        return arr

    @property
    def m(self) -> int:
        return self.factual.shape[0]

    @property
    def d(self) -> int:
        return self.factual.shape[1]

    def pooled(self) -> np.ndarray:
        return np.vstack((self.factual, self.counterfactual))

    def swapped(self) -> "PairedOutcomes":
        return PairedOutcomes(self.counterfactual, self.factual)


@dataclass(frozen=True)
class HStatSummary:
    """Pairwise sums backing the closeness statistics.

    Fields hold off-diagonal sums of the Gram blocks: ``within_f_sum`` and
    ``within_c_sum`` for the two self blocks, ``cross_sum_offdiag`` for
    both orientations of the cross block, and ``denom_sum`` for the
    normalizer sum(4K - k(y_i, y_j) - k(y'_i, y'_j)). ``h_sum`` equals
    ``within_f_sum + within_c_sum - cross_sum_offdiag`` exactly, by
    construction. ``h_matrix`` is the symmetric H with a zeroed diagonal.
    """

    m: int
    h_sum: float
    within_f_sum: float
    within_c_sum: float
    cross_sum_offdiag: float
    denom_sum: float
    h_matrix: np.ndarray

    @property
    def pair_count(self) -> int:
        return self.m * (self.m - 1)

    @property
    def denom_mean(self) -> float:
        return self.denom_sum / self.pair_count


@dataclass(frozen=True)
class VarianceComponents:
    """Plug-in dispersion components of the normalized statistic.

    ``zeta1`` is the dispersion of the per-row mean comparisons, ``zeta2``
    the dispersion of the individual comparisons. ``sigma_hat`` scales
    their combination by the mean normalizer so that sigma_hat / sqrt(m)
    tracks the sampling standard deviation of ``nte_estimate``.
    """

    zeta1: float
    zeta2: float
    sigma_hat: float


def h_summary(spec: KernelSpec, paired: PairedOutcomes) -> HStatSummary:
    """Compute all pairwise sums for one kernel and one paired sample."""
    fac = paired.factual
    cf = paired.counterfactual
    k_ff = gram_block(spec, fac, fac, "factual", "factual").values
    k_cc = gram_block(spec, cf, cf, "counterfactual", "counterfactual").values
    k_fc = gram_block(spec, fac, cf, "factual", "counterfactual").values

    # Symmetrized cross block: entry (i, j) carries both orientations.
    cross = k_fc + k_fc.T
    h_matrix = (k_ff + k_cc) - cross
    np.fill_diagonal(h_matrix, 0.0)
    h_matrix.flags.writeable = False

    # All three matrices are symmetric, so the halved-triangle sum applies.
    within_f = sym_offdiag_sum(k_ff)
    within_c = sym_offdiag_sum(k_cc)
    cross_offdiag = sym_offdiag_sum(cross)
    m = paired.m
    pair_count = m * (m - 1)
    # Grouped so the swap of the two samples is exact: wf + wc commutes.
    within_total = within_f + within_c
    return HStatSummary(
        m=m,
        h_sum=within_total - cross_offdiag,
        within_f_sum=within_f,
        within_c_sum=within_c,
        cross_sum_offdiag=cross_offdiag,
        denom_sum=4.0 * spec.bound_k * pair_count - within_total,
        h_matrix=h_matrix,
    )


def mte_estimate(summary: HStatSummary) -> float:
    """Unnormalized kernel discrepancy, sum(H) over the m(m-1) pairs."""
    return summary.h_sum / summary.pair_count


def nte_estimate(summary: HStatSummary) -> float:
    """Normalized kernel discrepancy, sum(H) / sum(4K - within terms).

    The denominator is at least 2K * m * (m - 1) > 0, so the ratio is
    always defined, and it never exceeds 1.
    """
    return summary.h_sum / summary.denom_sum


def variance_components(summary: HStatSummary) -> VarianceComponents:
    """Dispersion estimates feeding the asymptotic decision rule.

    With r_i the mean of H[i, j] over j != i and hbar the overall mean:

        zeta1 = mean_i (r_i - hbar)^2
        zeta2 = mean over ordered pairs of (H[i, j] - hbar)^2
        sigma_hat = sqrt(((4m - 8) * zeta1 + 2 * zeta2) / (m - 1))
                    / (denom_sum / (m^2 - m))

    zeta1 <= zeta2 holds mathematically (row means disperse less than
    entries); a violation beyond rounding dust is flagged with a warning,
    not an error.
    """
    m = summary.m
    if m < 3:
        raise ValueError("variance components need m >= 3")
    h = summary.h_matrix
    hbar = summary.h_sum / summary.pair_count
    row_means = h.sum(axis=1) / (m - 1)
    zeta1 = float(np.mean((row_means - hbar) ** 2))
    centered_sq = (h - hbar) ** 2
    # The diagonal of h is zero by construction and is not a comparison;
    # remove its (0 - hbar)^2 contributions.
    zeta2 = float((centered_sq.sum() - m * hbar**2) / summary.pair_count)
    zeta2 = max(zeta2, 0.0)
    if zeta1 > zeta2 + 1e-9 * max(zeta1, 1.0):
        warnings.warn(
            f"zeta1={zeta1!r} exceeds zeta2={zeta2!r}; "
            "dispersion estimates are unreliable for this sample"
        )
    radicand = ((4.0 * m - 8.0) * zeta1 + 2.0 * zeta2) / (m - 1.0)
    sigma_hat = float(np.sqrt(max(radicand, 0.0))) / summary.denom_mean
    return VarianceComponents(zeta1=zeta1, zeta2=zeta2, sigma_hat=sigma_hat)


# ---------------------------------------------------------------------------
# Synthetic outcome laws and the Monte-Carlo population oracle.

_LAW_KINDS = ("gaussian", "point-mass", "two-point")


@dataclass(frozen=True)
class Law:
    """A one-dimensional outcome law, broadcast across output coordinates.

    Supported kinds: ``gaussian`` (params mean, sd), ``point-mass``
    (params value) and ``two-point`` (params prob, value_a, value_b, a
    mixture putting mass prob on a constant row of value_a).
    """

    kind: str
    params: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.kind not in _LAW_KINDS:
            raise ValueError(f"unsupported law kind {self.kind!r}")
        params = tuple(float(p) for p in self.params)
        if any(not np.isfinite(p) for p in params):
            raise ValueError("law parameters must be finite")
        if self.kind == "gaussian":
            if len(params) != 2 or params[1] <= 0.0:
                raise ValueError("gaussian law needs (mean, sd) with sd > 0")
        elif self.kind == "point-mass":
            if len(params) != 1:
                raise ValueError("point-mass law needs (value,)")
        else:
            if len(params) != 3 or not 0.0 <= params[0] <= 1.0:
                raise ValueError(
                    "two-point law needs (prob, value_a, value_b) with prob in [0, 1]"
                )
        object.__setattr__(self, "params", params)

    @classmethod
    def gaussian(cls, mean: float, sd: float) -> "Law":
        return cls("gaussian", (mean, sd))

    @classmethod
    def point_mass(cls, value: float) -> "Law":
        return cls("point-mass", (value,))

    @classmethod
    def two_point(cls, prob: float, value_a: float, value_b: float) -> "Law":
        return cls("two-point", (prob, value_a, value_b))

    def describe(self) -> str:
        inner = ", ".join(repr(p) for p in self.params)
        return f"{self.kind}({inner})"


def sample_law(law: Law, m: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Draw an (m, d) sample; rows of non-gaussian laws are constant."""
    if m < 1 or d < 1:
        raise ValueError("need m >= 1 and d >= 1")
    if law.kind == "gaussian":
        mean, sd = law.params
        return rng.normal(mean, sd, size=(m, d))
    if law.kind == "point-mass":
        return np.full((m, d), law.params[0])
    prob, value_a, value_b = law.params
    picks = np.where(rng.random(m) < prob, value_a, value_b)
    return np.repeat(picks[:, np.newaxis], d, axis=1)


@dataclass(frozen=True)
class OracleEstimate:
    """Monte-Carlo estimate of a population quantity with its standard error."""

    value: float
    stderr: float
    draws: int


def population_nte_oracle(
    factual_law: Law,
    counterfactual_law: Law,
    spec: KernelSpec,
    draws: int = 1_000_000,
    seed: int = 0,
    d: int = 1,
) -> OracleEstimate:
    """Monte-Carlo population value of the normalized statistic.

    Draws independent pairs (u, u') from the factual law and (v, v') from
    the counterfactual law, and estimates

        E[k(u, u') + k(v, v') - 2 k(u, v)]
        ----------------------------------
         4K - E[k(u, u')] - E[k(v, v')]

    The standard error of the ratio comes from the delta method on the
    per-draw numerator and denominator terms.
    """
    if draws < 10_000:
        raise ValueError("oracle needs draws >= 10000")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    four_k = 4.0 * spec.bound_k
    total = 0
    sum_a = sum_b = sum_aa = sum_bb = sum_ab = 0.0
    batch = 250_000
    remaining = draws
    while remaining > 0:
        n = min(batch, remaining)
        remaining -= n
        u = sample_law(factual_law, n, d, rng)
        u2 = sample_law(factual_law, n, d, rng)
        v = sample_law(counterfactual_law, n, d, rng)
        v2 = sample_law(counterfactual_law, n, d, rng)
        kuu = kernel_rowwise(spec, u, u2)
        kvv = kernel_rowwise(spec, v, v2)
        kuv = kernel_rowwise(spec, u, v)
        a = kuu + kvv - 2.0 * kuv
        b = four_k - kuu - kvv
        total += n
        sum_a += float(a.sum())
        sum_b += float(b.sum())
        sum_aa += float((a * a).sum())
        sum_bb += float((b * b).sum())
        sum_ab += float((a * b).sum())
    mean_a = sum_a / total
    mean_b = sum_b / total
    var_a = max(sum_aa / total - mean_a**2, 0.0)
    var_b = max(sum_bb / total - mean_b**2, 0.0)
    cov_ab = sum_ab / total - mean_a * mean_b
    ratio = mean_a / mean_b
    spread = max(var_a - 2.0 * ratio * cov_ab + ratio**2 * var_b, 0.0)
    stderr = float(np.sqrt(spread / total) / abs(mean_b))
    return OracleEstimate(value=float(ratio), stderr=stderr, draws=draws)
