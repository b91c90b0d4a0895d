"""Closeness-budget hypothesis test on paired outcome samples.

The null hypothesis is that the normalized discrepancy between the factual
and counterfactual outcome distributions stays within the closeness budget
epsilon; rejecting it certifies a violation at level alpha. Three decision
modes are available:

* ``asymptotic``: compare the normalized statistic against the gaussian
  threshold epsilon + sigma_hat * z_{1-alpha} / sqrt(m). Requires
  epsilon > 0; at epsilon = 0 the gaussian limit degenerates and the
  permutation mode is the supported route.
* ``bootstrap``: same statistic, threshold epsilon plus the upper quantile
  of the mean-centered wild-bootstrap replicates. The gaussian threshold
  is still reported alongside for comparison.
* ``permutation-two-sample``: exact exchangeable test of identical
  distributions (epsilon must be 0), decided by its p-value.

Reported p-values are diagnostic; the decision field is the contract.
"""
from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import numpy as np
from scipy import stats as sps

from .kernels import KernelSpec
from .resampling import (
    ReplicateSet,
    bootstrap_distribution,
    permutation_distribution,
    upper_quantile,
)
from .stats import (
    PairedOutcomes,
    h_summary,
    mte_estimate,
    nte_estimate,
    variance_components,
)

ASYMPTOTIC = "asymptotic"
BOOTSTRAP = "bootstrap"
PERMUTATION = "permutation-two-sample"
_MODES = (ASYMPTOTIC, BOOTSTRAP, PERMUTATION)

REJECT = "reject-H0"
FAIL_TO_REJECT = "fail-to-reject"

PRESET_STRONG = "strong"
PRESET_NEUTRAL = "neutral"
PRESET_WEAK = "weak"

# Preset -> (epsilon, mode). Strong sensitivity tolerates no discrepancy at
# all and therefore needs the exact permutation route; the others trade
# tolerance for the cheaper gaussian rule.
_PRESETS: Mapping[str, tuple[float, str]] = MappingProxyType(
    {
        PRESET_STRONG: (0.0, PERMUTATION),
        PRESET_NEUTRAL: (0.1, ASYMPTOTIC),
        PRESET_WEAK: (0.3, ASYMPTOTIC),
    }
)


@dataclass(frozen=True)
class TestConfig:
    """Decision-rule parameters, independent of any particular sample."""

    # Not a test case despite the name; keeps pytest collection quiet.
    __test__ = False

    epsilon: float
    alpha: float
    mode: str = ASYMPTOTIC
    replicates: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.mode not in _MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == PERMUTATION and self.epsilon != 0.0:
            raise ValueError("permutation-two-sample tests exact equality; epsilon must be 0")
        if self.replicates < 1:
            raise ValueError("replicates must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class TestOutcome:
    """Everything a report needs about one decision."""

    __test__ = False

    statistic: float
    sigma_hat: float
    threshold: float
    decision: str
    p_value: float
    mode: str
    m: int
    diagnostics: Mapping[str, float]


def threshold(epsilon: float, alpha: float, sigma_hat: float, m: int) -> float:
    """Gaussian rejection threshold epsilon + sigma_hat * z_{1-alpha} / sqrt(m)."""
    if m < 3:
        raise ValueError("need m >= 3")
    if sigma_hat < 0.0:
        raise ValueError("sigma_hat must be non-negative")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if epsilon <= 0.0:
        raise ValueError(
            "the gaussian threshold needs epsilon > 0; "
            "use permutation-two-sample mode for a zero budget"
        )
    quantile = float(sps.norm.ppf(1.0 - alpha))
    return epsilon + sigma_hat * quantile / np.sqrt(m)


def decide(statistic: float, thresh: float) -> str:
    """Strict comparison; a tie fails to reject."""
    return REJECT if statistic > thresh else FAIL_TO_REJECT


def sensitivity_preset(level: str) -> tuple[float, str]:
    """Map a named sensitivity level to its (epsilon, mode) pair."""
    try:
        return _PRESETS[level]
    except KeyError:
        raise ValueError(
            f"unknown sensitivity level {level!r}; expected one of {sorted(_PRESETS)}"
        ) from None


def _asymptotic_p_value(statistic: float, epsilon: float, sigma_hat: float, m: int) -> float:
    if sigma_hat == 0.0:
        return 0.0 if statistic > epsilon else 1.0
    z = np.sqrt(m) * (statistic - epsilon) / sigma_hat
    return float(sps.norm.sf(z))


def run_cf_clot(
    spec: KernelSpec, paired: PairedOutcomes, config: TestConfig
) -> TestOutcome:
    """Run the configured closeness test on one paired sample."""
    m = paired.m
    if m < 3:
        raise ValueError("need at least three paired rows")
    summary = h_summary(spec, paired)
    components = variance_components(summary)
    sigma_hat = components.sigma_hat
    diagnostics: dict[str, float] = {
        "bandwidth": float(spec.bandwidth),
        "bound_k": float(spec.bound_k),
        "denom_mean": summary.denom_mean,
    }

    if config.mode == ASYMPTOTIC:
        if config.epsilon == 0.0:
            raise ValueError(
                "asymptotic mode is degenerate at epsilon = 0; "
                "use permutation-two-sample mode"
            )
        statistic = nte_estimate(summary)
        thresh = threshold(config.epsilon, config.alpha, sigma_hat, m)
        p_value = _asymptotic_p_value(statistic, config.epsilon, sigma_hat, m)
        decision = decide(statistic, thresh)
    elif config.mode == BOOTSTRAP:
        statistic = nte_estimate(summary)
        replicates = bootstrap_distribution(
            spec, paired, config.replicates, config.seed
        )
        centered = np.sort(replicates.values - replicates.values.mean())
        thresh = config.epsilon + upper_quantile(
            ReplicateSet(values=centered, seed=replicates.seed), config.alpha
        )
        exceed = int(np.count_nonzero(replicates.values >= statistic - config.epsilon))
        p_value = (1.0 + exceed) / (replicates.size + 1.0)
        decision = decide(statistic, thresh)
        if config.epsilon > 0.0:
            diagnostics["asymptotic_threshold"] = threshold(
                config.epsilon, config.alpha, sigma_hat, m
            )
    else:
        statistic = mte_estimate(summary)
        replicates = permutation_distribution(
            spec, paired, config.replicates, config.seed
        )
        exceed = int(np.count_nonzero(replicates.values >= statistic))
        p_value = (1.0 + exceed) / (replicates.size + 1.0)
        decision = REJECT if p_value <= config.alpha else FAIL_TO_REJECT
        # Reported for context; the permutation decision is p-value driven.
        thresh = upper_quantile(replicates, config.alpha)

    return TestOutcome(
        statistic=float(statistic),
        sigma_hat=float(sigma_hat),
        threshold=float(thresh),
        decision=decision,
        p_value=float(p_value),
        mode=config.mode,
        m=m,
        diagnostics=MappingProxyType(diagnostics),
    )
