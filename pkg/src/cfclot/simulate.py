"""Synthetic scenarios and calibration experiments for the closeness test.

A scenario names a pair of outcome laws plus a kernel policy and a default
(m, epsilon, alpha) grid. Experiments resolve the kernel once per run on a
reference draw, so every trial and the population oracle share one fixed
kernel, then replay seeded trials. Trial t of a run with seed s always
uses substream (s, t); results are bit-stable across thread counts.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np
from scipy import stats as sps

from ._util import derive_seed, map_indexed
from .kernels import KernelPolicy, KernelSpec
from .stats import (
    Law,
    PairedOutcomes,
    h_summary,
    nte_estimate,
    population_nte_oracle,
    sample_law,
    variance_components,
)
from .testing import REJECT, TestConfig, run_cf_clot


@dataclass(frozen=True)
class GridPoint:
    """One experiment cell."""

    m: int
    epsilon: float
    alpha: float


@dataclass(frozen=True)
class Scenario:
    """A named synthetic configuration for calibration runs."""

    name: str
    factual: Law
    counterfactual: Law
    kernel: KernelPolicy
    grid: tuple[GridPoint, ...]
    d: int = 1

    def null(self) -> bool:
        return self.factual == self.counterfactual


def sample_scenario(scenario: Scenario, m: int, seed: int) -> PairedOutcomes:
    """Draw one paired sample; the two sides are independent draws."""
    if m < 2:
        raise ValueError("need m >= 2")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    factual = sample_law(scenario.factual, m, scenario.d, rng)
    counterfactual = sample_law(scenario.counterfactual, m, scenario.d, rng)
    return PairedOutcomes(factual=factual, counterfactual=counterfactual)


_REFERENCE_M = 256


def resolve_kernel(scenario: Scenario, seed: int = 0) -> KernelSpec:
    """Fix the scenario kernel on a dedicated reference draw.

    With a median bandwidth policy, per-trial resolution would make trials
    draw from slightly different statistics; resolving once keeps trials
    identically distributed and comparable to the population oracle.
    """
    reference = sample_scenario(scenario, _REFERENCE_M, derive_seed(seed, 0xBA2D))
    return scenario.kernel.resolve(reference.pooled())


def scenario_oracle(
    scenario: Scenario,
    spec: KernelSpec,
    draws: int = 400_000,
    seed: int = 1,
):
    return population_nte_oracle(
        scenario.factual, scenario.counterfactual, spec, draws, seed, scenario.d
    )


@dataclass(frozen=True)
class CalibrationRow:
    """Rejection rate of one grid cell over seeded trials."""

    m: int
    epsilon: float
    alpha: float
    trials: int
    rejection_rate: float
    stderr: float


def _rejection_rate(
    scenario: Scenario,
    spec: KernelSpec,
    point: GridPoint,
    trials: int,
    seed: int,
    mode: str,
    replicates: int,
) -> CalibrationRow:
    config = TestConfig(
        epsilon=point.epsilon,
        alpha=point.alpha,
        mode=mode,
        replicates=replicates,
    )

    def one(trial: int) -> bool:
        trial_seed = derive_seed(seed, point.m, trial)
        paired = sample_scenario(scenario, point.m, trial_seed)
        outcome = run_cf_clot(spec, paired, replace(config, seed=trial_seed))
        return outcome.decision == REJECT

    rejected = sum(map_indexed(one, trials))
    rate = rejected / trials
    return CalibrationRow(
        m=point.m,
        epsilon=point.epsilon,
        alpha=point.alpha,
        trials=trials,
        rejection_rate=rate,
        stderr=float(np.sqrt(rate * (1.0 - rate) / trials)),
    )


def null_distribution_experiment(
    scenario: Scenario,
    grid: Iterable[GridPoint],
    trials: int,
    seed: int = 0,
    mode: str = "asymptotic",
    replicates: int = 200,
) -> list[CalibrationRow]:
    """Rejection rates when the two laws agree (false-alarm calibration)."""
    if trials < 1:
        raise ValueError("trials must be positive")
    if not scenario.null():
        raise ValueError(
            f"scenario {scenario.name!r} has unequal laws; "
            "use power_experiment for alternatives"
        )
    spec = resolve_kernel(scenario, seed)
    return [
        _rejection_rate(scenario, spec, point, trials, seed, mode, replicates)
        for point in grid
    ]


def power_experiment(
    scenario: Scenario,
    grid: Iterable[GridPoint],
    trials: int,
    seed: int = 0,
    mode: str = "asymptotic",
    replicates: int = 200,
) -> list[CalibrationRow]:
    """Rejection rates under a genuine discrepancy.

    Refuses scenarios whose population value does not clear every grid
    epsilon by at least three oracle standard errors; closer alternatives
    have no business in a power study.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    grid = list(grid)
    spec = resolve_kernel(scenario, seed)
    oracle = scenario_oracle(scenario, spec)
    for point in grid:
        if oracle.value - point.epsilon <= 3.0 * oracle.stderr:
            raise ValueError(
                f"scenario {scenario.name!r} population value {oracle.value:.4f} "
                f"(+/- {oracle.stderr:.4f}) does not clear epsilon={point.epsilon} "
                "by three standard errors"
            )
    return [
        _rejection_rate(scenario, spec, point, trials, seed, mode, replicates)
        for point in grid
    ]


@dataclass(frozen=True)
class NormalityDiagnostics:
    """Shape diagnostics of the standardized statistic across trials."""

    m: int
    trials: int
    center: float
    skewness: float
    excess_kurtosis: float
    qq_max_deviation: float


def asymptotic_normality_check(
    scenario: Scenario,
    m: int,
    trials: int,
    seed: int = 0,
) -> NormalityDiagnostics:
    """Standardize nte over seeded trials and measure gaussian fit.

    Uses the scenario's population value as the centering point, so the
    scenario must sit strictly inside (0, 1) by three oracle standard
    errors, and every trial must produce a positive dispersion estimate.
    """
    if trials < 8:
        raise ValueError("need at least eight trials")
    spec = resolve_kernel(scenario, seed)
    oracle = scenario_oracle(scenario, spec)
    margin = 3.0 * oracle.stderr
    if oracle.value - margin <= 0.0 or oracle.value + margin >= 1.0:
        raise ValueError(
            f"scenario {scenario.name!r} population value {oracle.value:.4f} is not "
            "strictly inside (0, 1); the gaussian limit does not apply"
        )

    def one(trial: int) -> float:
        trial_seed = derive_seed(seed, m, trial)
        paired = sample_scenario(scenario, m, trial_seed)
        summary = h_summary(spec, paired)
        sigma_hat = variance_components(summary).sigma_hat
        if sigma_hat == 0.0:
            raise ValueError("degenerate trial: sigma_hat = 0")
        return float(np.sqrt(m) * (nte_estimate(summary) - oracle.value) / sigma_hat)

    z = np.array(map_indexed(one, trials))
    z_sorted = np.sort(z)
    grid = (np.arange(1, trials + 1) - 0.5) / trials
    qq_dev = float(np.max(np.abs(z_sorted - sps.norm.ppf(grid))))
    return NormalityDiagnostics(
        m=m,
        trials=trials,
        center=float(oracle.value),
        skewness=float(sps.skew(z)),
        excess_kurtosis=float(sps.kurtosis(z, fisher=True)),
        qq_max_deviation=qq_dev,
    )


def _builtin_scenarios() -> dict[str, Scenario]:
    gaussian_median = KernelPolicy()
    fixed_unit = KernelPolicy(bandwidth=1.0)
    scenarios = [
        Scenario(
            name="gaussian-null",
            factual=Law.gaussian(0.0, 1.0),
            counterfactual=Law.gaussian(0.0, 1.0),
            kernel=gaussian_median,
            grid=(
                GridPoint(m=500, epsilon=0.05, alpha=0.01),
                GridPoint(m=500, epsilon=0.05, alpha=0.05),
            ),
        ),
        Scenario(
            name="gaussian-shift-1",
            factual=Law.gaussian(0.0, 1.0),
            counterfactual=Law.gaussian(1.0, 1.0),
            kernel=fixed_unit,
            grid=(
                GridPoint(m=100, epsilon=0.05, alpha=0.05),
                GridPoint(m=250, epsilon=0.05, alpha=0.05),
                GridPoint(m=500, epsilon=0.05, alpha=0.05),
            ),
        ),
        Scenario(
            name="gaussian-shift-2",
            factual=Law.gaussian(0.0, 1.0),
            counterfactual=Law.gaussian(2.0, 1.0),
            kernel=gaussian_median,
            grid=(
                GridPoint(m=100, epsilon=0.1, alpha=0.05),
                GridPoint(m=250, epsilon=0.1, alpha=0.05),
                GridPoint(m=500, epsilon=0.1, alpha=0.05),
            ),
        ),
        Scenario(
            name="point-mass-null",
            factual=Law.point_mass(0.0),
            counterfactual=Law.point_mass(0.0),
            kernel=fixed_unit,
            grid=(GridPoint(m=100, epsilon=0.05, alpha=0.05),),
        ),
        Scenario(
            name="point-mass-far",
            factual=Law.point_mass(0.0),
            counterfactual=Law.point_mass(5.0),
            kernel=fixed_unit,
            grid=(GridPoint(m=50, epsilon=0.1, alpha=0.05),),
        ),
        Scenario(
            name="two-point-bias",
            factual=Law.two_point(0.8, 0.2689414213699951, 0.7310585786300049),
            counterfactual=Law.two_point(0.2, 0.2689414213699951, 0.7310585786300049),
            kernel=KernelPolicy(bandwidth=0.1),
            grid=(GridPoint(m=500, epsilon=0.1, alpha=0.05),),
        ),
    ]
    return {s.name: s for s in scenarios}


SCENARIOS: dict[str, Scenario] = _builtin_scenarios()


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ValueError(
            f"unknown scenario {name!r}; available: {', '.join(sorted(SCENARIOS))}"
        ) from None
