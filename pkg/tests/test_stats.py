"""Closeness statistics: estimators, variance components, and oracles."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfclot import (
    GAUSSIAN,
    KernelSpec,
    Law,
    OracleEstimate,
    PairedOutcomes,
    h_summary,
    median_heuristic_bandwidth,
    mte_estimate,
    nte_estimate,
    population_nte_oracle,
    sample_law,
    variance_components,
)
from cfclot._util import substream
from conftest import paired_gaussian, random_paired
from oracles import brute_h_components, brute_mte, brute_nte, brute_variance

# Recorded before the test suite was written: population value of the
# normalized statistic for N(0,1) vs N(0.5,1) under the unit-bandwidth
# gaussian kernel, from this package's own oracle at ten million draws.
REFERENCE_SHIFT_HALF = 0.016654549206814345
REFERENCE_SHIFT_HALF_SE = 8.368876052661524e-05


def far_point_masses(m: int = 6) -> PairedOutcomes:
    """All factual rows at 0, all counterfactual rows at 100."""
    return PairedOutcomes(np.zeros((m, 1)), np.full((m, 1), 100.0))


class TestPairedOutcomes:
    def test_promotes_vectors_to_columns(self):
        paired = PairedOutcomes(np.array([1.0, 2.0]), np.array([3.0, 4.0]))
        assert paired.factual.shape == (2, 1)
        assert (paired.m, paired.d) == (2, 1)

    def test_pooled_stacks_factual_first(self):
        paired = PairedOutcomes(np.zeros((2, 1)), np.ones((2, 1)))
        np.testing.assert_array_equal(paired.pooled().ravel(), [0, 0, 1, 1])

    def test_swapped_exchanges_roles(self):
        paired = PairedOutcomes(np.zeros((2, 1)), np.ones((2, 1)))
        swapped = paired.swapped()
        np.testing.assert_array_equal(swapped.factual, paired.counterfactual)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            PairedOutcomes(np.zeros((3, 1)), np.zeros((4, 1)))

    def test_needs_two_rows(self):
        with pytest.raises(ValueError, match="two paired rows"):
            PairedOutcomes(np.zeros((1, 1)), np.zeros((1, 1)))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError, match="finite"):
            PairedOutcomes(np.array([[np.inf], [0.0]]), np.zeros((2, 1)))


class TestHSummary:
    def test_identical_samples_collapse_to_zero(self, unit_gaussian_spec, rng):
        rows = rng.normal(size=(8, 2))
        summary = h_summary(unit_gaussian_spec, PairedOutcomes(rows, rows.copy()))
        np.testing.assert_array_equal(summary.h_matrix, np.zeros((8, 8)))
        assert summary.h_sum == 0.0

    def test_far_point_masses_hit_the_extremes(self, unit_gaussian_spec):
        summary = h_summary(unit_gaussian_spec, far_point_masses())
        off = ~np.eye(6, dtype=bool)
        np.testing.assert_array_equal(summary.h_matrix[off], 2.0)
        assert summary.denom_sum == 2.0 * summary.pair_count

    def test_matches_brute_force(self, unit_gaussian_spec, rng):
        paired = random_paired(rng, 5, 2)
        summary = h_summary(unit_gaussian_spec, paired)
        brute = brute_h_components(
            unit_gaussian_spec, paired.factual, paired.counterfactual
        )
        for field in (
            "h_sum",
            "within_f_sum",
            "within_c_sum",
            "cross_sum_offdiag",
            "denom_sum",
        ):
            assert getattr(summary, field) == pytest.approx(brute[field], rel=1e-12)
        np.testing.assert_allclose(summary.h_matrix, brute["h_matrix"], rtol=1e-12)

    def test_component_identity_exact(self, unit_gaussian_spec, rng):
        for trial in range(10):
            paired = random_paired(rng, 7, 3)
            s = h_summary(unit_gaussian_spec, paired)
            assert s.h_sum == s.within_f_sum + s.within_c_sum - s.cross_sum_offdiag

    def test_h_matrix_shape_and_bounds(self, unit_gaussian_spec, rng):
        paired = random_paired(rng, 9, 2)
        s = h_summary(unit_gaussian_spec, paired)
        np.testing.assert_array_equal(s.h_matrix, s.h_matrix.T)
        np.testing.assert_array_equal(np.diagonal(s.h_matrix), np.zeros(9))
        assert np.abs(s.h_matrix).max() <= 2.0 * unit_gaussian_spec.bound_k
        assert not s.h_matrix.flags.writeable

    def test_denominator_per_pair_band(self, unit_gaussian_spec, rng):
        paired = random_paired(rng, 11, 1)
        s = h_summary(unit_gaussian_spec, paired)
        assert 2.0 * s.pair_count <= s.denom_sum <= 4.0 * s.pair_count


class TestEstimators:
    def test_identical_samples_give_zero(self, unit_gaussian_spec, rng):
        rows = rng.normal(size=(6, 1))
        s = h_summary(unit_gaussian_spec, PairedOutcomes(rows, rows.copy()))
        assert mte_estimate(s) == 0.0
        assert nte_estimate(s) == 0.0

    def test_far_point_masses_reach_the_bounds(self, unit_gaussian_spec):
        s = h_summary(unit_gaussian_spec, far_point_masses())
        assert mte_estimate(s) == 2.0
        assert nte_estimate(s) == 1.0

    def test_ratio_identities(self, unit_gaussian_spec, rng):
        paired = random_paired(rng, 10, 2)
        s = h_summary(unit_gaussian_spec, paired)
        assert nte_estimate(s) * s.denom_sum == pytest.approx(s.h_sum, rel=1e-12)
        assert nte_estimate(s) == pytest.approx(
            mte_estimate(s) / s.denom_mean, rel=1e-12
        )

    @given(st.integers(min_value=0, max_value=10**6))
    @settings(max_examples=80, deadline=None)
    def test_bounds_hold_on_random_instances(self, seed):
        gen = substream(404, seed)
        paired = random_paired(gen, int(gen.integers(2, 12)), int(gen.integers(1, 4)))
        spec = KernelSpec(GAUSSIAN, float(gen.uniform(0.2, 3.0)))
        s = h_summary(spec, paired)
        assert nte_estimate(s) <= 1.0
        assert -2.0 <= mte_estimate(s) <= 2.0

    def test_mte_tracks_population_oracle_at_m2000(self, unit_gaussian_spec):
        paired = paired_gaussian(314, 2000, shift=1.0)
        s = h_summary(unit_gaussian_spec, paired)
        got = mte_estimate(s)
        # fresh-draw population oracle for the unnormalized discrepancy
        gen = np.random.default_rng(271828)
        n = 1_000_000
        u, u2 = gen.normal(0, 1, n), gen.normal(0, 1, n)
        v, v2 = gen.normal(1, 1, n), gen.normal(1, 1, n)
        k = lambda a, b: np.exp(-0.5 * (a - b) ** 2)
        draws = k(u, u2) + k(v, v2) - k(u, v2) - k(v, u2)
        oracle, oracle_se = float(draws.mean()), float(draws.std(ddof=1) / np.sqrt(n))
        est_sd = variance_components(s).sigma_hat * s.denom_mean / np.sqrt(paired.m)
        combined = np.hypot(oracle_se, est_sd)
        assert abs(got - oracle) <= 3.0 * combined

    def test_nte_tracks_population_oracle_at_m2000(self):
        paired = paired_gaussian(315, 2000, shift=2.0)
        spec = KernelSpec(GAUSSIAN, median_heuristic_bandwidth(paired.pooled()))
        s = h_summary(spec, paired)
        got = nte_estimate(s)
        oracle = population_nte_oracle(
            Law.gaussian(0, 1), Law.gaussian(2, 1), spec, draws=1_000_000, seed=9
        )
        est_sd = variance_components(s).sigma_hat / np.sqrt(paired.m)
        combined = np.hypot(oracle.stderr, est_sd)
        assert abs(got - oracle.value) <= 3.0 * combined


class TestRelabelingExactness:
    def test_swap_is_bit_exact(self, rng):
        for trial in range(25):
            paired = random_paired(rng, int(rng.integers(3, 12)), 2)
            spec = KernelSpec(GAUSSIAN, float(rng.uniform(0.3, 2.0)))
            s = h_summary(spec, paired)
            swapped = h_summary(spec, paired.swapped())
            assert mte_estimate(s) == mte_estimate(swapped)
            assert nte_estimate(s) == nte_estimate(swapped)

    def test_joint_relabeling_is_bit_exact(self, rng):
        for trial in range(25):
            m = int(rng.integers(3, 12))
            paired = random_paired(rng, m, 2)
            order = rng.permutation(m)
            relabeled = PairedOutcomes(
                paired.factual[order], paired.counterfactual[order]
            )
            spec = KernelSpec(GAUSSIAN, 1.0)
            assert mte_estimate(h_summary(spec, paired)) == mte_estimate(
                h_summary(spec, relabeled)
            )
            assert nte_estimate(h_summary(spec, paired)) == nte_estimate(
                h_summary(spec, relabeled)
            )

    def test_breaking_the_pairing_changes_the_estimate(self, unit_gaussian_spec):
        # The estimator excludes the matched-pair cross terms, so permuting
        # one sample alone alters which cross terms are dropped. This
        # documents that only joint relabelings are invariances.
        gen = substream(505, 0)
        paired = random_paired(gen, 10, 1)
        order = gen.permutation(10)
        shuffled = PairedOutcomes(paired.factual, paired.counterfactual[order])
        before = mte_estimate(h_summary(unit_gaussian_spec, paired))
        after = mte_estimate(h_summary(unit_gaussian_spec, shuffled))
        assert abs(before - after) > 1e-6


class TestVarianceComponents:
    def test_identical_samples_have_no_dispersion(self, unit_gaussian_spec, rng):
        rows = rng.normal(size=(6, 1))
        s = h_summary(unit_gaussian_spec, PairedOutcomes(rows, rows.copy()))
        comps = variance_components(s)
        assert (comps.zeta1, comps.zeta2, comps.sigma_hat) == (0.0, 0.0, 0.0)

    def test_point_masses_have_no_dispersion(self, unit_gaussian_spec):
        comps = variance_components(h_summary(unit_gaussian_spec, far_point_masses()))
        assert (comps.zeta1, comps.zeta2, comps.sigma_hat) == (0.0, 0.0, 0.0)

    def test_matches_brute_force(self, unit_gaussian_spec, rng):
        paired = random_paired(rng, 6, 2)
        s = h_summary(unit_gaussian_spec, paired)
        got = variance_components(s)
        brute = brute_variance(
            brute_h_components(unit_gaussian_spec, paired.factual, paired.counterfactual)
        )
        assert got.zeta1 == pytest.approx(brute["zeta1"], rel=1e-10)
        assert got.zeta2 == pytest.approx(brute["zeta2"], rel=1e-10)
        assert got.sigma_hat == pytest.approx(brute["sigma_hat"], rel=1e-10)

    def test_row_dispersion_never_exceeds_total(self, rng):
        for trial in range(20):
            paired = random_paired(rng, int(rng.integers(4, 15)), 1)
            comps = variance_components(h_summary(KernelSpec(GAUSSIAN, 0.9), paired))
            assert comps.zeta1 <= comps.zeta2 + 1e-9 * max(comps.zeta1, 1.0)

    def test_needs_three_rows(self, unit_gaussian_spec):
        paired = PairedOutcomes(np.zeros((2, 1)), np.ones((2, 1)))
        with pytest.raises(ValueError, match="m >= 3"):
            variance_components(h_summary(unit_gaussian_spec, paired))

    def test_sigma_hat_predicts_the_sampling_spread(self, unit_gaussian_spec):
        """sigma_hat / sqrt(m) should track sd(nte) within a factor 0.7..1.3."""
        m, reps = 500, 300
        values, sigmas = [], []
        for trial in range(reps):
            paired = paired_gaussian(1001, m, shift=1.0, stream=trial)
            s = h_summary(unit_gaussian_spec, paired)
            values.append(nte_estimate(s))
            sigmas.append(variance_components(s).sigma_hat)
        predicted = float(np.median(sigmas)) / np.sqrt(m)
        empirical = float(np.std(values, ddof=1))
        assert 0.7 <= predicted / empirical <= 1.3


class TestLaws:
    def test_gaussian_validation(self):
        with pytest.raises(ValueError, match="sd > 0"):
            Law.gaussian(0.0, 0.0)

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="law kind"):
            Law("cauchy", (0.0,))

    def test_two_point_prob_band(self):
        with pytest.raises(ValueError, match="prob"):
            Law.two_point(1.5, 0.0, 1.0)

    def test_describe_round_trips_parameters(self):
        law = Law.gaussian(0.5, 2.0)
        assert law.describe() == "gaussian(0.5, 2.0)"

    def test_point_mass_rows_constant(self, rng):
        rows = sample_law(Law.point_mass(3.5), 4, 2, rng)
        np.testing.assert_array_equal(rows, np.full((4, 2), 3.5))

    def test_two_point_rows_constant_within_row(self, rng):
        rows = sample_law(Law.two_point(0.5, -1.0, 1.0), 200, 3, rng)
        assert set(np.unique(rows)) == {-1.0, 1.0}
        np.testing.assert_array_equal(rows.min(axis=1), rows.max(axis=1))

    def test_gaussian_moments(self):
        rows = sample_law(Law.gaussian(0.0, 1.0), 100_000, 1, substream(8, 0))
        assert abs(rows.mean()) < 0.02
        assert abs(rows.var() - 1.0) < 0.05


class TestPopulationOracle:
    def test_equal_laws_sit_at_zero(self, unit_gaussian_spec):
        est = population_nte_oracle(
            Law.gaussian(1.0, 2.0), Law.gaussian(1.0, 2.0), unit_gaussian_spec,
            draws=100_000, seed=3,
        )
        assert abs(est.value) <= 3.0 * est.stderr

    def test_far_point_masses_saturate(self, unit_gaussian_spec):
        est = population_nte_oracle(
            Law.point_mass(0.0), Law.point_mass(100.0), unit_gaussian_spec,
            draws=10_000, seed=0,
        )
        assert est.value == 1.0
        assert est.stderr == 0.0

    def test_reference_value_stable(self, unit_gaussian_spec):
        est = population_nte_oracle(
            Law.gaussian(0.0, 1.0), Law.gaussian(0.5, 1.0), unit_gaussian_spec,
            draws=10_000_000, seed=20260823,
        )
        assert abs(est.value - REFERENCE_SHIFT_HALF) <= 3.0 * REFERENCE_SHIFT_HALF_SE
        assert isinstance(est, OracleEstimate) and est.draws == 10_000_000

    def test_values_stay_in_unit_interval(self, unit_gaussian_spec):
        pairs = [
            (Law.gaussian(0.0, 1.0), Law.gaussian(3.0, 1.0)),
            (Law.two_point(0.9, 0.0, 1.0), Law.two_point(0.1, 0.0, 1.0)),
            (Law.point_mass(0.0), Law.gaussian(0.0, 1.0)),
        ]
        for factual, counterfactual in pairs:
            est = population_nte_oracle(
                factual, counterfactual, unit_gaussian_spec, draws=50_000, seed=5
            )
            assert 0.0 <= est.value <= 1.0

    def test_rejects_thin_draws(self, unit_gaussian_spec):
        with pytest.raises(ValueError, match="10000"):
            population_nte_oracle(
                Law.gaussian(0, 1), Law.gaussian(0, 1), unit_gaussian_spec, draws=100
            )

    def test_deterministic_given_seed(self, unit_gaussian_spec):
        kwargs = dict(draws=20_000, seed=12)
        a = population_nte_oracle(
            Law.gaussian(0, 1), Law.gaussian(1, 1), unit_gaussian_spec, **kwargs
        )
        b = population_nte_oracle(
            Law.gaussian(0, 1), Law.gaussian(1, 1), unit_gaussian_spec, **kwargs
        )
        assert (a.value, a.stderr) == (b.value, b.stderr)


class TestSamplingBehavior:
    def test_large_deviation_band(self, unit_gaussian_spec):
        """Tail mass of |mte| under the null stays below the exponential bound."""
        m, reps = 200, 1000
        values = []
        for trial in range(reps):
            paired = paired_gaussian(606, m, shift=0.0, stream=trial)
            values.append(mte_estimate(h_summary(unit_gaussian_spec, paired)))
        values = np.abs(values)
        for t in (0.05, 0.1):
            bound = 2.0 * np.exp(-2.0 * (m // 2) * t**2 / 16.0) * 1.5
            assert (values >= t).mean() < bound

    def test_median_deviation_shrinks_with_m(self, unit_gaussian_spec):
        oracle = population_nte_oracle(
            Law.gaussian(0, 1), Law.gaussian(1, 1), unit_gaussian_spec,
            draws=1_000_000, seed=11,
        )
        medians = {}
        for m in (125, 250, 500):
            devs = [
                abs(
                    nte_estimate(
                        h_summary(
                            unit_gaussian_spec,
                            paired_gaussian(2002, m, shift=1.0, stream=1000 * m + t),
                        )
                    )
                    - oracle.value
                )
                for t in range(120)
            ]
            medians[m] = float(np.median(devs))
        assert medians[250] <= medians[125] * 1.10
        assert medians[500] <= medians[250] * 1.10
