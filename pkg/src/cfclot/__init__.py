"""Counterfactual fairness auditing through kernel closeness testing.

The toolkit decides whether a predictive model treats a sensitive
attribute fairly by comparing the model's factual outputs with the
outputs obtained after a do-style intervention on that attribute. The
comparison is a normalized kernel discrepancy between the two outcome
distributions; a model is epsilon-fair toward an attribute when that
discrepancy stays within the closeness budget epsilon at the configured
test level.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .kernels import (
    CUSTOM,
    GAUSSIAN,
    GramBlock,
    KernelPolicy,
    KernelSpec,
    LAPLACIAN,
    gram_block,
    kernel_eval,
    kernel_rowwise,
    median_heuristic_bandwidth,
)
from .stats import (
    HStatSummary,
    Law,
    OracleEstimate,
    PairedOutcomes,
    VarianceComponents,
    h_summary,
    mte_estimate,
    nte_estimate,
    population_nte_oracle,
    sample_law,
    variance_components,
)
from .resampling import (
    BootstrapDraw,
    ReplicateSet,
    bootstrap_distribution,
    bootstrap_statistic,
    multinomial_weights,
    permutation_distribution,
    permutation_split,
    upper_quantile,
)
from .testing import (
    ASYMPTOTIC,
    BOOTSTRAP,
    FAIL_TO_REJECT,
    PERMUTATION,
    REJECT,
    TestConfig,
    TestOutcome,
    decide,
    run_cf_clot,
    sensitivity_preset,
    threshold,
)
from .interventions import (
    ASSUMPTION_NOTES,
    OP_FIXED,
    OP_NEUTRAL,
    OP_REDRAW,
    OP_SWAP,
    ROLE_IGNORED,
    ROLE_OBSERVABLE,
    ROLE_OUTCOME,
    ROLE_SENSITIVE,
    VERDICT_FAIR,
    VERDICT_UNFAIR,
    AttributeReport,
    AuditResult,
    CommandPredictor,
    Dataset,
    GlmPredictor,
    InterventionSpec,
    LookupPredictor,
    OverlapDiagnostics,
    Predictor,
    PredictorError,
    apply_intervention,
    audit_all,
    audit_attribute,
    default_intervention,
    generate_paired_outcomes,
    overlap_check,
)
from .simulate import (
    CalibrationRow,
    GridPoint,
    NormalityDiagnostics,
    SCENARIOS,
    Scenario,
    asymptotic_normality_check,
    get_scenario,
    null_distribution_experiment,
    power_experiment,
    resolve_kernel,
    sample_scenario,
)

__all__ = [
    "__version__",
    # kernels
    "CUSTOM",
    "GAUSSIAN",
    "LAPLACIAN",
    "GramBlock",
    "KernelPolicy",
    "KernelSpec",
    "gram_block",
    "kernel_eval",
    "kernel_rowwise",
    "median_heuristic_bandwidth",
    # statistics
    "HStatSummary",
    "Law",
    "OracleEstimate",
    "PairedOutcomes",
    "VarianceComponents",
    "h_summary",
    "mte_estimate",
    "nte_estimate",
    "population_nte_oracle",
    "sample_law",
    "variance_components",
    # resampling
    "BootstrapDraw",
    "ReplicateSet",
    "bootstrap_distribution",
    "bootstrap_statistic",
    "multinomial_weights",
    "permutation_distribution",
    "permutation_split",
    "upper_quantile",
    # testing
    "ASYMPTOTIC",
    "BOOTSTRAP",
    "PERMUTATION",
    "FAIL_TO_REJECT",
    "REJECT",
    "TestConfig",
    "TestOutcome",
    "decide",
    "run_cf_clot",
    "sensitivity_preset",
    "threshold",
    # interventions and audits
    "ASSUMPTION_NOTES",
    "OP_FIXED",
    "OP_NEUTRAL",
    "OP_REDRAW",
    "OP_SWAP",
    "ROLE_IGNORED",
    "ROLE_OBSERVABLE",
    "ROLE_OUTCOME",
    "ROLE_SENSITIVE",
    "VERDICT_FAIR",
    "VERDICT_UNFAIR",
    "AttributeReport",
    "AuditResult",
    "CommandPredictor",
    "Dataset",
    "GlmPredictor",
    "InterventionSpec",
    "LookupPredictor",
    "OverlapDiagnostics",
    "Predictor",
    "PredictorError",
    "apply_intervention",
    "audit_all",
    "audit_attribute",
    "default_intervention",
    "generate_paired_outcomes",
    "overlap_check",
    # simulation
    "CalibrationRow",
    "GridPoint",
    "NormalityDiagnostics",
    "SCENARIOS",
    "Scenario",
    "asymptotic_normality_check",
    "get_scenario",
    "null_distribution_experiment",
    "power_experiment",
    "resolve_kernel",
    "sample_scenario",
]
