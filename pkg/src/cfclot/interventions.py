"""Do-style interventions on sensitive attributes and model audits.

The audit pipeline holds everything except one sensitive attribute fixed,
rewrites that attribute with an intervention operator, queries the same
predictor on the original and the rewritten rows, and hands the paired
outputs to the closeness test. This rests on the usual causal reading:
each row's counterfactual depends only on its own rewritten attribute
(no interference between rows), and the audited attribute is not
confounded with the remaining columns in a way the predictor could
exploit. Neither assumption is testable from the data alone; reports
state them instead of pretending to verify them.
"""
from __future__ import annotations

import warnings
from dataclasses import InitVar, dataclass, field, replace
from typing import Any, Mapping, Protocol, runtime_checkable

import numpy as np
import pandas as pd

from ._util import derive_seed, substream
from .kernels import KernelPolicy
from .stats import PairedOutcomes
from .testing import FAIL_TO_REJECT, TestConfig, TestOutcome, run_cf_clot

ROLE_SENSITIVE = "sensitive"
ROLE_OBSERVABLE = "observable"
ROLE_OUTCOME = "outcome"
ROLE_IGNORED = "ignored"
ROLES = (ROLE_SENSITIVE, ROLE_OBSERVABLE, ROLE_OUTCOME, ROLE_IGNORED)

OP_FIXED = "fixed-replacement"
OP_SWAP = "value-swap"
OP_REDRAW = "uniform-redraw"
OP_NEUTRAL = "neutral-fill"
OPERATORS = (OP_FIXED, OP_SWAP, OP_REDRAW, OP_NEUTRAL)

VERDICT_FAIR = "fair"
VERDICT_UNFAIR = "unfair"

ASSUMPTION_NOTES = (
    "Counterfactual outputs assume row-level interventions do not interfere "
    "across rows and that the audited attribute is unconfounded given the "
    "remaining columns; both are asserted, not tested.",
    "Attributes are audited independently at the configured level; no "
    "family-wise correction is applied across attributes.",
)


class PredictorError(RuntimeError):
    """A predictor failed or returned misaligned output."""


@dataclass
class Dataset:
    """Tabular records plus a role for each column.

    Column roles: ``sensitive`` attributes are audited, ``observable``
    columns are held fixed model inputs, ``outcome`` columns hold
    precomputed model outputs (used by the lookup predictor), ``ignored``
    columns play no part.
    """

    frame: pd.DataFrame
    roles: Mapping[str, str]
    # Audit inputs must show both treatment states of every sensitive
    # column. Intervened copies may legitimately collapse the target column
    # to one value, so internal callers skip the support check.
    support_check: InitVar[bool] = True

    def __post_init__(self, support_check: bool) -> None:
        if len(self.frame) == 0:
            raise ValueError("dataset has no rows")
        roles = dict(self.roles)
        for column, role in roles.items():
            if role not in ROLES:
                raise ValueError(f"unknown role {role!r} for column {column!r}")
            if column not in self.frame.columns:
                raise ValueError(f"declared column {column!r} missing from data")
        for column in self.frame.columns:
            roles.setdefault(column, ROLE_IGNORED)
        if support_check:
            for column in self.sensitive_columns(roles):
                if self.frame[column].nunique() < 2:
                    raise ValueError(
                        f"sensitive column {column!r} has fewer than two observed values"
                    )
        self.roles = roles

    def sensitive_columns(self, roles: Mapping[str, str] | None = None) -> list[str]:
        roles = self.roles if roles is None else roles
        return [c for c in self.frame.columns if roles.get(c) == ROLE_SENSITIVE]

    def feature_columns(self) -> list[str]:
        wanted = (ROLE_SENSITIVE, ROLE_OBSERVABLE)
        return [c for c in self.frame.columns if self.roles.get(c) in wanted]

    def outcome_columns(self) -> list[str]:
        return [c for c in self.frame.columns if self.roles.get(c) == ROLE_OUTCOME]

    def features(self) -> pd.DataFrame:
        return self.frame[self.feature_columns()]

    @property
    def m(self) -> int:
        return len(self.frame)


@dataclass(frozen=True)
class InterventionSpec:
    """One do-style rewrite of a single sensitive attribute.

    ``value`` feeds fixed-replacement and neutral-fill (for neutral-fill it
    may be omitted on numeric columns, where the column median is used).
    ``mapping`` feeds value-swap and must restrict to a bijection on the
    attribute's observed values. ``seed`` only matters for uniform-redraw.
    """

    attribute: str
    operator: str
    value: Any = None
    mapping: Mapping[Any, Any] | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.operator not in OPERATORS:
            raise ValueError(f"unknown intervention operator {self.operator!r}")
        if self.operator == OP_SWAP and self.mapping is None:
            raise ValueError("value-swap needs a mapping")
        if self.operator == OP_FIXED and self.value is None:
            raise ValueError("fixed-replacement needs a value")

    def describe(self) -> str:
        if self.operator == OP_SWAP:
            detail = f"mapping={dict(self.mapping)!r}"
        elif self.operator == OP_REDRAW:
            detail = f"seed={self.seed}"
        else:
            detail = f"value={self.value!r}"
        return f"{self.operator}({detail})"


def _observed_domain(column: pd.Series) -> list[Any]:
    # First-appearance order keeps the domain deterministic for any dtype.
    return list(column.unique())


def apply_intervention(dataset: Dataset, spec: InterventionSpec) -> Dataset:
    """Return a dataset with one attribute rewritten, all else untouched."""
    if spec.attribute not in dataset.frame.columns:
        raise ValueError(f"attribute {spec.attribute!r} missing from data")
    if dataset.roles.get(spec.attribute) != ROLE_SENSITIVE:
        raise ValueError(f"attribute {spec.attribute!r} is not a sensitive column")
    column = dataset.frame[spec.attribute]
    domain = _observed_domain(column)
    numeric = pd.api.types.is_numeric_dtype(column)

    if spec.operator == OP_SWAP:
        mapping = dict(spec.mapping)
        missing = [v for v in domain if v not in mapping]
        if missing:
            raise ValueError(f"value-swap mapping misses observed values {missing!r}")
        image = [mapping[v] for v in domain]
        if len(set(image)) != len(domain) or any(v not in domain for v in image):
            raise ValueError(
                "value-swap mapping must be a bijection on the observed domain"
            )
        new_column = column.map(mapping)
    elif spec.operator == OP_REDRAW:
        rng = substream(spec.seed, 0)
        picks = rng.integers(0, len(domain), size=len(column))
        new_column = pd.Series(
            [domain[i] for i in picks], index=column.index, dtype=column.dtype
        )
    else:
        value = spec.value
        if spec.operator == OP_NEUTRAL and value is None:
            if not numeric:
                raise ValueError(
                    "neutral-fill without an explicit value needs a numeric column"
                )
            value = float(column.median())
        if numeric:
            if not np.isfinite(float(value)):
                raise ValueError("replacement value must be finite")
        elif value not in domain:
            raise ValueError(
                f"replacement value {value!r} outside the observed domain of "
                f"{spec.attribute!r}"
            )
        new_column = pd.Series([value] * len(column), index=column.index)
        if numeric:
            new_column = new_column.astype(float)

    frame = dataset.frame.copy()
    frame[spec.attribute] = new_column
    return Dataset(frame=frame, roles=dict(dataset.roles), support_check=False)


@dataclass(frozen=True)
class OverlapDiagnostics:
    """How much the intervention actually moved the attribute."""

    attribute: str
    changed_rows: int
    unchanged_rows: int
    distinct_before: int
    distinct_after: int


def overlap_check(dataset: Dataset, spec: InterventionSpec) -> OverlapDiagnostics:
    """Count rewritten rows; an intervention that moves nothing is suspect."""
    before = dataset.frame[spec.attribute]
    after = apply_intervention(dataset, spec).frame[spec.attribute]
    changed = int((before != after).sum())
    diagnostics = OverlapDiagnostics(
        attribute=spec.attribute,
        changed_rows=changed,
        unchanged_rows=len(before) - changed,
        distinct_before=int(before.nunique()),
        distinct_after=int(after.nunique()),
    )
    if changed == 0:
        warnings.warn(
            f"intervention {spec.describe()} on {spec.attribute!r} changed no rows; "
            "the audit cannot detect anything"
        )
    return diagnostics


# ---------------------------------------------------------------------------
# Predictors


@runtime_checkable
class Predictor(Protocol):
    """Deterministic, row-aligned mapping from feature rows to outputs."""

    output_dim: int

    def predict(self, frame: pd.DataFrame) -> np.ndarray: ...


def _as_outputs(raw: Any, rows: int, output_dim: int) -> np.ndarray:
    out = np.asarray(raw, dtype=float)
    if out.ndim == 1:
        out = out[:, np.newaxis]
    if out.shape != (rows, output_dim):
        raise PredictorError(
            f"predictor returned shape {out.shape}, expected ({rows}, {output_dim})"
        )
    if not np.all(np.isfinite(out)):
        raise PredictorError("predictor returned non-finite values")
    return out


@dataclass(frozen=True)
class GlmPredictor:
    """Built-in linear or logistic score on declared columns.

    Categorical columns must appear in ``encodings`` with an explicit
    value-to-number map; numeric columns are used as is.
    """

    coefficients: Mapping[str, float]
    intercept: float = 0.0
    link: str = "logit"
    encodings: Mapping[str, Mapping[Any, float]] = field(default_factory=dict)
    output_dim: int = field(default=1, init=False)

    def __post_init__(self) -> None:
        if self.link not in ("logit", "identity"):
            raise ValueError(f"unknown link {self.link!r}")
        if not self.coefficients:
            raise ValueError("need at least one coefficient")

    def _encode(self, frame: pd.DataFrame, column: str) -> np.ndarray:
        if column not in frame.columns:
            raise PredictorError(f"column {column!r} missing from features")
        series = frame[column]
        if column in self.encodings:
            encoding = self.encodings[column]
            unknown = [v for v in series.unique() if v not in encoding]
            if unknown:
                raise PredictorError(
                    f"column {column!r} has values {unknown!r} missing from its encoding"
                )
            return series.map(encoding).to_numpy(dtype=float)
        if not pd.api.types.is_numeric_dtype(series):
            raise PredictorError(f"categorical column {column!r} needs an encoding")
        return series.to_numpy(dtype=float)

    def predict(self, frame: pd.DataFrame) -> np.ndarray:
        z = np.full(len(frame), float(self.intercept))
        for column, coef in self.coefficients.items():
            z = z + float(coef) * self._encode(frame, column)
        if self.link == "logit":
            z = 1.0 / (1.0 + np.exp(-z))
        return _as_outputs(z, len(frame), self.output_dim)


@dataclass(frozen=True)
class LookupPredictor:
    """Join against precomputed predictions keyed by feature values.

    The table must behave as a function: one output vector per distinct
    feature combination. Feature combinations produced by an intervention
    must already be present, otherwise the lookup fails loudly.
    """

    table: Mapping[tuple, tuple[float, ...]]
    feature_columns: tuple[str, ...]
    output_dim: int

    @classmethod
    def from_frame(
        cls,
        frame: pd.DataFrame,
        feature_columns: list[str],
        output_columns: list[str],
    ) -> "LookupPredictor":
        if not output_columns:
            raise ValueError("lookup predictor needs at least one output column")
        table: dict[tuple, tuple[float, ...]] = {}
        keys = list(map(tuple, frame[feature_columns].itertuples(index=False)))
        outputs = frame[output_columns].to_numpy(dtype=float)
        for key, row in zip(keys, outputs):
            value = tuple(float(v) for v in row)
            prior = table.get(key)
            if prior is not None and prior != value:
                raise ValueError(
                    f"prediction table is not a function: key {key!r} maps to "
                    f"both {prior!r} and {value!r}"
                )
            table[key] = value
        return cls(
            table=table,
            feature_columns=tuple(feature_columns),
            output_dim=len(output_columns),
        )

    def predict(self, frame: pd.DataFrame) -> np.ndarray:
        missing_cols = [c for c in self.feature_columns if c not in frame.columns]
        if missing_cols:
            raise PredictorError(f"columns {missing_cols!r} missing from features")
        rows = []
        for key in map(tuple, frame[list(self.feature_columns)].itertuples(index=False)):
            try:
                rows.append(self.table[key])
            except KeyError:
                raise PredictorError(
                    f"feature combination {key!r} has no precomputed prediction; "
                    "extend the prediction table to cover intervened rows"
                ) from None
        return _as_outputs(np.array(rows), len(frame), self.output_dim)


@dataclass(frozen=True)
class CommandPredictor:
    """External model invoked once per prediction batch.

    Feature rows go to the command as CSV (header first) on stdin; the
    command must answer with one CSV row of ``output_dim`` numbers per
    input row, in order, and exit 0.
    """

    argv: tuple[str, ...]
    output_dim: int = 1

    def predict(self, frame: pd.DataFrame) -> np.ndarray:
        import subprocess

        payload = frame.to_csv(index=False)
        try:
            proc = subprocess.run(
                list(self.argv),
                input=payload,
                capture_output=True,
                text=True,
                check=False,
            )
        except OSError as exc:
            raise PredictorError(f"could not run {self.argv!r}: {exc}") from exc
        if proc.returncode != 0:
            raise PredictorError(
                f"predictor command exited with {proc.returncode}: "
                f"{proc.stderr.strip()[:500]}"
            )
        lines = [line for line in proc.stdout.splitlines() if line.strip()]
        if len(lines) != len(frame):
            raise PredictorError(
                f"predictor wrote {len(lines)} rows for {len(frame)} inputs"
            )
        try:
            rows = [[float(cell) for cell in line.split(",")] for line in lines]
        except ValueError as exc:
            raise PredictorError(f"non-numeric predictor output: {exc}") from exc
        return _as_outputs(np.array(rows), len(frame), self.output_dim)


# ---------------------------------------------------------------------------
# Audits


def generate_paired_outcomes(
    dataset: Dataset, predictor: Predictor, spec: InterventionSpec
) -> PairedOutcomes:
    """Factual and counterfactual predictor outputs for one intervention."""
    features = dataset.features()
    factual = _as_outputs(
        predictor.predict(features), dataset.m, predictor.output_dim
    )
    intervened = apply_intervention(dataset, spec)
    counterfactual = _as_outputs(
        predictor.predict(intervened.features()), dataset.m, predictor.output_dim
    )
    return PairedOutcomes(factual=factual, counterfactual=counterfactual)


@dataclass(frozen=True)
class AttributeReport:
    """Decision plus context for one audited sensitive attribute."""

    attribute: str
    intervention: InterventionSpec
    outcome: TestOutcome
    overlap: OverlapDiagnostics


@dataclass(frozen=True)
class AuditResult:
    """Per-attribute reports and the model-level verdict."""

    reports: tuple[AttributeReport, ...]
    verdict: str
    notes: tuple[str, ...] = ASSUMPTION_NOTES


def default_intervention(dataset: Dataset, attribute: str, seed: int) -> InterventionSpec:
    """Default rewrite per attribute shape.

    Two observed values: swap them. More values, numeric: neutral-fill
    with the median. More values, categorical: uniform redraw over the
    observed domain.
    """
    column = dataset.frame[attribute]
    domain = _observed_domain(column)
    if len(domain) == 2:
        mapping = {domain[0]: domain[1], domain[1]: domain[0]}
        return InterventionSpec(attribute=attribute, operator=OP_SWAP, mapping=mapping)
    if pd.api.types.is_numeric_dtype(column):
        return InterventionSpec(attribute=attribute, operator=OP_NEUTRAL)
    return InterventionSpec(attribute=attribute, operator=OP_REDRAW, seed=seed)


def audit_attribute(
    dataset: Dataset,
    predictor: Predictor,
    attribute: str,
    intervention: InterventionSpec,
    kernel_policy: KernelPolicy,
    config: TestConfig,
) -> AttributeReport:
    """Audit a single sensitive attribute with an explicit intervention."""
    if intervention.attribute != attribute:
        raise ValueError(
            f"intervention targets {intervention.attribute!r}, not {attribute!r}"
        )
    overlap = overlap_check(dataset, intervention)
    paired = generate_paired_outcomes(dataset, predictor, intervention)
    spec = kernel_policy.resolve(paired.pooled())
    outcome = run_cf_clot(spec, paired, config)
    return AttributeReport(
        attribute=attribute,
        intervention=intervention,
        outcome=outcome,
        overlap=overlap,
    )


def audit_all(
    dataset: Dataset,
    predictor: Predictor,
    config: TestConfig,
    kernel_policy: KernelPolicy | None = None,
    interventions: Mapping[str, InterventionSpec] | None = None,
) -> AuditResult:
    """Audit every sensitive attribute; fair only if none rejects.

    Attribute audits are independent. The audit at column position i runs
    with a seed derived from (config.seed, i), so distinct attributes never
    share a stream, and reports follow column order.
    """
    kernel_policy = kernel_policy or KernelPolicy()
    overrides = dict(interventions or {})
    attributes = dataset.sensitive_columns()
    if not attributes:
        raise ValueError("dataset declares no sensitive columns to audit")
    unknown = [a for a in overrides if a not in attributes]
    if unknown:
        raise ValueError(f"intervention overrides for non-sensitive columns {unknown!r}")
    reports = []
    for index, attribute in enumerate(attributes):
        attr_seed = derive_seed(config.seed, index)
        intervention = overrides.get(attribute)
        if intervention is None:
            intervention = default_intervention(
                dataset, attribute, seed=derive_seed(config.seed, index, 1)
            )
        reports.append(
            audit_attribute(
                dataset,
                predictor,
                attribute,
                intervention,
                kernel_policy,
                replace(config, seed=attr_seed),
            )
        )
    fair = all(r.outcome.decision == FAIL_TO_REJECT for r in reports)
    return AuditResult(
        reports=tuple(reports),
        verdict=VERDICT_FAIR if fair else VERDICT_UNFAIR,
    )
