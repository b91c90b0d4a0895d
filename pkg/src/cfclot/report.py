"""Deterministic report documents and plot-ready sidecar tables.

Reports are JSON key trees written with a stable layout: given the same
inputs and seed the bytes are identical except for the single
``generated_at`` line, which carries the only timestamp. Floats go through
repr, so a parsed report reproduces every value bit for bit.
"""
from __future__ import annotations

import csv
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .interventions import AttributeReport, AuditResult
from .resampling import ReplicateSet
from .testing import TestConfig, TestOutcome

SCHEMA_VERSION = 1
TIMESTAMP_KEY = "generated_at"


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def outcome_payload(outcome: TestOutcome) -> dict[str, Any]:
    return {
        "statistic": outcome.statistic,
        "sigma_hat": outcome.sigma_hat,
        "threshold": outcome.threshold,
        "decision": outcome.decision,
        "p_value": outcome.p_value,
        "mode": outcome.mode,
        "m": outcome.m,
        "diagnostics": dict(outcome.diagnostics),
    }


def config_payload(config: TestConfig) -> dict[str, Any]:
    return {
        "epsilon": config.epsilon,
        "alpha": config.alpha,
        "mode": config.mode,
        "replicates": config.replicates,
        "seed": config.seed,
    }


def attribute_payload(report: AttributeReport) -> dict[str, Any]:
    return {
        "attribute": report.attribute,
        "intervention": report.intervention.describe(),
        "overlap": {
            "changed_rows": report.overlap.changed_rows,
            "unchanged_rows": report.overlap.unchanged_rows,
            "distinct_before": report.overlap.distinct_before,
            "distinct_after": report.overlap.distinct_after,
        },
        "outcome": outcome_payload(report.outcome),
    }


def test_report(outcome: TestOutcome, config: TestConfig) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        TIMESTAMP_KEY: _timestamp(),
        "kind": "closeness-test",
        "config": config_payload(config),
        "outcome": outcome_payload(outcome),
    }


def audit_report(result: AuditResult, config: TestConfig) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        TIMESTAMP_KEY: _timestamp(),
        "kind": "model-audit",
        "config": config_payload(config),
        "notes": list(result.notes),
        "attributes": [attribute_payload(r) for r in result.reports],
        "verdict": result.verdict,
    }


def render_report(payload: Mapping[str, Any]) -> str:
    """Serialize a report; floats keep full round-trip precision."""
    return json.dumps(payload, indent=2, allow_nan=False) + "\n"


def write_report(path: Path, payload: Mapping[str, Any]) -> None:
    path.write_text(render_report(payload), encoding="utf-8")


def load_report(path: Path) -> dict[str, Any]:
    return json.loads(path.read_text(encoding="utf-8"))


def strip_timestamp(text: str) -> str:
    """Report body with the timestamp line removed, for byte comparisons."""
    return "".join(
        line
        for line in text.splitlines(keepends=True)
        if f'"{TIMESTAMP_KEY}"' not in line
    )


def histogram_rows(replicates: ReplicateSet, bins: int = 40) -> list[dict[str, float]]:
    """Density histogram of a replicate set as plot-ready rows."""
    counts, edges = np.histogram(replicates.values, bins=bins, density=False)
    total = replicates.size
    widths = np.diff(edges)
    rows = []
    for i, count in enumerate(counts):
        density = count / (total * widths[i]) if widths[i] > 0 else 0.0
        rows.append(
            {
                "value": float(0.5 * (edges[i] + edges[i + 1])),
                "bin_left": float(edges[i]),
                "bin_right": float(edges[i + 1]),
                "count": int(count),
                "density": float(density),
            }
        )
    return rows


def write_histogram_csv(path: Path, replicates: ReplicateSet, bins: int = 40) -> None:
    rows = histogram_rows(replicates, bins)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(
            handle, fieldnames=["value", "bin_left", "bin_right", "count", "density"]
        )
        writer.writeheader()
        writer.writerows(rows)


def write_calibration_csv(path: Path, rows: list) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["m", "epsilon", "alpha", "trials", "rejection_rate", "stderr"])
        for row in rows:
            writer.writerow(
                [row.m, row.epsilon, row.alpha, row.trials, row.rejection_rate, row.stderr]
            )
