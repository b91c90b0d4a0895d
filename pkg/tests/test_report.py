"""Report payloads, serialization round trips, and sidecar CSV tables."""
import json

import numpy as np
import pytest

from cfclot import (
    GAUSSIAN,
    CalibrationRow,
    GlmPredictor,
    KernelSpec,
    ReplicateSet,
    TestConfig,
    audit_all,
    run_cf_clot,
)
from cfclot.report import (
    SCHEMA_VERSION,
    TIMESTAMP_KEY,
    attribute_payload,
    audit_report,
    config_payload,
    load_report,
    outcome_payload,
    render_report,
    strip_timestamp,
    write_calibration_csv,
    write_histogram_csv,
    write_report,
)
from cfclot.report import histogram_rows
from cfclot.report import test_report as closeness_report

from test_interventions import biased_binary

CONFIG = TestConfig(epsilon=0.1, alpha=0.05, seed=3)


@pytest.fixture(scope="module")
def outcome():
    from conftest import paired_gaussian

    paired = paired_gaussian(55, 40, shift=1.0)
    return run_cf_clot(KernelSpec(GAUSSIAN, 1.0), paired, CONFIG)


@pytest.fixture(scope="module")
def audit_result():
    dataset = biased_binary(m=60, innocent=True)
    model = GlmPredictor(coefficients={"a": 1.0, "b": 0.0, "x": 0.5})
    return audit_all(dataset, model, CONFIG)


class TestPayloads:
    def test_outcome_payload_mirrors_the_outcome(self, outcome):
        payload = outcome_payload(outcome)
        assert payload["statistic"] == outcome.statistic
        assert payload["sigma_hat"] == outcome.sigma_hat
        assert payload["decision"] == outcome.decision
        assert payload["m"] == outcome.m
        assert payload["diagnostics"] == dict(outcome.diagnostics)

    def test_config_payload_mirrors_the_config(self):
        payload = config_payload(CONFIG)
        assert payload == {
            "epsilon": 0.1,
            "alpha": 0.05,
            "mode": "asymptotic",
            "replicates": 1000,
            "seed": 3,
        }

    def test_attribute_payload_names_the_intervention(self, audit_result):
        payload = attribute_payload(audit_result.reports[0])
        assert payload["attribute"] == "a"
        assert "value-swap" in payload["intervention"]
        assert payload["overlap"]["changed_rows"] == 60
        assert set(payload["outcome"]) == set(outcome_payload(audit_result.reports[0].outcome))

    def test_closeness_report_shape(self, outcome):
        payload = closeness_report(outcome, CONFIG)
        assert payload["schema_version"] == SCHEMA_VERSION
        assert payload["kind"] == "closeness-test"
        assert TIMESTAMP_KEY in payload

    def test_audit_report_shape(self, audit_result):
        payload = audit_report(audit_result, CONFIG)
        assert payload["kind"] == "model-audit"
        assert payload["verdict"] == audit_result.verdict
        assert [a["attribute"] for a in payload["attributes"]] == ["a", "b"]
        assert len(payload["notes"]) == 2


class TestSerialization:
    def test_round_trip_is_lossless(self, outcome, tmp_path):
        payload = closeness_report(outcome, CONFIG)
        path = tmp_path / "report.json"
        write_report(path, payload)
        loaded = load_report(path)
        assert loaded == payload
        assert loaded["outcome"]["statistic"] == outcome.statistic

    def test_render_is_idempotent(self, outcome):
        payload = closeness_report(outcome, CONFIG)
        text = render_report(payload)
        assert text.endswith("\n")
        assert render_report(json.loads(text)) == text

    def test_awkward_floats_survive(self):
        payload = {"a": 0.1 + 0.2, "b": 1e-17, "c": 1 / 3}
        loaded = json.loads(render_report(payload))
        assert loaded["a"] == 0.1 + 0.2
        assert loaded["b"] == 1e-17
        assert loaded["c"] == 1 / 3

    def test_non_finite_values_are_refused(self):
        with pytest.raises(ValueError):
            render_report({"bad": float("nan")})

    def test_strip_timestamp_equalizes_reruns(self, outcome):
        first = closeness_report(outcome, CONFIG)
        second = dict(first)
        second[TIMESTAMP_KEY] = "1999-01-01T00:00:00+00:00"
        assert render_report(first) != render_report(second)
        assert strip_timestamp(render_report(first)) == strip_timestamp(
            render_report(second)
        )

    def test_strip_timestamp_drops_exactly_one_line(self, outcome):
        text = render_report(closeness_report(outcome, CONFIG))
        stripped = strip_timestamp(text)
        assert len(text.splitlines()) - len(stripped.splitlines()) == 1
        assert TIMESTAMP_KEY not in stripped


class TestHistogram:
    def test_counts_and_density_normalize(self):
        gen = np.random.default_rng(8)
        replicates = ReplicateSet(values=np.sort(gen.normal(size=500)), seed=8)
        rows = histogram_rows(replicates, bins=25)
        assert len(rows) == 25
        assert sum(r["count"] for r in rows) == 500
        mass = sum(r["density"] * (r["bin_right"] - r["bin_left"]) for r in rows)
        assert mass == pytest.approx(1.0)
        for row in rows:
            assert row["value"] == pytest.approx(0.5 * (row["bin_left"] + row["bin_right"]))

    def test_constant_replicates_do_not_blow_up(self):
        replicates = ReplicateSet(values=np.zeros(50), seed=0)
        rows = histogram_rows(replicates, bins=10)
        assert sum(r["count"] for r in rows) == 50

    def test_csv_round_trips_exactly(self, tmp_path):
        gen = np.random.default_rng(9)
        replicates = ReplicateSet(values=np.sort(gen.normal(size=200)), seed=9)
        path = tmp_path / "hist.csv"
        write_histogram_csv(path, replicates, bins=12)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "value,bin_left,bin_right,count,density"
        assert len(lines) == 13
        rows = histogram_rows(replicates, bins=12)
        for line, row in zip(lines[1:], rows):
            cells = line.split(",")
            assert float(cells[0]) == row["value"]
            assert float(cells[4]) == row["density"]


class TestCalibrationCsv:
    def test_values_round_trip_exactly(self, tmp_path):
        rows = [
            CalibrationRow(
                m=100, epsilon=1 / 3, alpha=0.05, trials=7,
                rejection_rate=2 / 7, stderr=float(np.sqrt((2 / 7) * (5 / 7) / 7)),
            ),
            CalibrationRow(
                m=250, epsilon=0.1, alpha=0.01, trials=7,
                rejection_rate=0.0, stderr=0.0,
            ),
        ]
        path = tmp_path / "calibration.csv"
        write_calibration_csv(path, rows)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "m,epsilon,alpha,trials,rejection_rate,stderr"
        assert len(lines) == 3
        cells = lines[1].split(",")
        assert float(cells[1]) == 1 / 3
        assert float(cells[4]) == 2 / 7
        # Non-terminating decimals keep at least 12 significant digits.
        assert len(cells[1].split(".")[1]) >= 12
