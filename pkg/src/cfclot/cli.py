"""Command line front end.

Subcommands: ``test`` (two outcome CSV files), ``audit`` (dataset plus
config), ``calibrate`` (named synthetic scenario), ``simulate`` (write
scenario samples as CSV files).

Exit codes: 0 the null stands (fail to reject / fair), 1 rejection
(closeness violated / unfair), 2 usage, configuration, or runtime error.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import pandas as pd

from . import __version__
from ._util import derive_seed
from .interventions import (
    CommandPredictor,
    Dataset,
    GlmPredictor,
    InterventionSpec,
    LookupPredictor,
    Predictor,
    PredictorError,
    ROLE_IGNORED,
    ROLES,
    VERDICT_FAIR,
    audit_all,
    default_intervention,
    generate_paired_outcomes,
)
from .kernels import CUSTOM, GAUSSIAN, KernelPolicy, LAPLACIAN
from .report import (
    audit_report,
    render_report,
    test_report,
    write_calibration_csv,
    write_histogram_csv,
    write_report,
)
from .resampling import bootstrap_distribution, permutation_distribution
from .simulate import (
    SCENARIOS,
    get_scenario,
    null_distribution_experiment,
    power_experiment,
    sample_scenario,
)
from .stats import PairedOutcomes
from .testing import (
    ASYMPTOTIC,
    BOOTSTRAP,
    FAIL_TO_REJECT,
    PERMUTATION,
    TestConfig,
    run_cf_clot,
    sensitivity_preset,
)

EXIT_ACCEPT = 0
EXIT_REJECT = 1
EXIT_ERROR = 2


class ConfigError(ValueError):
    """Invalid configuration file or flags."""


# ---------------------------------------------------------------------------
# Config handling


def _require_keys(section: Mapping[str, Any], allowed: set[str], where: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys {unknown!r} in {where}")


def load_config_file(path: str) -> dict[str, Any]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}"
        ) from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    _require_keys(
        data,
        {"dataset", "roles", "predictor", "interventions", "kernel", "test", "output"},
        path,
    )
    return data


def build_test_config(section: Mapping[str, Any], args: argparse.Namespace) -> TestConfig:
    """Merge the config file section with flag overrides (flags win)."""
    _require_keys(
        dict(section),
        {"preset", "epsilon", "alpha", "mode", "replicates", "seed"},
        "the test section",
    )
    epsilon: float | None = None
    mode: str | None = None
    preset = getattr(args, "preset", None) or section.get("preset")
    if preset is not None:
        epsilon, mode = sensitivity_preset(preset)
    if section.get("epsilon") is not None:
        epsilon = float(section["epsilon"])
    if section.get("mode") is not None:
        mode = str(section["mode"])
    if getattr(args, "epsilon", None) is not None:
        epsilon = args.epsilon
    if getattr(args, "mode", None) is not None:
        mode = args.mode
    if epsilon is None and mode is None and preset is None:
        epsilon, mode = sensitivity_preset("neutral")
    if epsilon is None:
        raise ConfigError("no epsilon given (set a preset or an explicit value)")
    if mode is None:
        mode = ASYMPTOTIC

    alpha = section.get("alpha", 0.05)
    if getattr(args, "alpha", None) is not None:
        alpha = args.alpha
    replicates = section.get("replicates", 1000)
    if getattr(args, "replicates", None) is not None:
        replicates = args.replicates
    seed = section.get("seed", 0)
    if getattr(args, "seed", None) is not None:
        seed = args.seed
    try:
        return TestConfig(
            epsilon=float(epsilon),
            alpha=float(alpha),
            mode=mode,
            replicates=int(replicates),
            seed=int(seed),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_kernel_policy(section: Mapping[str, Any], args: argparse.Namespace) -> KernelPolicy:
    _require_keys(dict(section), {"family", "bandwidth"}, "the kernel section")
    family = section.get("family", GAUSSIAN)
    bandwidth: Any = section.get("bandwidth", "median")
    if getattr(args, "kernel", None) is not None:
        family = args.kernel
    if getattr(args, "bandwidth", None) is not None:
        bandwidth = args.bandwidth
    if family == CUSTOM:
        raise ConfigError("custom-bounded kernels are library-only, not configurable")
    if isinstance(bandwidth, str) and bandwidth != "median":
        try:
            bandwidth = float(bandwidth)
        except ValueError:
            raise ConfigError(
                f"bandwidth must be a positive number or 'median', got {bandwidth!r}"
            ) from None
    try:
        return KernelPolicy(family=family, bandwidth=bandwidth)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _coerce_domain_value(raw: Any) -> Any:
    if isinstance(raw, str):
        try:
            return float(raw)
        except ValueError:
            return raw
    return raw


def build_interventions(section: Mapping[str, Any]) -> dict[str, InterventionSpec]:
    overrides: dict[str, InterventionSpec] = {}
    for attribute, body in section.items():
        if not isinstance(body, dict):
            raise ConfigError(f"intervention for {attribute!r} must be an object")
        _require_keys(
            body,
            {"operator", "value", "mapping", "seed"},
            f"the intervention for {attribute!r}",
        )
        mapping = None
        if body.get("mapping") is not None:
            mapping = {
                _coerce_domain_value(k): _coerce_domain_value(v)
                for k, v in body["mapping"].items()
            }
        try:
            overrides[attribute] = InterventionSpec(
                attribute=attribute,
                operator=body.get("operator", ""),
                value=body.get("value"),
                mapping=mapping,
                seed=int(body.get("seed", 0)),
            )
        except ValueError as exc:
            raise ConfigError(f"intervention for {attribute!r}: {exc}") from exc
    return overrides


def build_predictor(section: Mapping[str, Any], dataset: Dataset) -> Predictor:
    if not section:
        raise ConfigError("an audit needs a predictor section")
    kind = section.get("kind")
    if kind in ("linear", "logistic"):
        _require_keys(
            dict(section),
            {"kind", "coefficients", "intercept", "encodings"},
            f"the {kind} predictor",
        )
        if not isinstance(section.get("coefficients"), dict):
            raise ConfigError(f"the {kind} predictor needs a coefficients object")
        encodings = {
            column: {_coerce_domain_value(k): float(v) for k, v in body.items()}
            for column, body in (section.get("encodings") or {}).items()
        }
        try:
            return GlmPredictor(
                coefficients={k: float(v) for k, v in section["coefficients"].items()},
                intercept=float(section.get("intercept", 0.0)),
                link="logit" if kind == "logistic" else "identity",
                encodings=encodings,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if kind == "command":
        _require_keys(dict(section), {"kind", "argv", "output_dim"}, "the command predictor")
        argv = section.get("argv")
        if not isinstance(argv, list) or not argv:
            raise ConfigError("the command predictor needs a non-empty argv list")
        return CommandPredictor(
            argv=tuple(str(a) for a in argv),
            output_dim=int(section.get("output_dim", 1)),
        )
    if kind == "prediction-file":
        _require_keys(
            dict(section), {"kind", "path", "features", "outputs"}, "the prediction-file predictor"
        )
        if section.get("path") is not None:
            try:
                table = pd.read_csv(section["path"])
            except OSError as exc:
                raise ConfigError(f"cannot read prediction file: {exc}") from exc
        else:
            table = dataset.frame
        features = list(section.get("features") or dataset.feature_columns())
        outputs = list(section.get("outputs") or dataset.outcome_columns())
        missing = [c for c in (*features, *outputs) if c not in table.columns]
        if missing:
            raise ConfigError(f"prediction table misses columns {missing!r}")
        if not outputs:
            raise ConfigError(
                "prediction-file predictor needs output columns "
                "(declare outcome roles or list them explicitly)"
            )
        try:
            return LookupPredictor.from_frame(table, features, outputs)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    raise ConfigError(
        f"unknown predictor kind {kind!r}; "
        "expected linear, logistic, command, or prediction-file"
    )


# ---------------------------------------------------------------------------
# CSV ingestion


def ingest_csv(path: str, roles: Mapping[str, str]) -> Dataset:
    """Load a dataset CSV, keep columns with active roles, drop bad rows."""
    try:
        frame = pd.read_csv(path)
    except OSError as exc:
        raise ConfigError(f"cannot read dataset {path!r}: {exc}") from exc
    except pd.errors.ParserError as exc:
        raise ConfigError(f"cannot parse dataset {path!r}: {exc}") from exc
    for column, role in roles.items():
        if role not in ROLES:
            raise ConfigError(f"unknown role {role!r} for column {column!r}")
        if column not in frame.columns:
            raise ConfigError(f"declared column {column!r} missing from {path!r}")
    used = [c for c in frame.columns if roles.get(c, ROLE_IGNORED) != ROLE_IGNORED]
    if not used:
        raise ConfigError("no columns with active roles declared")
    frame = frame[used]
    incomplete = frame.isna().any(axis=1)
    dropped = int(incomplete.sum())
    if dropped:
        warnings.warn(f"dropped {dropped} rows with missing values in used columns")
        frame = frame[~incomplete].reset_index(drop=True)
    if len(frame) == 0:
        raise ConfigError(f"no usable rows left in {path!r}")
    try:
        return Dataset(frame=frame, roles={c: roles[c] for c in used})
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _read_outcome_matrix(path: str) -> np.ndarray:
    try:
        frame = pd.read_csv(path)
    except OSError as exc:
        raise ConfigError(f"cannot read outcomes {path!r}: {exc}") from exc
    except pd.errors.ParserError as exc:
        raise ConfigError(f"cannot parse outcomes {path!r}: {exc}") from exc
    try:
        matrix = frame.to_numpy(dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path!r} must be all numeric: {exc}") from exc
    if matrix.ndim != 2 or matrix.shape[0] < 2:
        raise ConfigError(f"{path!r} must hold at least two outcome rows")
    return matrix


# ---------------------------------------------------------------------------
# Subcommands


def _emit(payload: dict[str, Any], out: str | None, filename: str) -> None:
    if out is None:
        sys.stdout.write(render_report(payload))
    else:
        directory = Path(out)
        directory.mkdir(parents=True, exist_ok=True)
        target = directory / filename
        write_report(target, payload)
        print(f"wrote {target}")


def cmd_test(args: argparse.Namespace) -> int:
    config_data = load_config_file(args.config) if args.config else {}
    for key in ("dataset", "roles", "predictor", "interventions", "output"):
        if key in config_data:
            raise ConfigError(f"section {key!r} does not apply to the test subcommand")
    config = build_test_config(config_data.get("test", {}), args)
    policy = build_kernel_policy(config_data.get("kernel", {}), args)
    factual = _read_outcome_matrix(args.factual)
    counterfactual = _read_outcome_matrix(args.counterfactual)
    if factual.shape != counterfactual.shape:
        raise ConfigError(
            f"shape mismatch: {factual.shape} vs {counterfactual.shape}"
        )
    paired = PairedOutcomes(factual=factual, counterfactual=counterfactual)
    spec = policy.resolve(paired.pooled())
    outcome = run_cf_clot(spec, paired, config)
    _emit(test_report(outcome, config), args.out, "test_report.json")
    return EXIT_ACCEPT if outcome.decision == FAIL_TO_REJECT else EXIT_REJECT


def _attribute_replicates(
    dataset: Dataset,
    predictor: Predictor,
    policy: KernelPolicy,
    config: TestConfig,
    overrides: dict[str, InterventionSpec],
    out_dir: Path,
) -> None:
    """Recompute per-attribute replicate sets for histogram sidecars.

    Replays the deterministic pipeline with each attribute's derived seed,
    so the histograms describe exactly the replicates behind the report.
    """
    for index, attribute in enumerate(dataset.sensitive_columns()):
        attr_seed = derive_seed(config.seed, index)
        intervention = overrides.get(attribute) or default_intervention(
            dataset, attribute, seed=derive_seed(config.seed, index, 1)
        )
        paired = generate_paired_outcomes(dataset, predictor, intervention)
        spec = policy.resolve(paired.pooled())
        if config.mode == BOOTSTRAP:
            replicates = bootstrap_distribution(
                spec, paired, config.replicates, attr_seed
            )
        else:
            replicates = permutation_distribution(
                spec, paired, config.replicates, attr_seed
            )
        target = out_dir / f"replicates_{attribute}.csv"
        write_histogram_csv(target, replicates)
        print(f"wrote {target}")


def cmd_audit(args: argparse.Namespace) -> int:
    if not args.config:
        raise ConfigError("audit needs --config")
    config_data = load_config_file(args.config)
    if "dataset" not in config_data:
        raise ConfigError("config misses the dataset path")
    roles = config_data.get("roles")
    if not isinstance(roles, dict) or not roles:
        raise ConfigError("config misses the roles map")
    config = build_test_config(config_data.get("test", {}), args)
    policy = build_kernel_policy(config_data.get("kernel", {}), args)
    dataset = ingest_csv(config_data["dataset"], roles)
    predictor = build_predictor(config_data.get("predictor", {}), dataset)
    overrides = build_interventions(config_data.get("interventions", {}))

    output_section = config_data.get("output", {})
    _require_keys(dict(output_section), {"dir", "histograms"}, "the output section")
    out = args.out or output_section.get("dir")
    histograms = bool(output_section.get("histograms", False))

    result = audit_all(dataset, predictor, config, policy, overrides)
    _emit(audit_report(result, config), out, "audit_report.json")
    if histograms and out is not None and config.mode in (BOOTSTRAP, PERMUTATION):
        _attribute_replicates(dataset, predictor, policy, config, overrides, Path(out))
    return EXIT_ACCEPT if result.verdict == VERDICT_FAIR else EXIT_REJECT


def cmd_calibrate(args: argparse.Namespace) -> int:
    scenario = get_scenario(args.scenario)
    if args.trials < 1:
        raise ConfigError("trials must be positive")
    mode = args.mode or ASYMPTOTIC
    replicates = args.replicates or 200
    seed = args.seed if args.seed is not None else 0
    if scenario.null():
        rows = null_distribution_experiment(
            scenario, scenario.grid, args.trials, seed, mode, replicates
        )
    else:
        rows = power_experiment(
            scenario, scenario.grid, args.trials, seed, mode, replicates
        )
    if args.out is None:
        writer = sys.stdout
        writer.write("m,epsilon,alpha,trials,rejection_rate,stderr\n")
        for row in rows:
            writer.write(
                f"{row.m},{row.epsilon},{row.alpha},{row.trials},"
                f"{row.rejection_rate},{row.stderr}\n"
            )
    else:
        directory = Path(args.out)
        directory.mkdir(parents=True, exist_ok=True)
        target = directory / f"calibration_{scenario.name}.csv"
        write_calibration_csv(target, rows)
        print(f"wrote {target}")
    return EXIT_ACCEPT


def cmd_simulate(args: argparse.Namespace) -> int:
    scenario = get_scenario(args.scenario)
    if args.m < 2:
        raise ConfigError("m must be at least 2")
    seed = args.seed if args.seed is not None else 0
    paired = sample_scenario(scenario, args.m, seed)
    directory = Path(args.out)
    directory.mkdir(parents=True, exist_ok=True)
    header = ",".join(f"y{i}" for i in range(paired.d))
    for name, block in (
        ("factual.csv", paired.factual),
        ("counterfactual.csv", paired.counterfactual),
    ):
        target = directory / name
        np.savetxt(target, block, delimiter=",", header=header, comments="", fmt="%.17g")
        print(f"wrote {target}")
    return EXIT_ACCEPT


# ---------------------------------------------------------------------------
# Argument parsing


def _add_common_test_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--epsilon", type=float, help="closeness budget in [0, 1)")
    parser.add_argument("--alpha", type=float, help="test level in (0, 1)")
    parser.add_argument(
        "--mode", choices=[ASYMPTOTIC, BOOTSTRAP, PERMUTATION], help="decision mode"
    )
    parser.add_argument(
        "--preset",
        choices=["strong", "neutral", "weak"],
        help="sensitivity preset fixing epsilon and mode",
    )
    parser.add_argument("--replicates", type=int, help="resampling replicate count")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--out", help="output directory (default: report to stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfclot",
        description=(
            "Audit predictive models for counterfactual fairness by testing "
            "whether factual and counterfactual output distributions stay "
            "within a closeness budget."
        ),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_test = sub.add_parser(
        "test", help="closeness test on two outcome CSV files (rows aligned)"
    )
    p_test.add_argument("factual", help="CSV of factual outputs, header first")
    p_test.add_argument("counterfactual", help="CSV of counterfactual outputs")
    _add_common_test_flags(p_test)
    p_test.add_argument(
        "--kernel", choices=[GAUSSIAN, LAPLACIAN], help="kernel family"
    )
    p_test.add_argument(
        "--bandwidth", help="positive bandwidth or 'median' (default median)"
    )
    p_test.set_defaults(func=cmd_test)

    p_audit = sub.add_parser("audit", help="audit every sensitive attribute of a dataset")
    _add_common_test_flags(p_audit)
    p_audit.add_argument(
        "--kernel", choices=[GAUSSIAN, LAPLACIAN], help="kernel family"
    )
    p_audit.add_argument(
        "--bandwidth", help="positive bandwidth or 'median' (default median)"
    )
    p_audit.set_defaults(func=cmd_audit)

    p_cal = sub.add_parser("calibrate", help="rejection-rate study on a named scenario")
    p_cal.add_argument("--scenario", required=True, help=f"one of: {', '.join(sorted(SCENARIOS))}")
    p_cal.add_argument("--trials", type=int, required=True, help="trials per grid cell")
    p_cal.add_argument("--mode", choices=[ASYMPTOTIC, BOOTSTRAP, PERMUTATION])
    p_cal.add_argument("--replicates", type=int)
    p_cal.add_argument("--seed", type=int)
    p_cal.add_argument("--out", help="output directory (default: CSV to stdout)")
    p_cal.set_defaults(func=cmd_calibrate)

    p_sim = sub.add_parser("simulate", help="write one scenario sample as CSV files")
    p_sim.add_argument("--scenario", required=True, help=f"one of: {', '.join(sorted(SCENARIOS))}")
    p_sim.add_argument("--m", type=int, required=True, help="rows per sample")
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help; pass both through.
        return int(exc.code or 0)
    try:
        return int(args.func(args))
    except (ConfigError, PredictorError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def entrypoint() -> None:
    raise SystemExit(main())
