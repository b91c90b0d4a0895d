"""Regenerate the bundled audit example.

The dataset carries one planted unfairness: the logistic score leans on
the sensitive column ``a`` (coefficient 2.0) while the second sensitive
column ``b`` is ignored by the model (coefficient 0.0). Auditing with the
bundled config should therefore flag ``a`` and clear ``b``.

Run from the repository root:

    python3 demo/make_demo.py
"""
from __future__ import annotations

import json
from pathlib import Path

import pandas as pd

from cfclot._util import substream

HERE = Path(__file__).resolve().parent

CONFIG = {
    "dataset": "demo/biased_logistic.csv",
    "roles": {"a": "sensitive", "b": "sensitive", "x": "observable"},
    "predictor": {
        "kind": "logistic",
        "coefficients": {"a": 2.0, "b": 0.0, "x": 0.2},
        "intercept": -1.0,
    },
    "kernel": {"family": "gaussian-rbf", "bandwidth": 0.1},
    "test": {"preset": "neutral", "alpha": 0.05, "seed": 0},
}


def build_frame(m: int = 1000) -> pd.DataFrame:
    gen = substream(0, 7)
    frame = pd.DataFrame(
        {
            "a": (gen.random(m) < 0.2).astype(int),
            "x": gen.normal(size=m),
        }
    )
    frame["b"] = (gen.random(m) < 0.5).astype(int)
    return frame


def main() -> None:
    build_frame().to_csv(HERE / "biased_logistic.csv", index=False)
    (HERE / "audit_config.json").write_text(
        json.dumps(CONFIG, indent=2) + "\n", encoding="utf-8"
    )
    print(f"wrote {HERE / 'biased_logistic.csv'}")
    print(f"wrote {HERE / 'audit_config.json'}")


if __name__ == "__main__":
    main()
