"""Machine-readable selection reports and their schema."""

from __future__ import annotations

import importlib.resources
import json
from typing import Sequence

import jsonschema

from .seltest import FeatureTestRecord, TEST_NAMES
from .shapley import ShapleyStats, VIMatrix

__all__ = ["build_selection_report", "load_schema", "validate_report"]

SCHEMA_VERSION = 1


def load_schema() -> dict:
    ref = importlib.resources.files("minshap.schemas") / "selection_report_v1.json"
    return json.loads(ref.read_text(encoding="utf-8"))


def validate_report(report: dict) -> None:
    """Raise jsonschema.ValidationError if the report is malformed."""
    jsonschema.validate(report, load_schema())


def build_selection_report(
    *,
    command: str,
    metadata: dict,
    feature_names: Sequence[str],
    stats: ShapleyStats,
    records: Sequence[FeatureTestRecord],
    tests: Sequence[str],
    matrix: VIMatrix | None = None,
) -> dict:
    """Assemble the report dict; selected sets are derived from the recorded
    per-feature decisions so the two can never disagree."""
    features = []
    for r in records:
        features.append(
            {
                "name": str(feature_names[r.feature]),
                "index": r.feature,
                "shapley_mean": float(stats.shapley_mean[r.feature]),
                "shapley_min": r.shapley_min,
                "var_at_min": r.var_at_min,
                "threshold": r.threshold,
                "argmin_perm": int(stats.argmin_perm[r.feature]),
                "p_max": r.p_max,
                "pvals": [float(x) for x in r.pvals],
                "z": [float(x) for x in r.z],
                "adjusted": {m: [float(x) for x in v] for m, v in r.adjusted.items()},
                "decisions": dict(r.decisions),
            }
        )
    selected = {
        test: [str(feature_names[r.feature]) for r in records if r.decisions[test]]
        for test in tests
        if test in TEST_NAMES
    }
    report = {
        "schema_version": SCHEMA_VERSION,
        "metadata": {"command": command, "tests": list(tests), **metadata},
        "features": features,
        "selected": selected,
    }
    if matrix is not None:
        report["matrix"] = {
            "perms": matrix.plan.perms.tolist(),
            "vi": matrix.vi.tolist(),
            "est_var": matrix.est_var.tolist(),
            "n_eval": matrix.n_eval,
        }
    return report
