"""Isometry detection by jet invariants."""

import json

from ._isojet import (
    Error,
    Metric,
    ParseError,
    PreconditionError,
    bergman_kernel,
    check_isometry,
    exp_map,
    flip_profile,
    log_map,
    metric,
    metric_ids,
    orthonormal_frame,
    report_schema,
    s_invariant,
)
from ._isojet import run_scenarios as _run_scenarios

__all__ = [
    "Error",
    "Metric",
    "ParseError",
    "PreconditionError",
    "bergman_kernel",
    "check_isometry",
    "exp_map",
    "flip_profile",
    "log_map",
    "metric",
    "metric_ids",
    "orthonormal_frame",
    "report_schema",
    "run_scenarios",
    "s_invariant",
]


def run_scenarios(yaml, seed=None, tol_scale=1.0):
    """Run a YAML scenario document and return the reports as dicts."""
    return [json.loads(r) for r in _run_scenarios(yaml, seed, tol_scale)]
