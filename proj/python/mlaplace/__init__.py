"""Matrix Laplace principle estimators."""

import json as _json

from . import _core
from ._core import (
    ConfigError,
    NumericalError,
    canonical_polynomial,
    catalan_numbers,
    chi_constant,
    difference_quotient,
    gue_sample,
    semicircle_fisher,
    yosida_suite,
)

__all__ = [
    "ConfigError",
    "NumericalError",
    "canonical_polynomial",
    "catalan_numbers",
    "chi_constant",
    "difference_quotient",
    "drift",
    "fisher_flow",
    "gue_sample",
    "lhs_log_laplace",
    "potential",
    "quadratic_spec",
    "rhs_control_cost",
    "run",
    "sd_residuals",
    "semicircle_fisher",
    "value_h",
    "yosida_suite",
]


def _spec(spec):
    return spec if isinstance(spec, str) else _json.dumps(spec)


def quadratic_spec(c, t=1.0):
    """g = c tau(X^2) on one slot at time t."""
    return {"times": [t], "p": 2, "D": 0.0, "components": [{"D": 0.0, "C": c}]}


def potential(spec, slots):
    return _core.potential(_spec(spec), slots)


def value_h(spec, t, x, samples=256, seed=0):
    return _core.value_h(_spec(spec), t, x, samples, seed)


def drift(spec, t, x, samples=256, seed=0):
    return _core.drift(_spec(spec), t, x, samples, seed)


def lhs_log_laplace(spec, n, m=1, samples=20000, seed=0):
    return _core.lhs_log_laplace(_spec(spec), n, m, samples, seed)


def rhs_control_cost(spec, n, m=1, paths=200, steps=100, inner=64, seed=0):
    return _core.rhs_control_cost(_spec(spec), n, m, paths, steps, inner, seed)


def sd_residuals(spec, n, battery, samples=200, seed=0):
    return _core.sd_residuals(_spec(spec), n, battery, samples, seed)


def fisher_flow(spec, t):
    return _core.fisher_flow(_spec(spec), list(t))


def run(config, write_files=False):
    """Runs a config document; returns (exit_code, report dict)."""
    code, report = _core.run_config(_spec(config), write_files)
    return code, _json.loads(report)
