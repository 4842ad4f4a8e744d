"""Input validation shared by the estimators and the command line."""

from __future__ import annotations

import numbers

import numpy as np

from .collapse import SCALINGS, CollapseSchedule
from .geometry import SCENARIO_NAMES, BundleScenario, get_scenario
from .metricspace import FiniteMetricSpace


def check_scenario(scenario, **params):
    """Accept a BundleScenario or a catalog name."""
    if isinstance(scenario, BundleScenario):
        return scenario
    if isinstance(scenario, str):
        if scenario not in SCENARIO_NAMES:
            raise ValueError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIO_NAMES)}")
        return get_scenario(scenario, **{k: v for k, v in params.items() if v is not None})
    raise TypeError(f"expected a scenario name or BundleScenario, got {type(scenario).__name__}")


def check_positive(value, name, integer=False, allow_none=False):
    if value is None and allow_none:
        return None
    kind = numbers.Integral if integer else numbers.Real
    if isinstance(value, bool) or not isinstance(value, kind):
        raise TypeError(f"{name} must be {'an integer' if integer else 'a number'}, got {value!r}")
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    return value


def check_scaling(scaling):
    if scaling not in SCALINGS:
        raise ValueError(f"scaling must be one of {SCALINGS}, got {scaling!r}")
    return scaling


def check_schedule(schedule, scaling="quadratic"):
    """A CollapseSchedule from a schedule, a sequence of f values or a comma list."""
    if isinstance(schedule, CollapseSchedule):
        return schedule
    if isinstance(schedule, str):
        try:
            schedule = [float(x) for x in schedule.split(",") if x.strip()]
        except ValueError as exc:
            raise ValueError(f"schedule must be a comma separated list of numbers: {exc}") from None
    return CollapseSchedule(tuple(schedule), check_scaling(scaling))


def check_metric_space(X, name="X"):
    if isinstance(X, FiniteMetricSpace):
        return X
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a square distance matrix")
    return FiniteMetricSpace(arr)


def check_group_element(group, g, tol=1e-9):
    g = np.asarray(g)
    if g.shape[-2:] != (group.matrix_size, group.matrix_size):
        raise ValueError(f"expected {group.matrix_size}x{group.matrix_size} matrices")
    if np.max(group.defect(g)) > tol:
        raise ValueError("matrix is not an element of the group")
    return g
