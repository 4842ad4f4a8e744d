"""Estimator-style wrappers around the holonomy and collapse pipelines."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_metric_space, check_positive, check_scaling, check_scenario, check_schedule
from .collapse import default_net_config, holonomy_at, verify_theorem_a
from .metricspace import brute_force_gh, cc_diameter
from .transport import ambrose_singer_estimate, controllability_check, default_base_point


def _base_point(scenario, u):
    return default_base_point(scenario) if u is None else u


class HolonomyEstimator(BaseEstimator):
    """Identify the holonomy group of a catalog connection.

    Parameters
    ----------
    sample_count : int
        Transported curvature samples for the Ambrose-Singer span.
    loop_count : int
        Loops whose holonomies fix the discrete part.
    ode_step : float
        RK4 parameter step for each chart piece.
    seed : int
    """

    def __init__(self, sample_count=200, loop_count=20, ode_step=1e-3, seed=0):
        self.sample_count = sample_count
        self.loop_count = loop_count
        self.ode_step = ode_step
        self.seed = seed

    def fit(self, scenario, u=None):
        check_positive(self.sample_count, "sample_count", integer=True)
        check_positive(self.loop_count, "loop_count", integer=True)
        check_positive(self.ode_step, "ode_step")
        scenario = check_scenario(scenario)
        u = _base_point(scenario, u)
        self.scenario_ = scenario
        self.report_ = ambrose_singer_estimate(scenario, u, self.sample_count, self.seed, self.ode_step,
                                               loop_count=self.loop_count)
        self.holonomy_ = self.report_.identified
        self.algebra_rank_ = self.report_.algebra_rank
        self.controllable_ = controllability_check(scenario, u, self.report_)
        return self

    def predict(self, g, tol=1e-6):
        """Whether each group element lies in the identified holonomy group."""
        check_is_fitted(self, "report_")
        group = self.scenario_.group
        g = np.asarray(g)
        flat = g.reshape((-1,) + g.shape[-2:])
        out = np.array([self.holonomy_.distance_to(group, x) < tol for x in flat])
        return out.reshape(g.shape[:-2])


class CCDiameter(BaseEstimator):
    """Carnot-Caratheodory diameter kappa0 of a holonomy bundle."""

    def __init__(self, net_count=None, fiber_count=None, connectivity_radius=None, seed=0):
        self.net_count = net_count
        self.fiber_count = fiber_count
        self.connectivity_radius = connectivity_radius
        self.seed = seed

    def fit(self, scenario, u=None, holonomy=None):
        check_positive(self.net_count, "net_count", integer=True, allow_none=True)
        check_positive(self.fiber_count, "fiber_count", integer=True, allow_none=True)
        check_positive(self.connectivity_radius, "connectivity_radius", allow_none=True)
        scenario = check_scenario(scenario)
        u = _base_point(scenario, u)
        hol = holonomy if holonomy is not None else holonomy_at(scenario, u)
        cfg = default_net_config(scenario, target_count=self.net_count, fiber_count=self.fiber_count,
                                 connectivity_radius=self.connectivity_radius, seed=self.seed)
        self.kappa0_, self.net_ = cc_diameter(scenario, u, cfg, hol)
        return self


class CollapseVerifier(BaseEstimator):
    """Measure GH distortions along a collapse schedule.

    After ``fit``, ``predict(f)`` gives the bound kappa0 * scale(f) and
    ``score()`` the smallest slack over the schedule.
    """

    def __init__(self, schedule=(1.0, 0.25, 0.0625, 0.015625), scaling="quadratic", net_count=None,
                 fiber_count=None, connectivity_radius=None, seed=0, raise_on_violation=True):
        self.schedule = schedule
        self.scaling = scaling
        self.net_count = net_count
        self.fiber_count = fiber_count
        self.connectivity_radius = connectivity_radius
        self.seed = seed
        self.raise_on_violation = raise_on_violation

    def fit(self, scenario, u=None):
        check_scaling(self.scaling)
        schedule = check_schedule(self.schedule, self.scaling)
        check_positive(self.net_count, "net_count", integer=True, allow_none=True)
        scenario = check_scenario(scenario)
        cfg = default_net_config(scenario, target_count=self.net_count, fiber_count=self.fiber_count,
                                 connectivity_radius=self.connectivity_radius, seed=self.seed)
        self.report_ = verify_theorem_a(scenario, _base_point(scenario, u), schedule, cfg,
                                        raise_on_violation=self.raise_on_violation)
        self.kappa0_ = self.report_.kappa0
        self.schedule_ = schedule
        return self

    def predict(self, f):
        check_is_fitted(self, "report_")
        return self.kappa0_ * self.schedule_.scale(np.asarray(f, float))

    def transform(self, f=None):
        """Measured distortions, at the schedule values."""
        check_is_fitted(self, "report_")
        return self.report_.distortions

    def score(self, X=None, y=None):
        check_is_fitted(self, "report_")
        return float(min(s.slack for s in self.report_.steps))


class GromovHausdorffOracle(BaseEstimator):
    """Exact GH distances from a fixed small space to others."""

    def fit(self, X, y=None):
        self.X_ = check_metric_space(X, "X")
        brute_force_gh(self.X_, self.X_)
        return self

    def transform(self, Ys):
        check_is_fitted(self, "X_")
        return np.array([brute_force_gh(self.X_, check_metric_space(Y, "Y")) for Y in Ys])
