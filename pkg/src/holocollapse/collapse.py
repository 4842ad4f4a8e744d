"""Collapsing metrics g_f = f pi^* g_M + <theta, theta> and their GH limits.

As f -> 0 the bundle with g_f converges to G/Hol_u with its normal
homogeneous metric, and the distortion of the correspondence given by the
submersion F is at most kappa0 * scale(f), with kappa0 the Carnot-Caratheodory
diameter of the holonomy bundle.  ``scale(f)`` is sqrt(f) when f multiplies
the quadratic form and f when it multiplies lengths.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import BoundViolated, NetMismatch, NoDecay, PathEscapesAtlas, StepRejected
from .geometry import BundlePoint, Sphere2
from .liegroup import quotient_distance
from .metricspace import Correspondence, NetConfig, bundle_net, cc_diameter
from .transport import BaseCurve, default_base_point, transport_point

SCHEMA_VERSION = "1.0"
SCALINGS = ("quadratic", "linear")
# 1 -> 1/64 is the standard sweep
MIN_SWEEP_SPAN = 64.0


@dataclass(frozen=True)
class CollapseSchedule:
    """Strictly decreasing positive f values and how f enters the metric."""

    f_values: tuple = (1.0, 0.25, 0.0625, 0.015625)
    scaling: str = "quadratic"

    def __post_init__(self):
        f = tuple(float(x) for x in self.f_values)
        object.__setattr__(self, "f_values", f)
        if not f or any(x <= 0 for x in f):
            raise ValueError("f values must be positive")
        if any(b >= a for a, b in zip(f, f[1:])):
            raise ValueError("f values must be strictly decreasing")
        if self.scaling not in SCALINGS:
            raise ValueError(f"scaling must be one of {SCALINGS}")

    def __len__(self):
        return len(self.f_values)

    def scale(self, f):
        return np.sqrt(f) if self.scaling == "quadratic" else f

    def horizontal_factor(self, f):
        """Coefficient of g_M in the quadratic form."""
        return f if self.scaling == "quadratic" else f * f

    @classmethod
    def theorem_b(cls, n_max=64, scaling="quadratic"):
        """f_n = 1/n for n = 1, 2, 4, ..., n_max."""
        ns = 2 ** np.arange(int(np.log2(n_max)) + 1)
        return cls(tuple(1.0 / ns), scaling)


class CollapsedMetric:
    """Norm of tangent vectors under g_f."""

    def __init__(self, scenario, f, scaling="quadratic"):
        if f <= 0:
            raise ValueError("f must be positive")
        if scaling not in SCALINGS:
            raise ValueError(f"scaling must be one of {SCALINGS}")
        self.scenario = scenario
        self.f = float(f)
        self.scaling = scaling
        self.horizontal_factor = self.f if scaling == "quadratic" else self.f**2

    def __repr__(self):
        return f"CollapsedMetric({self.scenario.name}, f={self.f:g}, {self.scaling})"

    def __call__(self, chart, z, g, w, xi):
        s = self.scenario
        group = s.group
        lam = s.base.metric_factor(chart, z)
        base_sq = lam * np.sum(np.asarray(w, float) ** 2, axis=-1)
        theta = group.adjoint(group.inverse(g), s.gauge_potential(chart, z, w)) + xi
        return np.sqrt(self.horizontal_factor * base_sq + group.inner(theta, theta))

    def norm(self, v):
        return float(self(v.at.chart, v.at.z, v.at.fiber, v.base, v.fiber))


def collapsed_metric(scenario, f, scaling="quadratic"):
    return CollapsedMetric(scenario, f, scaling)


# -- the submersion ------------------------------------------------------------------


def reference_path(scenario, v_point, u_point, waypoint=None):
    """Piecewise geodesic from pi(v) to pi(u), through waypoint if given."""
    base = scenario.base
    a = scenario.embed(v_point)
    b = scenario.embed(u_point)
    if waypoint is None and isinstance(base, Sphere2) and base.distance(a, b) > np.pi * base.radius - 1e-6:
        # antipodal: the geodesic is not unique, go through a fixed equatorial point
        n = b / np.linalg.norm(b)
        t = np.cross(n, [0.0, 0.0, 1.0] if abs(n[2]) < 0.9 else [1.0, 0.0, 0.0])
        waypoint = base.radius * t / np.linalg.norm(t)
    if waypoint is None:
        return BaseCurve.geodesic(base, a, b)
    return BaseCurve.geodesic(base, a, waypoint) + BaseCurve.geodesic(base, waypoint, b)


def submersion_map(scenario, u, v, waypoint=None, step=1e-3):
    """h with the transport of v to the fiber of u landing at u h.

    The value is defined modulo left multiplication by the holonomy group:
    ``F(v)`` is the right coset ``Hol_u h``, and ``F(v g) = F(v) g``.
    """
    group = scenario.group
    curve = reference_path(scenario, v, u, waypoint)
    try:
        end = transport_point(scenario, curve, v, step)
    except StepRejected as exc:
        raise PathEscapesAtlas(str(exc)) from exc
    if end.chart != u.chart:
        end = scenario.change_chart(end, u.chart)
    return group.inverse(u.fiber) @ end.fiber


def coset_distance(group, holonomy, a, b, **kw):
    """Normal homogeneous distance between the right cosets ``H a`` and ``H b``."""
    return quotient_distance(group, holonomy, group.inverse(np.asarray(a)), group.inverse(np.asarray(b)), **kw)


def build_canonical_correspondence(scenario, holonomy, images, cosets, limit_diameter=None):
    """Pair each F-image with the nearest sampled coset.

    Returns ``(Correspondence, rounding)``; cosets hit by no image are paired
    with the image nearest to them.
    """
    group = scenario.group
    images = np.asarray(images)
    cosets = np.asarray(cosets)
    n, k = len(images), len(cosets)
    d = np.stack([coset_distance(group, holonomy, images, np.broadcast_to(c, images.shape)) for c in cosets], -1)
    d = d.reshape(n, k)
    nearest = np.argmin(d, axis=1)
    rounding = float(d[np.arange(n), nearest].max(initial=0.0))
    if limit_diameter is None:
        limit_diameter = float(np.max(d, initial=0.0))
    if limit_diameter > 0 and rounding > 0.1 * limit_diameter:
        raise NetMismatch(f"coset rounding {rounding:.4g} exceeds 10% of the limit diameter {limit_diameter:.4g}")
    pairs = [np.stack([np.arange(n), nearest], -1)]
    missing = np.setdiff1d(np.arange(k), nearest)
    if len(missing):
        pairs.append(np.stack([np.argmin(d[:, missing], axis=0), missing], -1))
    return Correspondence(np.concatenate(pairs), n, k), rounding


# -- reports -------------------------------------------------------------------------


@dataclass
class CollapseStep:
    f: float
    distortion: float
    bound: float
    slack: float
    net_tolerance: float
    one_sided_margin: float
    diameter: float
    worst_pair: tuple = ()

    def row(self):
        return [self.f, self.distortion, self.bound, self.slack, self.net_tolerance]


@dataclass
class CollapseReport:
    """Per-f distortions of R_F against the bound ``kappa0 * scale(f)``.

    ``distortion`` is dis(R_F); the GH estimate is half of it, and the check
    ``dis/2 <= bound/2 + net_tolerance`` is applied row by row.
    """

    scenario: str
    scaling: str
    kappa0: float
    steps: list
    limit_space: str
    normalization: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def f_values(self):
        return np.array([s.f for s in self.steps])

    @property
    def distortions(self):
        return np.array([s.distortion for s in self.steps])

    @property
    def diameters(self):
        return np.array([s.diameter for s in self.steps])

    def violations(self):
        return [s for s in self.steps if s.distortion / 2 > s.bound / 2 + s.net_tolerance]

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["f", "distortion", "bound", "slack", "netTolerance"])
        for s in self.steps:
            w.writerow([repr(float(x)) for x in s.row()])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def to_dict(self):
        return {
            "schemaVersion": SCHEMA_VERSION,
            "scenario": self.scenario,
            "scaling": self.scaling,
            "kappa0": self.kappa0,
            "limitSpace": self.limit_space,
            "normalization": self.normalization,
            "steps": [
                {
                    "f": s.f, "distortion": s.distortion, "ghEstimate": s.distortion / 2, "bound": s.bound,
                    "slack": s.slack, "netTolerance": s.net_tolerance, "oneSidedMargin": s.one_sided_margin,
                    "diameter": s.diameter, "worstPair": list(s.worst_pair),
                }
                for s in self.steps
            ],
            "diagnostics": self.diagnostics,
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, default=_json_default)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x))


def holonomy_at(scenario, u):
    """Catalog holonomy group transported to the fiber of u."""
    return scenario.expected_holonomy.conjugate(scenario.group, u.fiber)


def limit_space_name(scenario, holonomy):
    g = scenario.group.tag
    if holonomy.kind == "full":
        return f"{g}/{g} (a point)"
    return f"{g}/{holonomy.name}"


def _limit_cosets(group, holonomy, labels, q_labels, tol=1e-7):
    """Distinct right cosets ``Hol L[a]`` among the labels."""
    reps = []
    for a in range(len(labels)):
        if not reps:
            reps.append(a)
            continue
        d = coset_distance(group, holonomy, labels[reps], np.broadcast_to(labels[a], labels[reps].shape))
        if np.min(d) > tol:
            reps.append(a)
    return np.array(reps)


def _path_check(scenario, u, net, holonomy, rng, count, step):
    """Compare F along two different reference paths with the net labels."""
    group = scenario.group
    m, K = len(net.points), len(net.labels)
    charts, z, fibers = net.node_points()
    picks = rng.choice(m * K, size=min(count, m * K), replace=False)
    worst_label, worst_path = 0.0, 0.0
    for idx in picks:
        v = BundlePoint(int(charts[idx]), z[idx], fibers[idx])
        h1 = submersion_map(scenario, u, v, step=step)
        w = scenario.base.sample(rng, 1)[0]
        try:
            h2 = submersion_map(scenario, u, v, waypoint=w, step=step)
        except PathEscapesAtlas:
            h2 = h1
        label = net.labels.elements[idx % K]
        worst_label = max(worst_label, float(coset_distance(group, holonomy, h1, label)))
        worst_path = max(worst_path, float(coset_distance(group, holonomy, h1, h2)))
    return worst_label, worst_path


def verify_theorem_a(scenario, u=None, schedule=None, cfg=None, holonomy=None, raise_on_violation=True,
                     path_checks=8, ode_step=1e-3, kappa_net=None):
    """Measure dis(R_F) for each f and compare with ``kappa0 * scale(f)``.

    The row check is ``dis/2 <= kappa0 * scale(f)/2 + netTolerance`` with
    netTolerance = 2 * connectivity radius + rounding.  The one-sided
    inequality ``d_f(a, b) >= d_T(F a, F b) - netTolerance`` is also checked.
    """
    schedule = schedule or CollapseSchedule()
    cfg = cfg or NetConfig()
    u = u if u is not None else default_base_point(scenario)
    group = scenario.group
    hol = holonomy if holonomy is not None else holonomy_at(scenario, u)
    if kappa_net is None:
        kappa0, cc = cc_diameter(scenario, u, cfg, hol)
    else:
        kappa0, cc = kappa_net
    net = bundle_net(scenario, u, hol, cfg, base_points=cc.points)
    q = net.label_quotient_distance(hol)
    labels = net.labels.elements
    reps = _limit_cosets(group, hol, labels, q)
    rng = np.random.default_rng(cfg.seed + 17)
    label_err, path_err = _path_check(scenario, u, net, hol, rng, path_checks, ode_step) if path_checks else (0.0, 0.0)
    limit_diam = float(q.max(initial=0.0))
    if limit_diam > 0 and label_err > 0.1 * limit_diam:
        raise NetMismatch(f"F disagrees with the net labels by {label_err:.4g}")
    rounding = label_err + cc.rounding
    net_tol = 2 * net.radius + rounding
    e_idx = int(net.labels.index(group.identity()))
    steps = []
    for k, f in enumerate(schedule.f_values):
        D0 = net.reduced_distances(schedule.horizontal_factor(f))
        gap = D0 - q[None, None, :]
        flat = int(np.argmax(np.abs(gap)))
        x, y, a = np.unravel_index(flat, gap.shape)
        dis = float(np.abs(gap).max())
        bound = kappa0 * schedule.scale(f)
        step = CollapseStep(f, dis, bound, bound - dis, net_tol, float(gap.min() + net_tol),
                            float(D0.max()), (int(x), e_idx, int(y), int(a)))
        steps.append(step)
        if raise_on_violation and step.slack < -2 * net_tol:
            raise BoundViolated(
                f"{scenario.name}: dis/2 = {dis / 2:.6g} exceeds kappa0*scale(f)/2 + tol = "
                f"{bound / 2 + net_tol:.6g} at f = {f:g}", pair=step.worst_pair, step=k)
        if raise_on_violation and step.one_sided_margin < 0:
            raise BoundViolated(f"{scenario.name}: d_f < d_T(F, F) - tol at f = {f:g}", pair=step.worst_pair, step=k)
    diagnostics = {
        "baseNetCount": len(net.points),
        "fiberLabels": len(net.labels),
        "nodes": net.node_count,
        "limitNetCount": int(len(reps)),
        "limitDiameter": limit_diam,
        "connectivityRadius": net.radius,
        "fiberSpacing": net.fiber_spacing,
        "ccSnapError": cc.rounding,
        "cosetRounding": label_err,
        "pathIndependenceError": path_err,
        "noiseFloor": noise_floor(net, cc),
        "ccNodes": cc.node_count,
    }
    return CollapseReport(scenario.name, schedule.scaling, kappa0, steps, limit_space_name(scenario, hol),
                          group.normalization, diagnostics)


def noise_floor(net, cc):
    """Distortion changes below this are not resolved by the nets."""
    return float(net.fiber_spacing + cc.rounding)


def decay_slope(f_values, distortions):
    """Least-squares slope of log(distortion) against log(f)."""
    f = np.asarray(f_values, float)
    d = np.asarray(distortions, float)
    ok = d > 0
    if ok.sum() < 2:
        return 0.0
    return float(np.polyfit(np.log(f[ok]), np.log(d[ok]), 1)[0])


def strictly_decreasing(values, floor):
    """Each value is below the previous one unless both sit inside the noise floor."""
    v = np.asarray(values, float)
    return bool(all(b < a or (a <= floor and b <= floor) for a, b in zip(v, v[1:])))


def convergence_sweep(scenario, u=None, schedule=None, cfg=None, scaling="quadratic", **kw):
    """Returns ``(slope, report)``; raises NoDecay when distortions do not halve.

    ``schedule`` may also be a plain sequence of f values.  A sequence that
    does not decrease to zero (a constant one, say) cannot show decay and
    raises NoDecay before any net is built.
    """
    if schedule is None:
        schedule = CollapseSchedule(scaling=scaling)
    elif not isinstance(schedule, CollapseSchedule):
        f = np.asarray(schedule, float)
        if len(f) < 4:
            raise ValueError("a sweep needs at least 4 f values")
        if np.any(f <= 0):
            raise ValueError("f values must be positive")
        if np.any(np.diff(f) >= 0) or f[0] / f[-1] < MIN_SWEEP_SPAN:
            raise NoDecay(f"f values {f.tolist()} do not decrease by a factor of {MIN_SWEEP_SPAN:g}")
        schedule = CollapseSchedule(tuple(f), scaling)
    f = np.asarray(schedule.f_values)
    if len(f) < 4 or f[0] / f[-1] < MIN_SWEEP_SPAN:
        raise ValueError(f"a sweep needs at least 4 f values with f_max / f_min >= {MIN_SWEEP_SPAN:g}")
    report = verify_theorem_a(scenario, u, schedule, cfg, **kw)
    d = report.distortions
    if not d[-1] * 2 <= d[0]:
        raise NoDecay(f"{scenario.name}: distortion went from {d[0]:.4g} to {d[-1]:.4g}")
    return decay_slope(f, d), report


def theorem_b_demo(scenario, cfg=None, u=None, n_max=64, scaling="quadratic", **kw):
    """Run the f_n = 1/n sequence and check that distortions go to zero."""
    schedule = CollapseSchedule.theorem_b(n_max, scaling)
    report = verify_theorem_a(scenario, u, schedule, cfg, **kw)
    d = report.distortions
    if not d[-1] < d[0]:
        raise NoDecay(f"{scenario.name}: distortion did not decrease along f_n = 1/n")
    report.diagnostics["finalOverInitialDistortion"] = float(d[-1] / d[0]) if d[0] > 0 else 0.0
    report.diagnostics["finalOverInitialDiameter"] = float(report.diameters[-1] / report.diameters[0])
    return report


def limit_space_distances(scenario, holonomy, elements):
    """Distance matrix of the right cosets of the given group elements."""
    group = scenario.group
    n = len(elements)
    a = np.broadcast_to(elements[:, None], (n, n) + elements.shape[1:])
    b = np.broadcast_to(elements[None, :], (n, n) + elements.shape[1:])
    D = coset_distance(group, holonomy, a, b)
    D = np.minimum(D, D.T)
    np.fill_diagonal(D, 0.0)
    return D


def default_net_config(scenario, **overrides):
    """Net resolution used for the collapse runs of a scenario."""
    if scenario.group.tag == "U1":
        params = dict(target_count=200, fiber_count=64)
    else:
        params = dict(target_count=100, fiber_count=16, fiber_group_order=120, sheet_fiber_count=64,
                      drift_slope=0.5)
    params.update({k: v for k, v in overrides.items() if v is not None})
    return NetConfig(**params)
