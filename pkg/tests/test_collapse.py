import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holocollapse.collapse import (CollapseSchedule, CollapsedMetric, build_canonical_correspondence,
                                   convergence_sweep, coset_distance, decay_slope, default_net_config, holonomy_at,
                                   limit_space_distances, strictly_decreasing, submersion_map, verify_theorem_a)
from holocollapse.exceptions import NetMismatch, NoDecay
from holocollapse.geometry import TangentVector, get_scenario, horizontal_projection, vertical_vector
from holocollapse.liegroup import ClosedSubgroup
from holocollapse.transport import BaseCurve, default_base_point, transport_point

FLAT = get_scenario("FlatSphere")
HOPF = get_scenario("HopfLike")
TORUS = get_scenario("HalfTorus")
ABEL = get_scenario("AbelianInSU2")


def random_vector(s, rng):
    p = s.base.sample(rng, 1)[0]
    at = s.point_at(p, s.group.random(rng))
    return TangentVector(at, rng.normal(size=2), s.group.random_algebra(rng))


# -- the collapsed metric ------------------------------------------------------------


@pytest.mark.parametrize("s", [HOPF, ABEL], ids=lambda s: s.name)
@pytest.mark.parametrize("scaling", ["quadratic", "linear"])
def test_vertical_norm_independent_of_f(s, scaling, rng):
    at = s.point_at(s.base.sample(rng, 1)[0], s.group.random(rng))
    xi = s.group.random_algebra(rng)
    v = vertical_vector(s, at, xi)
    expected = np.sqrt(s.group.inner(xi, xi))
    for f in (1.0, 0.3, 1e-3):
        assert CollapsedMetric(s, f, scaling).norm(v) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("s", [FLAT, HOPF, TORUS, ABEL], ids=lambda s: s.name)
def test_horizontal_scaling_identity(s, rng):
    h = horizontal_projection(s, random_vector(s, rng))
    full = CollapsedMetric(s, 1.0).norm(h)
    lam = s.base.metric_factor(h.at.chart, h.at.z)
    assert full == pytest.approx(np.sqrt(lam * h.base @ h.base), rel=1e-10)
    assert CollapsedMetric(s, 0.25).norm(h) == pytest.approx(full / 2, rel=1e-12)
    assert CollapsedMetric(s, 0.25, "linear").norm(h) == pytest.approx(full / 4, rel=1e-12)


def test_collapsed_metric_rejects_bad_input():
    with pytest.raises(ValueError):
        CollapsedMetric(FLAT, 0.0)
    with pytest.raises(ValueError):
        CollapsedMetric(FLAT, 1.0, "cubic")


# -- schedules -----------------------------------------------------------------------


def test_schedule_validation():
    assert len(CollapseSchedule()) == 4
    for bad in [(), (1.0, 1.0), (0.5, 1.0), (1.0, -0.5)]:
        with pytest.raises(ValueError):
            CollapseSchedule(bad)
    with pytest.raises(ValueError):
        CollapseSchedule((1.0,), "cubic")
    tb = CollapseSchedule.theorem_b(64)
    assert tb.f_values == tuple(1.0 / 2**k for k in range(7))
    lin = CollapseSchedule((1.0, 0.25), "linear")
    assert lin.scale(0.25) == 0.25 and lin.horizontal_factor(0.25) == 0.0625
    assert CollapseSchedule().scale(0.25) == 0.5


def test_decay_helpers():
    f = np.array([1, 0.25, 0.0625, 0.015625])
    assert decay_slope(f, 3 * np.sqrt(f)) == pytest.approx(0.5)
    assert decay_slope(f, 3 * f) == pytest.approx(1.0)
    assert strictly_decreasing([4, 3, 2, 1], 0.0)
    assert not strictly_decreasing([4, 3, 3.5, 1], 0.1)
    assert strictly_decreasing([4, 0.05, 0.08], 0.1)


# -- the submersion ------------------------------------------------------------------


def test_submersion_at_base_point_is_identity():
    for s in (FLAT, HOPF, TORUS, ABEL):
        u = default_base_point(s)
        assert np.allclose(submersion_map(s, u, u), s.group.identity(), atol=1e-12)


def test_flat_sphere_submersion_is_fiber_coordinate(rng):
    u = default_base_point(FLAT)
    for _ in range(3):
        g = FLAT.group.random(rng)
        v = FLAT.point_at(FLAT.base.sample(rng, 1)[0], g)
        assert np.allclose(submersion_map(FLAT, u, v), g, atol=1e-9)


def test_half_torus_winding_lands_in_trivial_coset():
    u = default_base_point(TORUS)
    H = holonomy_at(TORUS, u)
    curve = BaseCurve.winding_loop(TORUS.base, TORUS.embed(u), (1, 0))
    v = transport_point(TORUS, curve, u)
    h = submersion_map(TORUS, u, v)
    assert np.allclose(h, [[-1.0]], atol=1e-6)
    assert coset_distance(TORUS.group, H, h, TORUS.group.identity()) < 1e-6
    # the limit is a circle of circumference pi
    assert coset_distance(TORUS.group, H, TORUS.group.exp(np.array([np.pi / 2])), np.eye(1)) == pytest.approx(np.pi / 2)


@given(seed=st.integers(0, 2**31 - 1))
@settings(max_examples=4)
def test_submersion_equivariance_mod_holonomy(seed):
    rng = np.random.default_rng(seed)
    for s in (TORUS, ABEL):
        u = default_base_point(s)
        H = holonomy_at(s, u)
        v = s.point_at(s.base.sample(rng, 1)[0], s.group.random(rng))
        g = s.group.random(rng)
        a = submersion_map(s, u, v.right_translate(g))
        b = submersion_map(s, u, v) @ g
        assert coset_distance(s.group, H, a, b) < 1e-6


def test_submersion_path_independence_mod_holonomy(rng):
    u = default_base_point(ABEL)
    H = holonomy_at(ABEL, u)
    for _ in range(3):
        v = ABEL.point_at(ABEL.base.sample(rng, 1)[0], ABEL.group.random(rng))
        w = ABEL.base.sample(rng, 1)[0]
        h1 = submersion_map(ABEL, u, v)
        h2 = submersion_map(ABEL, u, v, waypoint=w)
        assert coset_distance(ABEL.group, H, h1, h2) < 1e-5


# -- the canonical correspondence ----------------------------------------------------


def test_correspondence_single_point():
    e = FLAT.group.identity()[None]
    R, rounding = build_canonical_correspondence(FLAT, ClosedSubgroup.trivial(), e, e)
    assert R.pairs.tolist() == [[0, 0]] and rounding == 0.0


def test_correspondence_flat_sphere_exact(rng):
    g = FLAT.group.exp(np.linspace(0, 2 * np.pi, 8, endpoint=False)[:, None])
    R, rounding = build_canonical_correspondence(FLAT, ClosedSubgroup.trivial(), g, g)
    assert rounding < 1e-12
    assert sorted(map(tuple, R.pairs.tolist())) == [(i, i) for i in range(8)]


def test_correspondence_full_holonomy_is_a_point(rng):
    images = HOPF.group.random(rng, 10)
    R, rounding = build_canonical_correspondence(HOPF, ClosedSubgroup.full(), images, HOPF.group.identity()[None])
    assert rounding == 0.0
    assert sorted(R.pairs[:, 0].tolist()) == list(range(10)) and set(R.pairs[:, 1].tolist()) == {0}


def test_correspondence_augments_and_rejects():
    group = FLAT.group
    cosets = group.exp(np.array([[0.0], [0.05], [np.pi]]))
    images = group.exp(np.array([[0.0], [0.02], [3.1]]))
    R, rounding = build_canonical_correspondence(FLAT, ClosedSubgroup.trivial(), images, cosets)
    assert {1} <= set(R.pairs[:, 1].tolist()) and rounding == pytest.approx(0.0416, abs=1e-3)
    with pytest.raises(NetMismatch):
        build_canonical_correspondence(FLAT, ClosedSubgroup.trivial(), group.exp(np.array([[np.pi]])),
                                       group.identity()[None], limit_diameter=1.0)


def test_limit_space_distances_quotient_sphere(rng):
    u = default_base_point(ABEL)
    H = holonomy_at(ABEL, u)
    g = ABEL.group.random(rng, 6)
    D = limit_space_distances(ABEL, H, g)
    assert np.allclose(D, D.T) and np.allclose(np.diag(D), 0)
    # the right coset H g goes to Ad(g^-1) d on the unit sphere
    pts = ABEL.group.adjoint(ABEL.group.inverse(g), np.broadcast_to(H.direction, (6, 3)))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    angle = np.arccos(np.clip(pts @ pts.T, -1, 1))
    assert np.allclose(D, angle / 2, atol=1e-5)


# -- the pipeline on small nets ------------------------------------------------------


@pytest.fixture(scope="module")
def flat_small():
    cfg = default_net_config(FLAT, target_count=60, fiber_count=32)
    return verify_theorem_a(FLAT, None, CollapseSchedule(), cfg), cfg


def test_single_step_schedule_has_one_row():
    cfg = default_net_config(FLAT, target_count=30, fiber_count=16)
    rep = verify_theorem_a(FLAT, None, CollapseSchedule((1.0,)), cfg)
    assert len(rep.steps) == 1 and np.isfinite(rep.steps[0].slack)


def test_flat_sphere_rows_within_bound(flat_small):
    rep, _ = flat_small
    assert rep.kappa0 == pytest.approx(np.pi, rel=0.05)
    for s in rep.steps:
        assert s.distortion / 2 <= s.bound / 2 + s.net_tolerance
        assert s.one_sided_margin >= 0
        assert s.slack == pytest.approx(s.bound - s.distortion)
    quarter = rep.steps[2]
    assert quarter.f == 1 / 16
    assert quarter.distortion / 2 <= (np.pi / 2) / 4 + quarter.net_tolerance
    assert not rep.violations()


def test_flat_sphere_decay_slope(flat_small):
    rep, _ = flat_small
    assert decay_slope(rep.f_values, rep.distortions) == pytest.approx(0.5, abs=0.15)
    assert strictly_decreasing(rep.distortions, rep.diagnostics["noiseFloor"])


def test_report_serialization(flat_small, tmp_path):
    rep, _ = flat_small
    text = rep.to_csv(tmp_path / "c.csv")
    lines = text.strip().splitlines()
    assert lines[0] == "f,distortion,bound,slack,netTolerance" and len(lines) == 5
    assert float(lines[1].split(",")[0]) == 1.0
    doc = json.loads(rep.to_json(tmp_path / "c.json"))
    assert doc["schemaVersion"] == "1.0" and doc["limitSpace"] == "U1/Trivial"
    assert len(doc["steps"]) == 4 and "noiseFloor" in doc["diagnostics"]


def test_convergence_sweep_contract():
    with pytest.raises(NoDecay):
        convergence_sweep(FLAT, schedule=[1, 1, 1, 1])
    with pytest.raises(NoDecay):
        convergence_sweep(FLAT, schedule=[1, 0.9, 0.8, 0.7])
    with pytest.raises(ValueError):
        convergence_sweep(FLAT, schedule=[1, 0.1, 0.01])
    with pytest.raises(ValueError):
        convergence_sweep(FLAT, schedule=CollapseSchedule((1.0, 0.5, 0.25, 0.125)))


def test_convergence_sweep_flat_sphere():
    cfg = default_net_config(FLAT, target_count=40, fiber_count=16)
    slope, rep = convergence_sweep(FLAT, schedule=[1, 0.25, 0.0625, 0.015625], cfg=cfg)
    assert slope == pytest.approx(0.5, abs=0.15)
    assert len(rep.steps) == 4
