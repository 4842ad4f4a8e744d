import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from holocollapse.geometry import (NORTH, SOUTH, BundlePoint, Sphere2, TangentVector, Torus2, catalog_scenarios,
                                   connection_form, curvature_form, get_scenario, horizontal_projection,
                                   orthonormal_frame, vertical_vector)
from holocollapse.liegroup import ClosedSubgroup

seeds = st.integers(0, 2**31 - 1)
SCENARIOS = {s.name: s for s in catalog_scenarios()}


def random_vector(s, rng):
    g = s.group.random(rng)
    z = rng.uniform(-1.2, 1.2, 2)
    chart = int(rng.integers(0, len(s.charts)))
    return TangentVector(BundlePoint(chart, z, g), rng.normal(size=2), rng.normal(size=s.group.dim))


def test_catalog():
    cat = catalog_scenarios()
    assert [s.name for s in cat] == ["FlatSphere", "HopfLike", "HalfTorus", "AbelianInSU2"]
    assert [s.expected_holonomy.name for s in cat] == ["Trivial", "Full", "FiniteCyclic(2)",
                                                       "CircleSubgroup(0,0,1)"]
    with pytest.raises(KeyError):
        get_scenario("Nope")
    assert get_scenario("HopfLike", hopf_charge=1).charge == 1.0


def test_half_torus_holonomy_depends_on_coefficient():
    assert get_scenario("HalfTorus", torus_coefficient=1 / 3).expected_holonomy.name == "FiniteCyclic(3)"
    assert get_scenario("HalfTorus", torus_coefficient=1.0).expected_holonomy.name == "Trivial"


def test_flat_potential_zero(rng):
    s = SCENARIOS["FlatSphere"]
    z = rng.uniform(-1.5, 1.5, (50, 2))
    assert np.all(s.gauge_potential(NORTH, z, rng.normal(size=(50, 2))) == 0)


def test_sphere_charts(rng):
    S = Sphere2(2.0)
    p = S.sample(rng, 200)
    for chart in (NORTH, SOUTH):
        assert np.allclose(S.from_chart(chart, S.to_chart(chart, p)), p)
    z = S.to_chart(NORTH, p)
    assert np.allclose(S.from_chart(SOUTH, S.switch_coords(z)), p)
    assert np.all(np.linalg.norm(S.to_chart(S.home_chart(p), p), axis=-1) <= 1 + 1e-12)


def test_sphere_metric_factor_finite_difference(rng):
    S = Sphere2(1.7)
    h = 1e-6
    for chart in (NORTH, SOUTH):
        for z in rng.uniform(-1.5, 1.5, (10, 2)):
            J = np.stack([(S.from_chart(chart, z + h * e) - S.from_chart(chart, z - h * e)) / (2 * h)
                          for e in np.eye(2)], -1)
            assert np.allclose(J.T @ J, S.metric(chart, z), rtol=1e-7, atol=1e-8)


def test_switch_jacobian_finite_difference(rng):
    S = Sphere2()
    h = 1e-6
    for z in rng.uniform(0.6, 1.4, (10, 2)):
        J = np.stack([(S.switch_coords(z + h * e) - S.switch_coords(z - h * e)) / (2 * h) for e in np.eye(2)], -1)
        assert np.allclose(J, S.switch_jacobian(z), atol=1e-7)


def test_distances():
    S = Sphere2()
    assert S.distance([0, 0, 1], [0, 0, -1]) == pytest.approx(np.pi)
    assert S.distance([1, 0, 0], [0, 1, 0]) == pytest.approx(np.pi / 2)
    T = Torus2((2.0, 3.0))
    assert T.distance([0.1, 0.1], [1.9, 2.9]) == pytest.approx(np.hypot(0.2, 0.2))


def test_hopf_total_flux_by_quadrature():
    for charge in (1.0, 3.0):
        s = get_scenario("HopfLike", hopf_charge=charge)
        e1, e2 = np.eye(2)
        total = 0.0
        for chart in (NORTH, SOUTH):
            # unit disc of each chart; the two discs tile the sphere
            def fz(r, t, chart=chart):
                z = np.array([r * np.cos(t), r * np.sin(t)])
                return r * s.curvature(chart, z, e1, e2)[0]

            total += integrate.dblquad(fz, 0, 2 * np.pi, 0, 1, epsabs=1e-11)[0]
        assert total == pytest.approx(2 * np.pi * charge, rel=1e-9)


@pytest.mark.parametrize("name", ["HopfLike", "AbelianInSU2", "HalfTorus", "FlatSphere"])
def test_curvature_matches_finite_difference_of_potential(name, rng):
    s = SCENARIOS[name]
    h = 1e-5
    for _ in range(5):
        z = rng.uniform(-1.2, 1.2, 2)
        v, w = rng.normal(size=(2, 2))

        def A(zz, vec):
            return s.gauge_potential(NORTH, zz, vec)

        dA = (A(z + h * v, w) - A(z - h * v, w)) / (2 * h) - (A(z + h * w, v) - A(z - h * w, v)) / (2 * h)
        want = dA + s.group.bracket(A(z, v), A(z, w))
        assert np.allclose(s.curvature(NORTH, z, v, w), want, atol=1e-7)


def test_hopf_curvature_on_orthonormal_frame(rng):
    for R in (1.0, 2.0):
        s = get_scenario("HopfLike", radius=R)
        for z in rng.uniform(-1.5, 1.5, (5, 2)):
            p = BundlePoint(NORTH, z, s.group.identity())
            e = orthonormal_frame(s, p)
            assert curvature_form(s, p, e[:, 0], e[:, 1])[0] == pytest.approx(s.charge / (2 * R**2))


def test_flat_curvatures_vanish(rng):
    for name in ("FlatSphere", "HalfTorus"):
        s = SCENARIOS[name]
        p = BundlePoint(NORTH, rng.uniform(-1, 1, 2), s.group.identity())
        assert np.allclose(curvature_form(s, p, *rng.normal(size=(2, 2))), 0)


@pytest.mark.parametrize("name", list(SCENARIOS))
def test_connection_form_basic(name, rng):
    s = SCENARIOS[name]
    g = s.group.random(rng)
    p = BundlePoint(NORTH, rng.uniform(-1, 1, 2), g)
    xi = rng.normal(size=s.group.dim)
    assert np.allclose(connection_form(s, vertical_vector(s, p, xi)), xi)
    w = rng.normal(size=2)
    want = s.group.adjoint(s.group.inverse(g), s.gauge_potential(NORTH, p.z, w))
    assert np.allclose(connection_form(s, TangentVector(p, w, np.zeros(s.group.dim))), want)
    if name == "FlatSphere":
        assert np.allclose(want, 0)


@pytest.mark.parametrize("name", ["HopfLike", "AbelianInSU2"])
@given(seed=seeds)
def test_connection_equivariance(name, seed):
    # theta(R_h* v) = Ad(h^-1) theta(v)
    s = SCENARIOS[name]
    rng = np.random.default_rng(seed)
    v = random_vector(s, rng)
    h = s.group.random(rng)
    lhs = connection_form(s, v.right_translate(s.group, h))
    rhs = s.group.adjoint(s.group.inverse(h), connection_form(s, v))
    assert np.allclose(lhs, rhs, atol=1e-12)


@pytest.mark.parametrize("name", ["HopfLike", "AbelianInSU2"])
@given(seed=seeds)
def test_connection_form_chart_independent(name, seed):
    s = SCENARIOS[name]
    rng = np.random.default_rng(seed)
    r = rng.uniform(0.6, 1.6)
    t = rng.uniform(0, 2 * np.pi)
    at = BundlePoint(NORTH, [r * np.cos(t), r * np.sin(t)], s.group.random(rng))
    v = TangentVector(at, rng.normal(size=2), rng.normal(size=s.group.dim))
    v2 = s.change_chart_vector(v, SOUTH)
    assert np.allclose(s.embed(v2.at), s.embed(at))
    assert np.allclose(connection_form(s, v2), connection_form(s, v), atol=1e-10)


@pytest.mark.parametrize("name", list(SCENARIOS))
def test_horizontal_projection(name, rng):
    s = SCENARIOS[name]
    v = random_vector(s, rng)
    hv = horizontal_projection(s, v)
    assert np.allclose(connection_form(s, hv), 0, atol=1e-12)
    assert np.allclose(hv.base, v.base)
    again = horizontal_projection(s, hv)
    assert np.allclose(again.fiber, hv.fiber) and np.allclose(again.base, hv.base)
    vert = horizontal_projection(s, vertical_vector(s, v.at, v.fiber))
    assert np.allclose(vert.base, 0) and np.allclose(vert.fiber, 0)


def test_expected_holonomies():
    assert SCENARIOS["AbelianInSU2"].expected_holonomy.same_as(ClosedSubgroup.circle([0, 0, 1]),
                                                               SCENARIOS["AbelianInSU2"].group)
