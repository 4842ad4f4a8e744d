"""Base manifolds, principal bundle scenarios and connection forms.

Bundles live in local trivializations.  A bundle point is ``(chart, z, g)``
with ``z`` chart coordinates on the base and ``g`` the fiber element.  Tangent
vectors carry a base velocity ``w`` and a fiber velocity ``xi = g^{-1} dg``
(the velocity translated back to the identity), so the connection form reads

    theta(w, xi) = Ad(g^{-1}) A(w) + xi

and horizontal curves solve ``dg/ds = -A(dz/ds) g``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .liegroup import ClosedSubgroup, CompactGroup

NORTH, SOUTH = 0, 1
CHART_DOMAIN = 2.0


class Sphere2:
    """Round 2-sphere of a given radius with two stereographic charts.

    Chart 0 is centred on the north pole, chart 1 on the south pole; each
    covers ``|z| < 2`` so the overlap is the annulus ``1/2 < |z| < 2``.
    Points are stored as embedded vectors in R^3.
    """

    tag = "Sphere2"
    dim = 2
    chart_names = ("north", "south")

    def __init__(self, radius=1.0):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)

    def __repr__(self):
        return f"Sphere2(radius={self.radius:g})"

    @property
    def diameter(self):
        return np.pi * self.radius

    @property
    def area(self):
        return 4 * np.pi * self.radius**2

    def home_chart(self, p):
        return np.where(np.asarray(p)[..., 2] >= 0, NORTH, SOUTH)

    def to_chart(self, chart, p):
        u = np.asarray(p, float) / self.radius
        chart = np.asarray(chart)[..., None]
        den = np.where(chart == NORTH, 1 + u[..., 2:3], 1 - u[..., 2:3])
        sign = np.where(chart == NORTH, 1.0, -1.0)
        return np.concatenate([u[..., 0:1], sign * u[..., 1:2]], axis=-1) / den

    def from_chart(self, chart, z):
        z = np.asarray(z, float)
        r2 = np.sum(z**2, axis=-1, keepdims=True)
        chart = np.asarray(chart)[..., None]
        sign = np.where(chart == NORTH, 1.0, -1.0)
        u = np.concatenate([2 * z[..., 0:1], sign * 2 * z[..., 1:2], sign * (1 - r2)], axis=-1) / (1 + r2)
        return self.radius * u

    def in_domain(self, chart, z, margin=0.0):
        return np.linalg.norm(np.asarray(z), axis=-1) < CHART_DOMAIN - margin

    def switch_coords(self, z):
        """Coordinates of the same point in the other chart (``z -> 1/z`` as complex)."""
        z = np.asarray(z, float)
        r2 = np.sum(z**2, axis=-1, keepdims=True)
        return np.concatenate([z[..., 0:1], -z[..., 1:2]], axis=-1) / r2

    def switch_jacobian(self, z):
        """Real Jacobian of ``z -> 1/z`` at z."""
        zc = z[..., 0] + 1j * z[..., 1]
        d = -1.0 / zc**2
        jac = np.empty(z.shape[:-1] + (2, 2))
        jac[..., 0, 0] = d.real
        jac[..., 0, 1] = -d.imag
        jac[..., 1, 0] = d.imag
        jac[..., 1, 1] = d.real
        return jac

    def metric_factor(self, chart, z):
        """Conformal factor lambda with g_M = lambda * |dz|^2."""
        r2 = np.sum(np.asarray(z, float) ** 2, axis=-1)
        return 4 * self.radius**2 / (1 + r2) ** 2

    def metric(self, chart, z):
        lam = self.metric_factor(chart, z)
        return lam[..., None, None] * np.eye(2)

    def distance(self, p, q):
        p = np.asarray(p, float) / self.radius
        q = np.asarray(q, float) / self.radius
        cross = np.linalg.norm(np.cross(p, q), axis=-1)
        return self.radius * np.arctan2(cross, np.sum(p * q, axis=-1))

    def sample(self, rng, n):
        v = rng.normal(size=(n, 3))
        return self.radius * v / np.linalg.norm(v, axis=-1, keepdims=True)

    def kdtree_coords(self, p):
        return np.asarray(p, float)

    def chord_radius(self, r):
        """Euclidean chord length matching geodesic radius r."""
        return 2 * self.radius * np.sin(min(r / self.radius, np.pi) / 2)

    def geodesic(self, p0, p1):
        """Great-circle arc from p0 to p1 as a function of s in [0, 1].

        Returns ``path(s) -> (points, velocity)`` in the embedding.
        """
        u0 = np.asarray(p0, float) / self.radius
        u1 = np.asarray(p1, float) / self.radius
        omega = np.arctan2(np.linalg.norm(np.cross(u0, u1), axis=-1), np.sum(u0 * u1, axis=-1))
        perp = u1 - np.cos(omega)[..., None] * u0
        nrm = np.linalg.norm(perp, axis=-1, keepdims=True)
        perp = np.where(nrm > 1e-15, perp / np.where(nrm > 1e-15, nrm, 1.0), 0.0)
        R = self.radius

        def path(s):
            s = np.asarray(s, float)[..., None]
            ang = s * omega[..., None]
            pts = R * (np.cos(ang) * u0 + np.sin(ang) * perp)
            vel = R * omega[..., None] * (-np.sin(ang) * u0 + np.cos(ang) * perp)
            return pts, vel

        return path

    def chart_velocity(self, chart, p, v):
        """Push an embedded velocity v at p into chart coordinates."""
        u = np.asarray(p, float) / self.radius
        du = np.asarray(v, float) / self.radius
        chart = np.asarray(chart)[..., None]
        sign = np.where(chart == NORTH, 1.0, -1.0)
        den = np.where(chart == NORTH, 1 + u[..., 2:3], 1 - u[..., 2:3])
        dden = sign * du[..., 2:3]
        num = np.concatenate([u[..., 0:1], sign * u[..., 1:2]], axis=-1)
        dnum = np.concatenate([du[..., 0:1], sign * du[..., 1:2]], axis=-1)
        return dnum / den - num * dden / den**2

    def azimuth(self, chart, z):
        """Azimuth angle measured in the north chart."""
        z = np.asarray(z, float)
        ang = np.arctan2(z[..., 1], z[..., 0])
        return np.where(np.asarray(chart) == NORTH, ang, -ang)

    def azimuth_differential(self, chart, z):
        """d(azimuth) as a covector in the given chart."""
        z = np.asarray(z, float)
        r2 = np.sum(z**2, axis=-1, keepdims=True)
        d = np.concatenate([-z[..., 1:2], z[..., 0:1]], axis=-1) / r2
        return np.where(np.asarray(chart)[..., None] == NORTH, d, -d)


class Torus2:
    """Flat torus R^2 / (L1 Z x L2 Z) with one periodic chart."""

    tag = "Torus2"
    dim = 2
    chart_names = ("torus",)

    def __init__(self, periods=(2 * np.pi, 2 * np.pi)):
        self.periods = np.asarray(periods, float)
        if self.periods.shape != (2,) or np.any(self.periods <= 0):
            raise ValueError("periods must be two positive numbers")

    def __repr__(self):
        return f"Torus2(periods=({self.periods[0]:g}, {self.periods[1]:g}))"

    @property
    def diameter(self):
        return float(np.linalg.norm(self.periods / 2))

    @property
    def area(self):
        return float(np.prod(self.periods))

    def home_chart(self, p):
        return np.zeros(np.shape(p)[:-1], dtype=int)

    def to_chart(self, chart, p):
        return np.mod(np.asarray(p, float), self.periods)

    def from_chart(self, chart, z):
        return np.mod(np.asarray(z, float), self.periods)

    def in_domain(self, chart, z, margin=0.0):
        return np.ones(np.shape(z)[:-1], dtype=bool)

    def metric_factor(self, chart, z):
        return np.ones(np.shape(z)[:-1])

    def metric(self, chart, z):
        return np.broadcast_to(np.eye(2), np.shape(z)[:-1] + (2, 2))

    def displacement(self, p, q):
        d = np.asarray(q, float) - np.asarray(p, float)
        return d - self.periods * np.round(d / self.periods)

    def distance(self, p, q):
        return np.linalg.norm(self.displacement(p, q), axis=-1)

    def sample(self, rng, n):
        return rng.uniform(0, 1, size=(n, 2)) * self.periods

    def kdtree_coords(self, p):
        return np.mod(np.asarray(p, float), self.periods)

    def chord_radius(self, r):
        return r

    def geodesic(self, p0, p1):
        p0 = np.asarray(p0, float)
        d = self.displacement(p0, p1)

        def path(s):
            s = np.asarray(s, float)[..., None]
            return p0 + s * d, np.broadcast_to(d, np.broadcast_shapes(d.shape, s.shape[:-1] + (2,)))

        return path

    def chart_velocity(self, chart, p, v):
        return np.asarray(v, float)


@dataclass(frozen=True, eq=False)
class BundleScenario:
    """A principal bundle with connection, given by gauge potentials per chart.

    Every catalog potential has the form ``A = a(z) X`` for a real 1-form
    ``a`` and a fixed algebra direction ``X``:

    * ``flat``: ``a = 0``;
    * ``monopole``: ``a = n (x dy - y dx) / (1 + |z|^2)`` in both sphere charts,
      glued by ``g_north = exp(-n phi X) g_south`` (phi the azimuth);
    * ``constant``: ``a = c dx_1`` on the torus.
    """

    name: str
    base: object
    group: CompactGroup
    kind: str
    direction: np.ndarray = field(repr=False)
    charge: float = 0.0
    expected_holonomy: Optional[ClosedSubgroup] = None

    def __post_init__(self):
        if self.kind not in ("flat", "monopole", "constant"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        object.__setattr__(self, "direction", np.asarray(self.direction, float))

    def __repr__(self):
        return f"BundleScenario({self.name}: {self.base!r} x {self.group.tag}, {self.kind})"

    @property
    def charts(self):
        return tuple(range(len(self.base.chart_names)))

    @property
    def total_dim(self):
        return self.base.dim + self.group.dim

    # -- potentials -----------------------------------------------------------

    def _form(self, z):
        z = np.asarray(z, float)
        if self.kind == "flat":
            return np.zeros(z.shape)
        if self.kind == "constant":
            out = np.zeros(z.shape)
            out[..., 0] = self.charge
            return out
        r2 = np.sum(z**2, axis=-1, keepdims=True)
        return self.charge * np.concatenate([-z[..., 1:2], z[..., 0:1]], axis=-1) / (1 + r2)

    def _form_d(self, z):
        """Coefficient of dz1 ^ dz2 in d(a)."""
        z = np.asarray(z, float)
        if self.kind != "monopole":
            return np.zeros(z.shape[:-1])
        r2 = np.sum(z**2, axis=-1)
        return 2 * self.charge / (1 + r2) ** 2

    def potential(self, chart, z):
        """Components ``A(d/dz_1), A(d/dz_2)`` as coefficients, shape (..., 2, dim)."""
        return self._form(z)[..., :, None] * self.direction

    def gauge_potential(self, chart, z, w):
        """``A_z(w)`` as algebra coefficients."""
        a = np.sum(self._form(z) * np.asarray(w, float), axis=-1)
        return a[..., None] * self.direction

    def curvature(self, chart, z, v, w):
        """Local curvature ``F = dA + [A, A]/2`` evaluated on (v, w)."""
        v = np.asarray(v, float)
        w = np.asarray(w, float)
        area = v[..., 0] * w[..., 1] - v[..., 1] * w[..., 0]
        dA = (self._form_d(z) * area)[..., None] * self.direction
        return dA + self.group.bracket(self.gauge_potential(chart, z, v), self.gauge_potential(chart, z, w))

    def transition(self, to_chart, from_chart, z_from):
        """Clutching element t with ``g_to = t g_from`` at a base point."""
        z_from = np.asarray(z_from, float)
        batch = z_from.shape[:-1]
        to_chart = np.broadcast_to(np.asarray(to_chart), batch)
        from_chart = np.broadcast_to(np.asarray(from_chart), batch)
        if self.kind != "monopole":
            return self.group.identity(batch)
        phi = self.base.azimuth(from_chart, z_from)
        sign = np.where(to_chart == from_chart, 0.0, np.where(to_chart == NORTH, -1.0, 1.0))
        return self.group.exp((sign * self.charge * phi)[..., None] * self.direction)

    def transition_log_derivative(self, to_chart, from_chart, z_from, w_from):
        """``t^{-1} dt(w)`` for the clutching function, as coefficients."""
        z_from = np.asarray(z_from, float)
        batch = z_from.shape[:-1]
        if self.kind != "monopole":
            return np.zeros(batch + (self.group.dim,))
        to_chart = np.broadcast_to(np.asarray(to_chart), batch)
        from_chart = np.broadcast_to(np.asarray(from_chart), batch)
        dphi = np.sum(self.base.azimuth_differential(from_chart, z_from) * np.asarray(w_from, float), axis=-1)
        sign = np.where(to_chart == from_chart, 0.0, np.where(to_chart == NORTH, -1.0, 1.0))
        return (sign * self.charge * dphi)[..., None] * self.direction

    # -- points ---------------------------------------------------------------

    def point_at(self, p, fiber=None, chart=None):
        """Bundle point over the embedded base point p, in its home chart by default."""
        p = np.asarray(p, float)
        chart = int(self.base.home_chart(p)) if chart is None else int(chart)
        fiber = self.group.identity() if fiber is None else np.asarray(fiber)
        return BundlePoint(chart, self.base.to_chart(chart, p), fiber)

    def change_chart(self, point, chart):
        if chart == point.chart:
            return point
        z = self.base.switch_coords(point.z)
        t = self.transition(chart, point.chart, point.z)
        return BundlePoint(chart, z, t @ point.fiber)

    def change_chart_vector(self, v, chart):
        """Express a tangent vector in another chart."""
        if chart == v.at.chart:
            return v
        at = v.at
        w = self.base.switch_jacobian(at.z) @ v.base
        tlog = self.transition_log_derivative(chart, at.chart, at.z, v.base)
        xi = self.group.adjoint(self.group.inverse(at.fiber), tlog) + v.fiber
        return TangentVector(self.change_chart(at, chart), w, xi)

    def embed(self, point):
        return self.base.from_chart(point.chart, point.z)


@dataclass(frozen=True, eq=False)
class BundlePoint:
    chart: int
    z: np.ndarray
    fiber: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "z", np.asarray(self.z, float))
        object.__setattr__(self, "fiber", np.asarray(self.fiber))

    def right_translate(self, h):
        return BundlePoint(self.chart, self.z, self.fiber @ np.asarray(h))


@dataclass(frozen=True, eq=False)
class TangentVector:
    """Base velocity in chart coordinates plus fiber velocity ``g^{-1} dg``."""

    at: BundlePoint
    base: np.ndarray
    fiber: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, float))
        object.__setattr__(self, "fiber", np.asarray(self.fiber, float))

    def right_translate(self, group, h):
        """Push forward under ``R_h``: the fiber velocity becomes Ad(h^{-1}) xi."""
        return TangentVector(self.at.right_translate(h), self.base, group.adjoint(group.inverse(h), self.fiber))


def vertical_vector(scenario, point, xi):
    """Fundamental vector field generated by xi at a point."""
    return TangentVector(point, np.zeros(2), np.asarray(xi, float))


def connection_form(scenario, v):
    """``theta(v) = Ad(g^{-1}) A(w) + xi``."""
    g = v.at.fiber
    A = scenario.gauge_potential(v.at.chart, v.at.z, v.base)
    return scenario.group.adjoint(scenario.group.inverse(g), A) + v.fiber


def connection_form_batch(scenario, chart, z, g, w, xi):
    A = scenario.gauge_potential(chart, z, w)
    return scenario.group.adjoint(scenario.group.inverse(g), A) + xi


def curvature_form(scenario, point, v, w):
    """Curvature at a base point (chart coordinates) on two base vectors."""
    return scenario.curvature(point.chart, point.z, v, w)


def horizontal_projection(scenario, v):
    """Keep the base part; replace the fiber part by ``-Ad(g^{-1}) A(w)``."""
    g = v.at.fiber
    A = scenario.gauge_potential(v.at.chart, v.at.z, v.base)
    return TangentVector(v.at, v.base, -scenario.group.adjoint(scenario.group.inverse(g), A))


def orthonormal_frame(scenario, point):
    """A g_M-orthonormal base frame at a point, in chart coordinates."""
    lam = scenario.base.metric_factor(point.chart, point.z)
    return np.eye(2) / np.sqrt(lam)


DEFAULT_HOPF_CHARGE = 8.0


def catalog_scenarios(radius=1.0, hopf_charge=DEFAULT_HOPF_CHARGE, su2_charge=1.0,
                      periods=(2 * np.pi, 2 * np.pi), torus_coefficient=0.5, su2_direction=(0.0, 0.0, 1.0)):
    """The four built-in bundles with known holonomy.

    * FlatSphere: S^2 x U(1) with the trivial connection; holonomy trivial.
    * HopfLike: the U(1)-bundle over S^2 of monopole charge ``hopf_charge``
      (charge 1 is the Hopf bundle itself); holonomy U(1).
    * HalfTorus: T^2 x U(1) with ``A = (i/2) dx_1``; holonomy Z_2.
    * AbelianInSU2: S^2 x SU(2) with the charge ``su2_charge`` monopole
      potential along E_z; holonomy the circle through E_z.
    """
    u1 = CompactGroup.u1()
    su2 = CompactGroup.su2()
    sphere = Sphere2(radius)
    torus = Torus2(periods)
    return [
        BundleScenario("FlatSphere", sphere, u1, "flat", np.array([1.0]), 0.0, ClosedSubgroup.trivial()),
        BundleScenario("HopfLike", sphere, u1, "monopole", np.array([1.0]), float(hopf_charge),
                       ClosedSubgroup.full()),
        BundleScenario("HalfTorus", torus, u1, "constant", np.array([1.0]), float(torus_coefficient),
                       _torus_holonomy(torus, torus_coefficient)),
        BundleScenario("AbelianInSU2", sphere, su2, "monopole", np.asarray(su2_direction, float), float(su2_charge),
                       ClosedSubgroup.circle(su2_direction)),
    ]


def _torus_holonomy(torus, c):
    """Expected holonomy of the constant potential: generated by exp(-i c L_1)."""
    turns = c * torus.periods[0] / (2 * np.pi)
    for n in range(1, 65):
        if abs(n * turns - round(n * turns)) < 1e-9:
            return ClosedSubgroup.cyclic(n)
    return None


def get_scenario(name, **params):
    for s in catalog_scenarios(**params):
        if s.name == name:
            return s
    raise KeyError(f"unknown scenario {name!r}; choose from FlatSphere, HopfLike, HalfTorus, AbelianInSU2")


SCENARIO_NAMES = ("FlatSphere", "HopfLike", "HalfTorus", "AbelianInSU2")
