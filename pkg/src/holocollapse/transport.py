"""Horizontal lifts, parallel transport and holonomy estimation.

Curves are batched: a :class:`BaseCurve` carries a leading batch shape and
every segment evaluates all members at once, so transporting hundreds of
curves costs one RK4 loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .exceptions import IdentificationAmbiguous, StepRejected
from .geometry import BundlePoint, Sphere2, Torus2, orthonormal_frame
from .liegroup import ClosedSubgroup, algebra_span

PROJECT_EVERY = 100
# largest great-circle angle handled by one chart piece
_MAX_PIECE_ANGLE = 0.5


@dataclass(frozen=True, eq=False)
class Segment:
    """One chart piece of a curve, parametrized on [0, 1].

    ``path(s)`` returns chart coordinates and their s-derivative, each with
    shape ``batch + (2,)``.
    """

    chart: np.ndarray
    path: Callable

    def __post_init__(self):
        object.__setattr__(self, "chart", np.asarray(self.chart, dtype=int))


@dataclass(frozen=True, eq=False)
class BaseCurve:
    """Piecewise curve on a base manifold, possibly a batch of curves."""

    base: object
    segments: List[Segment]
    description: str = ""

    @property
    def batch_shape(self):
        return self.segments[0].chart.shape

    def start(self):
        seg = self.segments[0]
        return seg.chart, seg.path(np.zeros(seg.chart.shape))[0]

    def end(self):
        seg = self.segments[-1]
        return seg.chart, seg.path(np.ones(seg.chart.shape))[0]

    def __add__(self, other):
        return BaseCurve(self.base, list(self.segments) + list(other.segments),
                         f"{self.description}+{other.description}")

    def reversed(self):
        segs = []
        for seg in reversed(self.segments):
            segs.append(Segment(seg.chart, _reverse(seg.path)))
        return BaseCurve(self.base, segs, f"reverse({self.description})")

    def length(self, n=200):
        """g_M length by composite midpoint rule."""
        total = 0.0
        s = (np.arange(n) + 0.5) / n
        for seg in self.segments:
            shp = seg.chart.shape
            ss = np.broadcast_to(s.reshape((n,) + (1,) * len(shp)), (n,) + shp)
            z, dz = seg.path(ss)
            lam = self.base.metric_factor(seg.chart, z)
            total = total + np.mean(np.sqrt(lam * np.sum(dz**2, axis=-1)), axis=0)
        return total

    # -- constructors ----------------------------------------------------------

    @classmethod
    def geodesic(cls, base, p0, p1):
        """Shortest geodesic between embedded points (batched over leading axes)."""
        p0 = np.asarray(p0, float)
        p1 = np.asarray(p1, float)
        if isinstance(base, Torus2):
            z0 = base.to_chart(0, p0)
            d = base.displacement(p0, p1)
            batch = np.broadcast_shapes(z0.shape, d.shape)[:-1]
            return cls(base, [Segment(np.zeros(batch, int), _line(z0, d))], "geodesic")
        p0, p1 = np.broadcast_arrays(p0, p1)
        angle = np.max(base.distance(p0, p1)) / base.radius if p0.size else 0.0
        pieces = max(1, int(np.ceil(angle / _MAX_PIECE_ANGLE)))
        arc = base.geodesic(p0, p1)
        segs = []
        for k in range(pieces):
            a, b = k / pieces, (k + 1) / pieces
            mid, _ = arc(np.full(p0.shape[:-1], (a + b) / 2))
            chart = base.home_chart(mid)
            segs.append(Segment(chart, _sphere_piece(base, arc, chart, a, b)))
        return cls(base, segs, "geodesic")

    @classmethod
    def polyline(cls, base, points, closed=False):
        """Concatenated geodesics through embedded points (batch axis first is the vertex index)."""
        pts = [np.asarray(p, float) for p in points]
        if closed:
            pts.append(pts[0])
        curve = cls.geodesic(base, pts[0], pts[1])
        for a, b in zip(pts[1:-1], pts[2:]):
            curve = curve + cls.geodesic(base, a, b)
        curve = BaseCurve(base, curve.segments, "closed polyline" if closed else "polyline")
        return curve

    @classmethod
    def chart_rectangle(cls, base, chart, corner, sides):
        """Counter-clockwise coordinate rectangle in one chart, starting at corner."""
        corner = np.asarray(corner, float)
        sides = np.asarray(sides, float)
        batch = np.broadcast_shapes(corner.shape, sides.shape)[:-1]
        chart = np.broadcast_to(np.asarray(chart, int), batch)
        zero = np.zeros(sides.shape[:-1])
        ex = np.stack([sides[..., 0], zero], -1)
        ey = np.stack([zero, sides[..., 1]], -1)
        verts = [corner, corner + ex, corner + ex + ey, corner + ey]
        segs = []
        for k in range(4):
            a, b = verts[k], verts[(k + 1) % 4]
            segs.append(Segment(chart, _line(a, b - a)))
        return cls(base, segs, "rectangle")

    @classmethod
    def winding_loop(cls, base, p0, winding):
        """Straight closed loop on the torus with the given winding numbers."""
        if not isinstance(base, Torus2):
            raise ValueError("winding loops need a torus base")
        z0 = base.to_chart(0, p0)
        d = np.asarray(winding, float) * base.periods
        batch = np.broadcast_shapes(z0.shape, d.shape)[:-1]
        return cls(base, [Segment(np.zeros(batch, int), _line(z0, d))], f"winding{tuple(np.asarray(winding).tolist())}")

    @classmethod
    def constant(cls, base, p0):
        chart = base.home_chart(p0)
        z0 = base.to_chart(chart, p0)
        return cls(base, [Segment(chart, _line(z0, np.zeros_like(z0)))], "constant")


def _line(z0, d):
    z0 = np.asarray(z0, float)
    d = np.asarray(d, float)

    def path(s):
        s = np.asarray(s, float)[..., None]
        return z0 + s * d, np.broadcast_to(d, np.broadcast_shapes(d.shape, s.shape))

    return path


def _reverse(path):
    def rev(s):
        z, dz = path(1.0 - np.asarray(s, float))
        return z, -dz

    return rev


def _sphere_piece(base, arc, chart, a, b):
    def path(s):
        t = a + (b - a) * np.asarray(s, float)
        p, v = arc(t)
        return base.to_chart(chart, p), base.chart_velocity(chart, p, v * (b - a))

    return path


# -- integration ----------------------------------------------------------------


def _check_domain(scenario, chart, z):
    if not np.all(scenario.base.in_domain(chart, z)):
        raise StepRejected("curve leaves the chart domain; refine the curve segments")


def _rk4_segment(scenario, seg, g, nsteps, keep=False):
    """Integrate dg/ds = -A(z'(s)) g along one segment."""
    group = scenario.group
    h = 1.0 / nsteps
    batch = seg.chart.shape

    def gen(s):
        z, dz = seg.path(np.full(batch, s))
        return -group.hat(scenario.gauge_potential(seg.chart, z, dz))

    out = [g] if keep else None
    a0 = gen(0.0)
    for k in range(nsteps):
        s = k * h
        am, a1 = gen(s + h / 2), gen(s + h)
        k1 = a0 @ g
        k2 = am @ (g + (h / 2) * k1)
        k3 = am @ (g + (h / 2) * k2)
        k4 = a1 @ (g + h * k3)
        g = g + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        a0 = a1
        if (k + 1) % PROJECT_EVERY == 0:
            g = group.project(g)
        if keep:
            out.append(g)
    return g, out


def _steps(step):
    if step <= 0:
        raise ValueError("step must be positive")
    return max(1, int(np.ceil(1.0 / step - 1e-9)))


def transport_matrix(scenario, curve, step=1e-3):
    """Left factor U with transported fiber ``U g`` (expressed in the end chart)."""
    group = scenario.group
    batch = curve.batch_shape
    U = group.identity(batch)
    chart = curve.segments[0].chart
    nsteps = _steps(step)
    flat = scenario.kind == "flat"
    for seg in curve.segments:
        z0, _ = seg.path(np.zeros(batch))
        _check_domain(scenario, seg.chart, z0)
        if np.any(seg.chart != chart):
            moved = (seg.chart != chart)[..., None]
            zprev = scenario.base.switch_coords(np.where(moved, z0, 1.0))
            U = scenario.transition(seg.chart, chart, zprev) @ U
        z1, _ = seg.path(np.ones(batch))
        _check_domain(scenario, seg.chart, z1)
        _check_domain(scenario, seg.chart, seg.path(np.full(batch, 0.5))[0])
        if not flat:
            U, _ = _rk4_segment(scenario, seg, U, nsteps)
        chart = seg.chart
    return group.project(U), chart


def horizontal_lift(scenario, curve, start, step=1e-3):
    """Horizontal lift of a single curve starting at a bundle point.

    Returns the list of lifted bundle points at every integration node.
    """
    group = scenario.group
    if curve.batch_shape != ():
        raise ValueError("horizontal_lift takes a single curve; use transport_matrix for batches")
    c0, z0 = curve.start()
    point = start
    if int(c0) != point.chart:
        point = scenario.change_chart(point, int(c0))
    if np.linalg.norm(point.z - z0) > 1e-8:
        raise ValueError("start point does not lie over the curve start")
    g = point.fiber
    chart = int(c0)
    nsteps = _steps(step)
    lifted = []
    for seg in curve.segments:
        c = int(seg.chart)
        zs, _ = seg.path(np.linspace(0.0, 1.0, nsteps + 1))
        _check_domain(scenario, c, zs)
        if c != chart:
            g = scenario.transition(c, chart, scenario.base.switch_coords(zs[0])) @ g
            chart = c
        _, nodes = _rk4_segment(scenario, seg, g, nsteps, keep=True)
        g = group.project(nodes[-1])
        lifted.extend(BundlePoint(c, zs[k], nodes[k]) for k in range(len(nodes) - (0 if seg is curve.segments[-1] else 1)))
    return lifted


@dataclass(frozen=True, eq=False)
class ParallelTransport:
    """Fiber map g -> U g between the fibers over a curve's endpoints."""

    group: object
    matrix: np.ndarray
    start_chart: int
    end_chart: int

    def __call__(self, g):
        return self.matrix @ np.asarray(g)

    def then(self, other):
        return ParallelTransport(self.group, other.matrix @ self.matrix, self.start_chart, other.end_chart)


def parallel_transport(scenario, curve, step=1e-3):
    U, chart = transport_matrix(scenario, curve, step)
    c0 = curve.segments[0].chart
    return ParallelTransport(scenario.group, U, int(c0) if c0.ndim == 0 else c0, int(chart) if chart.ndim == 0 else chart)


def transport_point(scenario, curve, point, step=1e-3):
    """End point of the horizontal lift of a single curve through point."""
    c0, _ = curve.start()
    if int(c0) != point.chart:
        point = scenario.change_chart(point, int(c0))
    U, chart = transport_matrix(scenario, curve, step)
    c1, z1 = curve.end()
    return BundlePoint(int(chart), z1, U @ point.fiber)


# -- holonomy ---------------------------------------------------------------------


@dataclass
class LoopConfig:
    """Which loops to generate at a base point.

    kinds: any of ``rectangle`` (coordinate squares of side up to ``size``),
    ``triangle`` (geodesic triangles with vertices within ``size``) and
    ``winding`` (torus loops with windings up to ``max_winding``).
    """

    kinds: tuple = ("rectangle", "triangle", "winding")
    size: float = 0.5
    max_winding: int = 2


def _holonomy_of_loops(scenario, u, curve, step):
    """Holonomy elements h with u ~ u h for a batch of loops based at pi(u)."""
    group = scenario.group
    c0 = curve.segments[0].chart
    batch = curve.batch_shape
    z_start, _ = curve.segments[0].path(np.zeros(batch))
    g_start = np.broadcast_to(u.fiber, batch + u.fiber.shape)
    if np.any(c0 != u.chart):
        t = scenario.transition(c0, np.full(batch, u.chart), np.broadcast_to(u.z, batch + (2,)))
        g_start = t @ g_start
    U, c1 = transport_matrix(scenario, curve, step)
    g_end = U @ g_start
    z_end, _ = curve.segments[-1].path(np.ones(batch))
    if np.any(c1 != u.chart):
        t = scenario.transition(np.full(batch, u.chart), c1, z_end)
        g_end = t @ g_end
    return group.inverse(np.broadcast_to(u.fiber, g_end.shape)) @ g_end


def loop_holonomy_sample(scenario, u, loops=None, count=20, seed=0, step=1e-3):
    """Holonomies of seeded random loops based at pi(u).

    Returns ``(descriptions, elements)``; ``u`` is joined to ``u h`` by the
    horizontal lift of the corresponding loop.
    """
    loops = loops or LoopConfig()
    rng = np.random.default_rng(seed)
    base = scenario.base
    x0 = scenario.embed(u)
    kinds = [k for k in loops.kinds if not (k == "winding" and not isinstance(base, Torus2))]
    if not kinds:
        raise ValueError("no applicable loop kinds for this base")
    per = np.bincount(np.arange(count) % len(kinds), minlength=len(kinds))
    descr, out = [], []
    for kind, n in zip(kinds, per):
        if n == 0:
            continue
        if kind == "rectangle":
            sides = rng.uniform(-loops.size, loops.size, size=(n, 2))
            curve = BaseCurve.chart_rectangle(base, u.chart, np.broadcast_to(u.z, (n, 2)), sides)
            labels = [f"rectangle sides=({a:.6g},{b:.6g}) chart={u.chart}" for a, b in sides]
        elif kind == "triangle":
            p1 = _random_nearby(base, rng, x0, loops.size, n)
            p2 = _random_nearby(base, rng, x0, loops.size, n)
            pts0 = np.broadcast_to(x0, p1.shape)
            curve = BaseCurve.polyline(base, [pts0, p1, p2], closed=True)
            labels = ["triangle " + np.array2string(np.stack([a, b]), precision=6) for a, b in zip(p1, p2)]
        else:
            w = rng.integers(-loops.max_winding, loops.max_winding + 1, size=(n, 2))
            # the generators of the fundamental group come first
            w[: min(n, 2)] = np.eye(2, dtype=int)[: min(n, 2)]
            curve = BaseCurve.winding_loop(base, np.broadcast_to(x0, (n, 2)), w)
            labels = [f"winding ({a},{b})" for a, b in w]
        out.append(_holonomy_of_loops(scenario, u, curve, step))
        descr.extend(labels)
    return descr, np.concatenate(out, axis=0)


def _random_nearby(base, rng, x0, radius, n):
    if isinstance(base, Torus2):
        return x0 + rng.uniform(-radius, radius, size=(n, 2))
    # tangent offset then exponential map
    x0 = np.asarray(x0, float)
    u = x0 / base.radius
    v = rng.normal(size=(n, 3))
    v -= np.outer(v @ u, u)
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    ang = rng.uniform(0.2, 1.0, size=(n, 1)) * radius / base.radius
    return base.radius * (np.cos(ang) * u + np.sin(ang) * v)


@dataclass
class HolonomyReport:
    """Estimated holonomy group at a base point."""

    scenario: str
    samples: list
    elements: np.ndarray = field(repr=False)
    algebra_rank: int
    algebra_basis: np.ndarray
    identified: ClosedSubgroup
    residual: float
    curvature_samples: int = 0
    normalization: str = ""

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "identifiedSubgroup": self.identified.name,
            "algebraRank": int(self.algebra_rank),
            "algebraBasis": self.algebra_basis.tolist(),
            "residual": float(self.residual),
            "curvatureSamples": int(self.curvature_samples),
            "normalization": self.normalization,
            "samples": [
                {"loop": d, "element": _element_json(g)} for d, g in zip(self.samples, self.elements)
            ],
        }


def _element_json(g):
    g = np.asarray(g)
    if np.iscomplexobj(g):
        return {"re": g.real.tolist(), "im": g.imag.tolist()}
    return {"re": g.tolist()}


def transported_curvature(scenario, u, targets, step=1e-3):
    """``Ad(g_v^{-1}) F`` at the ends of geodesics from pi(u) to each target.

    These are the curvature values of the holonomy bundle through u, in the
    Lie algebra of ``Hol_u``.
    """
    group = scenario.group
    n = len(targets)
    x0 = np.broadcast_to(scenario.embed(u), targets.shape)
    curve = BaseCurve.geodesic(scenario.base, x0, targets)
    c0 = curve.segments[0].chart
    g0 = np.broadcast_to(u.fiber, (n,) + u.fiber.shape)
    if np.any(c0 != u.chart):
        t = scenario.transition(c0, np.full(n, u.chart), np.broadcast_to(u.z, (n, 2)))
        g0 = t @ g0
    U, c1 = transport_matrix(scenario, curve, step)
    gv = U @ g0
    z1, _ = curve.segments[-1].path(np.ones(n))
    lam = scenario.base.metric_factor(c1, z1)
    e1 = np.stack([1 / np.sqrt(lam), np.zeros(n)], -1)
    e2 = np.stack([np.zeros(n), 1 / np.sqrt(lam)], -1)
    F = scenario.curvature(c1, z1, e1, e2)
    return group.adjoint(group.inverse(gv), F)


def _discrete_part(group, elements, rank_basis, tol):
    """Smallest catalog subgroup with the given identity component containing the samples."""
    if rank_basis.shape[0] == 0:
        cands = [ClosedSubgroup.trivial()]
        direction = None
        far = [g for g in elements if group.distance(group.identity(), g) > tol]
        if far:
            try:
                direction = group.log(far[0])
            except Exception:
                direction = None
            if direction is not None:
                direction = direction / group.norm(direction)
            for n in range(2, 65):
                cands.append(ClosedSubgroup.cyclic(n, direction))
    elif rank_basis.shape[0] == group.dim:
        cands = [ClosedSubgroup.full()]
    elif rank_basis.shape[0] == 1:
        cands = [ClosedSubgroup.circle(rank_basis[0])]
    else:
        raise IdentificationAmbiguous(f"no catalog subgroup has a {rank_basis.shape[0]}-dimensional algebra")
    fits = []
    for H in cands:
        res = max((H.distance_to(group, g) for g in elements), default=0.0)
        if res < tol:
            fits.append((H, res))
    if not fits:
        raise IdentificationAmbiguous("loop holonomies fit no catalog subgroup")
    # nested cyclic groups Z_n < Z_{kn} always both fit: the smallest is the answer
    H, res = fits[0]
    for other, _ in fits[1:]:
        if other.kind == "cyclic" and H.kind == "cyclic" and other.order % H.order:
            raise IdentificationAmbiguous(f"loop holonomies fit both {H.name} and {other.name}")
    return H, res


def ambrose_singer_estimate(scenario, u=None, sample_count=200, seed=0, step=1e-3, loops=None,
                            loop_count=20, rel_tol=1e-8, fit_tol=1e-5):
    """Estimate ``Hol_u`` from transported curvature and loop holonomies."""
    group = scenario.group
    if sample_count < 1:
        raise ValueError("sample_count must be at least 1")
    if u is None:
        u = default_base_point(scenario)
    rng = np.random.default_rng(seed)
    targets = scenario.base.sample(rng, sample_count)
    curv = transported_curvature(scenario, u, targets, step)
    rank, basis = algebra_span(group, curv, rel_tol)
    loose, _ = algebra_span(group, curv, rel_tol * 1e3)
    if loose != rank:
        raise IdentificationAmbiguous(f"curvature span rank is {loose} or {rank} depending on tolerance")
    descr, elems = loop_holonomy_sample(scenario, u, loops, loop_count, seed + 1, step)
    H, res = _discrete_part(group, elems, basis, fit_tol)
    return HolonomyReport(scenario.name, descr, elems, rank, basis, H, float(res), sample_count,
                          group.normalization)


def controllability_check(scenario, u, report):
    """True iff horizontal and holonomy directions span the whole tangent space."""
    dim_p = scenario.base.dim + scenario.group.dim
    return bool(scenario.base.dim + report.algebra_rank == dim_p and report.identified.kind == "full")


def default_base_point(scenario):
    """The bundle point over a fixed base point with identity fiber."""
    base = scenario.base
    if isinstance(base, Sphere2):
        p = base.radius * np.array([np.sin(0.7) * np.cos(0.3), np.sin(0.7) * np.sin(0.3), np.cos(0.7)])
    else:
        p = 0.25 * base.periods
    return scenario.point_at(p)


def edge_transport(scenario, p0, p1, chart0, chart1, step=1e-3):
    """Transport factors along geodesics p0 -> p1 between fixed node charts.

    ``U @ g`` is the transported fiber in ``chart1`` when ``g`` is given in
    ``chart0``.  Batched over the leading axis.
    """
    base = scenario.base
    curve = BaseCurve.geodesic(base, p0, p1)
    cs, _ = curve.start()
    t0 = scenario.transition(cs, chart0, base.to_chart(chart0, p0))
    U, ce = transport_matrix(scenario, curve, step)
    t1 = scenario.transition(chart1, ce, base.to_chart(ce, p1))
    return t1 @ U @ t0
