"""Finite metric spaces, nets and graph distances on bundles.

The bundle nets are product nets: a farthest-point net of the base times a
finite set of fiber labels.  Node ``(x, a)`` is the bundle point with fiber
``r(x) L[a]``, where ``r(x)`` is the horizontal transport of ``u`` along a
shortest-path tree of the base net.  With this labelling the point ``(x, a)``
is joined to ``u L[a]`` by a horizontal path, so the submersion onto the
quotient reads off the label directly.

Right multiplication by the fiber group is an isometry of every metric used
here, so when the labels are closed under a finite group only one source per
base point is needed for the shortest-path runs.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra, minimum_spanning_tree
from scipy.spatial import cKDTree

from .exceptions import DisconnectedNet, DomainTooSmall, SizeCapExceeded
from .geometry import Sphere2, Torus2
from .liegroup import binary_polyhedral_group, quotient_distance
from .transport import edge_transport

BRUTE_FORCE_CAP = 4


class FiniteMetricSpace:
    """Labelled distance matrix.

    Parameters
    ----------
    dist : array of shape (n, n)
        Symmetric, zero diagonal, finite.
    labels : list of str, optional
        Point identifiers; defaults to ``"0".."n-1"``.
    check : bool
        Validate the metric axioms on construction.
    """

    def __init__(self, dist, labels=None, check=True, tol=1e-9):
        dist = np.array(dist, dtype=float)
        if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
            raise ValueError("distance matrix must be square")
        self.dist = dist
        self.labels = [str(x) for x in labels] if labels is not None else [str(i) for i in range(len(dist))]
        if len(self.labels) != len(dist):
            raise ValueError("one label per point is required")
        if check:
            self.validate(tol)

    def __len__(self):
        return len(self.dist)

    def __repr__(self):
        return f"FiniteMetricSpace(n={len(self)}, diameter={self.diameter():.6g})"

    def validate(self, tol=1e-9):
        d = self.dist
        if not np.all(np.isfinite(d)):
            raise DisconnectedNet("distance matrix has infinite entries")
        if np.any(d < 0):
            raise ValueError("negative distance")
        if np.any(np.diag(d) != 0):
            raise ValueError("nonzero diagonal")
        if not np.array_equal(d, d.T):
            raise ValueError("distance matrix is not symmetric")
        if len(d) <= 400:
            viol = d[:, None, :] - d[:, :, None] - d[None, :, :]
            if np.max(viol, initial=0.0) > tol:
                raise ValueError("triangle inequality fails")

    def diameter(self):
        return float(self.dist.max(initial=0.0))

    # -- serialization --------------------------------------------------------

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.labels)
        for row in self.dist:
            w.writerow([repr(float(x)) for x in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source, check=True):
        """Read from a path or from CSV text."""
        text = source
        if "\n" not in str(source):
            with open(source, newline="") as fh:
                text = fh.read()
        rows = list(csv.reader(io.StringIO(text)))
        rows = [r for r in rows if r]
        labels, body = rows[0], rows[1:]
        if len(body) != len(labels) or any(len(r) != len(labels) for r in body):
            raise ValueError("CSV metric must be a header row plus a square matrix")
        return cls([[float(x) for x in r] for r in body], labels, check=check)

    def to_json(self, path=None):
        text = json.dumps({"labels": self.labels, "dist": self.dist.tolist()})
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, source, check=True):
        text = source
        if not str(source).lstrip().startswith("{"):
            with open(source) as fh:
                text = fh.read()
        obj = json.loads(text)
        return cls(obj["dist"], obj["labels"], check=check)


class Correspondence:
    """A relation between index sets of two finite spaces, surjective both ways."""

    def __init__(self, pairs, n_x, n_y):
        pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
        self.pairs = pairs
        self.n_x, self.n_y = int(n_x), int(n_y)
        if len(np.unique(pairs[:, 0])) != self.n_x or len(np.unique(pairs[:, 1])) != self.n_y:
            raise ValueError("every point of both spaces must appear in the correspondence")
        if pairs.min(initial=0) < 0 or pairs[:, 0].max() >= self.n_x or pairs[:, 1].max() >= self.n_y:
            raise ValueError("index out of range")

    def __len__(self):
        return len(self.pairs)

    @classmethod
    def from_map(cls, image, n_y):
        """Graph of a map X -> Y; uncovered Y points are paired with a nearest preimage by the caller."""
        image = np.asarray(image, dtype=int)
        return cls(np.stack([np.arange(len(image)), image], -1), len(image), n_y)

    @classmethod
    def identity(cls, n):
        return cls(np.stack([np.arange(n)] * 2, -1), n, n)

    @classmethod
    def total(cls, n_x, n_y):
        a, b = np.meshgrid(np.arange(n_x), np.arange(n_y), indexing="ij")
        return cls(np.stack([a.ravel(), b.ravel()], -1), n_x, n_y)


def diameter(X):
    return X.diameter()


def distortion(R, X, Y, block=2048):
    """Exact sup over pairs of related pairs of ``|d_X - d_Y|``."""
    i, j = R.pairs[:, 0], R.pairs[:, 1]
    worst = 0.0
    for s in range(0, len(i), block):
        dx = X.dist[i[s:s + block, None], i[None, :]]
        dy = Y.dist[j[s:s + block, None], j[None, :]]
        worst = max(worst, float(np.max(np.abs(dx - dy))))
    return worst


def gh_upper_bound(R, X, Y):
    return distortion(R, X, Y) / 2


def brute_force_gh(X, Y):
    """Exact GH distance by enumerating every correspondence (at most 4 points each)."""
    nx, ny = len(X), len(Y)
    if nx > BRUTE_FORCE_CAP or ny > BRUTE_FORCE_CAP:
        raise SizeCapExceeded(f"brute force is capped at {BRUTE_FORCE_CAP} points per space")
    cells = np.array(list(itertools.product(range(nx), range(ny))))
    c = len(cells)
    cost = np.abs(X.dist[cells[:, 0, None], cells[None, :, 0]] - Y.dist[cells[:, 1, None], cells[None, :, 1]])
    # tables over all subsets of cells, grown one top bit at a time
    size = 1 << c
    rowmax = np.zeros((c, size))
    dis = np.zeros(size)
    cover_x = np.zeros(size, dtype=np.int64)
    cover_y = np.zeros(size, dtype=np.int64)
    for b in range(c):
        lo, hi = 1 << b, 2 << b
        rowmax[:, lo:hi] = np.maximum(rowmax[:, :lo], cost[:, b, None])
        dis[lo:hi] = np.maximum(dis[:lo], rowmax[b, lo:hi])
        cover_x[lo:hi] = cover_x[:lo] | (1 << int(cells[b, 0]))
        cover_y[lo:hi] = cover_y[:lo] | (1 << int(cells[b, 1]))
    ok = (cover_x == (1 << nx) - 1) & (cover_y == (1 << ny) - 1)
    best = dis[ok].min()
    return float(best) / 2


# -- nets --------------------------------------------------------------------------


@dataclass
class NetConfig:
    """Resolution of the sampled nets.

    ``target_count`` is the number of base points and ``fiber_count`` the
    number of samples along each holonomy circle (``sheet_fiber_count``
    overrides it for the holonomy-bundle net).  ``connectivity_radius``
    (base distance) defaults to three times the farthest-point spacing.
    ``horizontal_step_length`` is the base arc-length step for transporting
    net edges.
    """

    target_count: int = 200
    connectivity_radius: Optional[float] = None
    seed: int = 0
    horizontal_step_length: float = 0.02
    fiber_count: int = 64
    fiber_group_order: int = 120
    radius_factor: float = 3.0
    sheet_fiber_count: Optional[int] = None
    drift_slope: float = 2.0

    def __post_init__(self):
        if self.target_count < 1 or self.fiber_count < 1:
            raise ValueError("net counts must be positive")
        if self.connectivity_radius is not None and self.connectivity_radius <= 0:
            raise ValueError("connectivity_radius must be positive")
        if self.horizontal_step_length <= 0 or self.radius_factor <= 0:
            raise ValueError("step length and radius factor must be positive")
        if self.drift_slope < 0:
            raise ValueError("drift_slope must be non-negative")


def sample_net(domain, cfg, start=None):
    """Farthest-point net of ``cfg.target_count`` points of a base manifold.

    The first point is ``start`` when given.  Raises DomainTooSmall when the
    points would come closer than a quarter of the connectivity radius.
    """
    rng = np.random.default_rng(cfg.seed)
    n = cfg.target_count
    pool = domain.sample(rng, max(20 * n, 2000))
    if start is not None:
        pool = np.concatenate([np.asarray(start, float)[None], pool])
    sep = cfg.connectivity_radius / 4 if cfg.connectivity_radius else 0.0
    chosen = [0]
    dmin = domain.distance(pool, pool[0])
    for _ in range(n - 1):
        j = int(np.argmax(dmin))
        if dmin[j] <= sep or dmin[j] == 0.0:
            raise DomainTooSmall(f"cannot place {n} points at separation {sep:.4g}")
        chosen.append(j)
        dmin = np.minimum(dmin, domain.distance(pool, pool[j]))
    return pool[chosen]


def fps_spacing(domain, points):
    """Smallest pairwise distance of a point set."""
    if len(points) < 2:
        return 0.0
    d = domain.distance(points[:, None], points[None, :])
    np.fill_diagonal(d, np.inf)
    return float(d.min())


def base_neighbor_pairs(base, points, radius):
    """Index pairs i < j with base distance at most radius."""
    if isinstance(base, Torus2):
        tree = cKDTree(base.kdtree_coords(points), boxsize=base.periods)
        pairs = tree.query_pairs(radius, output_type="ndarray")
    else:
        tree = cKDTree(points)
        pairs = tree.query_pairs(base.chord_radius(radius), output_type="ndarray")
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    d = base.distance(points[pairs[:, 0]], points[pairs[:, 1]])
    keep = d <= radius + 1e-12
    return pairs[keep], d[keep]


def _shortest_paths(n, rows, cols, weights, sources):
    rows, cols = np.minimum(rows, cols), np.maximum(rows, cols)
    key = rows.astype(np.int64) * n + cols
    order = np.lexsort((weights, key))
    key, weights = key[order], weights[order]
    first = np.ones(len(key), bool)
    first[1:] = key[1:] != key[:-1]
    # duplicate entries would be summed by the sparse constructor; keep the shortest
    key, weights = key[first], weights[first]
    graph = coo_matrix((weights, (key // n, key % n)), shape=(n, n)).tocsr()
    return dijkstra(graph, directed=False, indices=sources)


def riemannian_distance_matrix(scenario, points, metric, cfg, quad_points=8, labels=None):
    """All-pairs shortest paths over straight chart segments.

    Points within ``cfg.connectivity_radius`` (measured by segment length under
    ``metric``) are joined; the segment runs straight in the chart of its first
    endpoint with the fiber on the group geodesic, and its length is the
    composite midpoint rule for ``metric``.
    """
    group = scenario.group
    n = len(points)
    if n == 1:
        return FiniteMetricSpace(np.zeros((1, 1)), labels)
    radius = cfg.connectivity_radius or np.inf
    ia, ib = np.triu_indices(n, 1)
    pa = [points[i] for i in ia]
    pb = [points[j] for j in ib]
    pb = [scenario.change_chart(b, a.chart) for a, b in zip(pa, pb)]
    chart = np.array([a.chart for a in pa])
    za = np.stack([a.z for a in pa])
    zb = np.stack([b.z for b in pb])
    ga = np.stack([a.fiber for a in pa])
    gb = np.stack([b.fiber for b in pb])
    if isinstance(scenario.base, Torus2):
        dz = zb - za
        dz -= scenario.base.periods * np.round(dz / scenario.base.periods)
    else:
        dz = zb - za
    # fiber pairs on the cut locus have no unique segment; the graph routes around them
    ok = group.distance(ga, gb) < np.pi - 1e-6
    ia, ib, chart, za, dz, ga = ia[ok], ib[ok], chart[ok], za[ok], dz[ok], ga[ok]
    eta = group.log(group.inverse(ga) @ gb[ok])
    s = (np.arange(quad_points) + 0.5) / quad_points
    total = np.zeros(len(ia))
    for t in s:
        z = za + t * dz
        g = ga @ group.exp(t * eta)
        total += metric(chart, z, g, dz, eta)
    total /= quad_points
    keep = total <= radius
    D = _shortest_paths(n, ia[keep], ib[keep], total[keep], None)
    if not np.all(np.isfinite(D)):
        raise DisconnectedNet("Riemannian net is disconnected; raise connectivity_radius")
    D = np.minimum(D, D.T)
    np.fill_diagonal(D, 0.0)
    return FiniteMetricSpace(D, labels, check=False)


# -- product nets on bundles ---------------------------------------------------------


def _flat_coords(g):
    g = np.asarray(g)
    if np.iscomplexobj(g):
        return np.concatenate([g.real.reshape(len(g), -1), g.imag.reshape(len(g), -1)], axis=-1)
    return g.reshape(len(g), -1)


class LabelSet:
    """Fiber labels closed under ``left * labels * right``.

    ``left`` is a finite cyclic group inside the holonomy circle (commuting
    with every transport), ``right`` a finite subgroup of G; labels are the
    products ``left[i] @ right[j]``.
    """

    def __init__(self, group, left, right, tol=1e-8):
        self.group = group
        prods = (left[:, None] @ right[None, :]).reshape((-1,) + right.shape[1:])
        keep, li, ri = [], [], []
        tree_pts = _flat_coords(prods)
        tree = cKDTree(tree_pts)
        seen = np.full(len(prods), -1)
        for k in range(len(prods)):
            if seen[k] >= 0:
                continue
            near = tree.query_ball_point(tree_pts[k], tol)
            seen[near] = len(keep)
            keep.append(k)
        self.elements = prods[keep]
        self.left = left
        self.right = right
        self.left_index = np.array(keep) // len(right)
        self.right_index = np.array(keep) % len(right)
        self._tree = cKDTree(_flat_coords(self.elements))
        # largest nearest-neighbour gap, and the smallest radius joining all labels
        self.spacing = float(np.max(self._nn_distance())) if len(self.elements) > 1 else 0.0
        self.link_radius = self._mst_radius()

    def __len__(self):
        return len(self.elements)

    def _mst_radius(self):
        if len(self.elements) < 2:
            return 0.0
        d = self.group.distance(self.elements[:, None], self.elements[None, :])
        mst = minimum_spanning_tree(np.maximum(d, 1e-300))
        return float(mst.data.max())

    def _nn_distance(self):
        _, idx = self._tree.query(_flat_coords(self.elements), k=2)
        return self.group.distance(self.elements, self.elements[idx[:, 1]])

    def index(self, g, tol=1e-6):
        g = np.asarray(g)
        flat = _flat_coords(g.reshape((-1,) + g.shape[-2:]))
        d, idx = self._tree.query(flat)
        if np.max(d, initial=0.0) > tol:
            raise ValueError("element is not a label")
        return idx.reshape(g.shape[:-2])

    def within(self, g, radius):
        """Label indices within group distance ``radius`` of each element of g."""
        flat = _flat_coords(g)
        # chord length bounds geodesic distance from below
        cand = self._tree.query_ball_point(flat, 2.0 * np.sin(min(radius, np.pi) / 2) * np.sqrt(self.group.matrix_size) + 1e-9)
        return cand

    def nearest(self, g):
        _, idx = self._tree.query(_flat_coords(g))
        return idx


def fiber_labels(group, hol, cfg, mode):
    """Labels for a P-net (``mode='bundle'``) or a holonomy-sheet net (``mode='cc'``).

    ``hol`` is the holonomy group at the base point of the net.
    """
    if mode == "cc":
        count = cfg.sheet_fiber_count or cfg.fiber_count
        if hol.kind == "full":
            grid = group.finite_grid(count) if group.tag == "U1" else _group_grid(group, cfg)
        else:
            grid = hol.elements(group, count)
        return LabelSet(group, group.identity((1,)), grid)
    if group.tag == "U1":
        return LabelSet(group, group.identity((1,)), group.finite_grid(cfg.fiber_count))
    right = _group_grid(group, cfg)
    if hol is not None and hol.kind == "circle":
        left = hol.elements(group, cfg.fiber_count)
    else:
        left = group.identity((1,))
    return LabelSet(group, left, right)


def _group_grid(group, cfg):
    if group.tag == "U1":
        return group.finite_grid(cfg.fiber_count)
    if group.tag == "SU2":
        return binary_polyhedral_group(cfg.fiber_group_order)
    return group.finite_grid(cfg.fiber_group_order)


class BundleNet:
    """Symmetry-reduced product net on a principal bundle.

    Parameters
    ----------
    scenario : BundleScenario
    u : BundlePoint
        Base point of the construction; its base point is the first net point.
    labels : LabelSet
    cfg : NetConfig
    horizontal_only : bool
        Carnot-Caratheodory mode: edges are horizontal lifts only, landing on
        the nearest label (the snap error is recorded in ``rounding``).
    base_points : array, optional
        Reuse a base net instead of sampling one.
    """

    def __init__(self, scenario, u, labels, cfg, horizontal_only=False, base_points=None):
        self.scenario = scenario
        self.u = u
        self.labels = labels
        self.cfg = cfg
        self.horizontal_only = horizontal_only
        base = scenario.base
        x0 = scenario.embed(u)
        if base_points is None:
            base_points = sample_net(base, cfg, start=x0)
        self.points = np.asarray(base_points, float)
        m = len(self.points)
        if cfg.connectivity_radius:
            self.radius = float(cfg.connectivity_radius)
        else:
            self.radius = cfg.radius_factor * max(fps_spacing(base, self.points), 1e-12)
        self.charts = base.home_chart(self.points) if m else np.zeros(0, int)
        if isinstance(base, Sphere2):
            self.charts = np.asarray(self.charts, int)
        else:
            self.charts = np.zeros(m, int)
        self.edges, self.edge_length = base_neighbor_pairs(base, self.points, self.radius)
        if m > 1:
            n_comp, _ = connected_components(
                coo_matrix((np.ones(len(self.edges)), (self.edges[:, 0], self.edges[:, 1])), shape=(m, m)),
                directed=False)
            if n_comp > 1:
                raise DisconnectedNet(f"base net splits into {n_comp} pieces; raise connectivity_radius or net count")
        self._transport_edges()
        self._graph_factor = 1.0
        self._build_graph()

    # -- construction ---------------------------------------------------------

    def _transport_edges(self):
        s = self.scenario
        group = s.group
        m = len(self.points)
        e = self.edges
        if len(e):
            step = self.cfg.horizontal_step_length / max(float(self.edge_length.max()), 1e-12)
            U = edge_transport(s, self.points[e[:, 0]], self.points[e[:, 1]],
                               self.charts[e[:, 0]], self.charts[e[:, 1]], min(step, 0.5))
        else:
            U = group.identity((0,))
        # transports of u along the shortest-path tree
        tree_d, pred = dijkstra(
            coo_matrix((self.edge_length, (e[:, 0], e[:, 1])), shape=(m, m)).tocsr(),
            directed=False, indices=0, return_predecessors=True)
        lookup = {}
        for k, (a, b) in enumerate(e):
            lookup[(a, b)] = (k, False)
            lookup[(b, a)] = (k, True)
        u_fiber = self.u.fiber
        if self.charts[0] != self.u.chart:
            u_fiber = s.change_chart(self.u, int(self.charts[0])).fiber
        r = np.empty((m,) + u_fiber.shape, dtype=u_fiber.dtype)
        r[0] = u_fiber
        order = np.argsort(tree_d, kind="stable")
        for x in order[1:]:
            p = pred[x]
            k, flip = lookup[(p, x)]
            step_u = group.inverse(U[k]) if flip else U[k]
            r[x] = step_u @ r[p]
        self.tree_parent = pred
        self.tree_depth = tree_d
        self.fibers = r
        # k_xy = r(y)^{-1} U_xy r(x) for each edge x -> y
        self.edge_holonomy = group.inverse(r[e[:, 1]]) @ U @ r[e[:, 0]] if len(e) else U

    def _build_graph(self):
        group = self.scenario.group
        L = self.labels
        K = len(L)
        m = len(self.points)
        rows, cols, h_len, v_len, keep = [], [], [], [], []
        rounding = 0.0
        radius = L.spacing * 1.01
        slope = self.cfg.drift_slope * np.sqrt(self._graph_factor)
        for k, (x, y) in enumerate(self.edges):
            land = self.edge_holonomy[k] @ L.elements
            if self.horizontal_only:
                b = L.nearest(land)
                err = group.distance(land, L.elements[b])
                rounding = max(rounding, float(err.max()))
                a = np.arange(K)
                dv = np.zeros(K)
                near = np.ones(K, bool)
            else:
                r_k = max(radius, slope * self.edge_length[k])
                cand = L.within(land, r_k)
                nearest = L.nearest(land)
                a, b = [], []
                for ai, c in enumerate(cand):
                    c = set(c) | {int(nearest[ai])}
                    a.extend([ai] * len(c))
                    b.extend(c)
                a, b = np.array(a), np.array(b)
                dv = group.distance(land[a], L.elements[b])
                near = b == nearest[a]
                sel = (dv <= r_k + 1e-12) | near
                a, b, dv, near = a[sel], b[sel], dv[sel], near[sel]
            rows.append(x * K + a)
            cols.append(y * K + b)
            h_len.append(np.full(len(a), self.edge_length[k]))
            v_len.append(dv)
            keep.append(near)
        if not self.horizontal_only and K > 1:
            va, vb = [], []
            vr = max(1.5 * L.spacing, 1.05 * L.link_radius)
            cand = L.within(L.elements, vr)
            for a, c in enumerate(cand):
                for b in c:
                    if b > a:
                        va.append(a)
                        vb.append(b)
            va, vb = np.array(va, int), np.array(vb, int)
            dv = group.distance(L.elements[va], L.elements[vb])
            sel = dv <= vr + 1e-12
            va, vb, dv = va[sel], vb[sel], dv[sel]
            xs = np.arange(m)
            rows.append((xs[:, None] * K + va[None]).ravel())
            cols.append((xs[:, None] * K + vb[None]).ravel())
            h_len.append(np.zeros(m * len(va)))
            v_len.append(np.tile(dv, m))
            keep.append(np.ones(m * len(va), bool))
        if rows:
            self._rows = np.concatenate(rows)
            self._cols = np.concatenate(cols)
            self._h = np.concatenate(h_len)
            self._v = np.concatenate(v_len)
            self._keep = np.concatenate(keep)
        else:
            self._rows = self._cols = np.zeros(0, int)
            self._h = self._v = np.zeros(0)
            self._keep = np.zeros(0, bool)
        self.rounding = rounding
        self.node_count = m * K

    # -- distances ------------------------------------------------------------

    @property
    def fiber_spacing(self):
        return self.labels.spacing if len(self.labels) > 1 else 0.0

    def reduced_distances(self, horizontal_factor=1.0):
        """``D0[x, y, a]`` = distance from ``(x, e)`` to ``(y, L[a])``.

        Edge lengths are ``sqrt(horizontal_factor * L^2 + delta^2)`` for a base
        step of length L followed by a fiber drift delta; this is the exact
        length of the horizontal lift composed with a constant vertical drift.
        """
        m, K = len(self.points), len(self.labels)
        if horizontal_factor > self._graph_factor:
            self._graph_factor = float(horizontal_factor)
            self._build_graph()
        sel = self.edge_mask(horizontal_factor)
        w = np.sqrt(horizontal_factor * self._h[sel] ** 2 + self._v[sel] ** 2)
        # zero-length edges would vanish from the sparse graph
        w = np.maximum(w, 1e-300)
        e_idx = self.labels.index(self.scenario.group.identity())
        sources = np.arange(m) * K + int(e_idx)
        D = _shortest_paths(m * K, self._rows[sel], self._cols[sel], w, sources)
        D = D.reshape(m, m, K)
        D[np.arange(m), np.arange(m), int(e_idx)] = 0.0
        if not np.all(np.isfinite(D)):
            raise DisconnectedNet(
                "bundle net is disconnected; raise the net count, connectivity radius or fiber resolution")
        return D

    def edge_mask(self, horizontal_factor=1.0):
        """Edges used at this factor: drifts up to ``drift_slope * sqrt(factor) * L`` (at least one label gap)."""
        if self.horizontal_only:
            return np.ones(len(self._rows), bool)
        limit = np.maximum(self.labels.spacing * 1.01, self.cfg.drift_slope * np.sqrt(horizontal_factor) * self._h)
        return self._keep | (self._v <= limit + 1e-12)

    def pair_table(self):
        """``T[a, b]`` with ``D[(x,a),(y,b)] = D0[x, y, T[a, b]]``."""
        group = self.scenario.group
        L = self.labels
        lam_inv = group.inverse(L.left[L.left_index])
        s_inv = group.inverse(L.right[L.right_index])
        prod = lam_inv[:, None] @ L.elements[None, :] @ s_inv[:, None]
        return L.index(prod)

    def full_matrix(self, horizontal_factor=1.0, D0=None, cap=6000):
        """Expanded distance matrix over all nodes (small nets only)."""
        m, K = len(self.points), len(self.labels)
        if m * K > cap:
            raise SizeCapExceeded(f"full matrix of {m * K} nodes exceeds cap {cap}")
        if D0 is None:
            D0 = self.reduced_distances(horizontal_factor)
        T = self.pair_table()
        D = D0[:, :, T]  # (x, y, a, b)
        D = D.transpose(0, 2, 1, 3).reshape(m * K, m * K)
        D = np.minimum(D, D.T)
        np.fill_diagonal(D, 0.0)
        return D

    def node_points(self):
        """Bundle points of the net as (chart, z, fiber) arrays."""
        K = len(self.labels)
        z = self.scenario.base.to_chart(self.charts, self.points)
        fib = self.fibers[:, None] @ self.labels.elements[None]
        return np.repeat(self.charts, K), np.repeat(z, K, axis=0), fib.reshape((-1,) + fib.shape[2:])

    def label_quotient_distance(self, holonomy):
        """``q[a]`` = distance from ``L[a]`` to ``Hol_u`` (the coset distance to the identity coset)."""
        group = self.scenario.group
        return quotient_distance(group, holonomy, group.identity((len(self.labels),)), self.labels.elements)


def holonomy_sheet_net(scenario, u, holonomy, cfg, base_points=None):
    """Horizontal-only net on the holonomy bundle through u."""
    labels = fiber_labels(scenario.group, holonomy, cfg, "cc")
    return BundleNet(scenario, u, labels, cfg, horizontal_only=True, base_points=base_points)


def bundle_net(scenario, u, holonomy, cfg, base_points=None):
    labels = fiber_labels(scenario.group, holonomy, cfg, "bundle")
    return BundleNet(scenario, u, labels, cfg, horizontal_only=False, base_points=base_points)


def cc_distance_matrix(scenario, u, cfg, holonomy, cap=6000):
    """Carnot-Caratheodory distances on a net of the holonomy bundle through u."""
    net = holonomy_sheet_net(scenario, u, holonomy, cfg)
    D = net.full_matrix(1.0, cap=cap)
    labels = [f"x{x}h{a}" for x in range(len(net.points)) for a in range(len(net.labels))]
    return FiniteMetricSpace(D, labels, check=False)


def cc_diameter(scenario, u, cfg, holonomy, base_points=None):
    """Returns ``(kappa0, net)`` for the holonomy bundle through u."""
    net = holonomy_sheet_net(scenario, u, holonomy, cfg, base_points)
    D0 = net.reduced_distances(1.0)
    return float(D0.max()), net
