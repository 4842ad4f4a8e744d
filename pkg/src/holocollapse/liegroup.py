"""Compact matrix Lie groups with a fixed bi-invariant inner product.

Group elements are plain numpy matrices (stacked along leading axes), and
algebra elements are real coefficient vectors in an orthonormal basis.  The
inner product is ``<X, Y> = -scale * Re tr(XY)`` with ``scale`` picked per
group so that the listed basis is orthonormal:

* ``U1``: basis ``[[i]]``, scale 1, so U(1) is the unit circle.
* ``Torus(k)``: ``i * e_jj``, scale 1.
* ``SU2``: ``i * sigma_x, i * sigma_y, i * sigma_z``, scale 1/2, so SU(2) is the
  unit 3-sphere and ``d(I, -I) = pi``.
* ``SO3``: the standard rotation generators, scale 1/2, so ``d`` is the
  rotation angle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import CutLocusAmbiguous, SamplerTooCoarse

_SIGMA = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

_SO3_BASIS = np.array(
    [
        [[0, 0, 0], [0, 0, -1], [0, 1, 0]],
        [[0, 0, 1], [0, 0, 0], [-1, 0, 0]],
        [[0, -1, 0], [1, 0, 0], [0, 0, 0]],
    ],
    dtype=float,
)

CUT_LOCUS_TOL = 1e-8


def _dagger(g):
    return np.conj(np.swapaxes(g, -1, -2))


@dataclass(frozen=True, eq=False)
class CompactGroup:
    """A compact matrix group together with its bi-invariant inner product."""

    tag: str
    matrix_size: int
    basis: np.ndarray = field(repr=False)
    scale: float

    @classmethod
    def u1(cls):
        return cls("U1", 1, np.array([[[1j]]]), 1.0)

    @classmethod
    def torus(cls, k):
        basis = np.zeros((k, k, k), dtype=complex)
        for j in range(k):
            basis[j, j, j] = 1j
        return cls(f"Torus({k})", k, basis, 1.0)

    @classmethod
    def su2(cls):
        return cls("SU2", 2, 1j * _SIGMA, 0.5)

    @classmethod
    def so3(cls):
        return cls("SO3", 3, _SO3_BASIS.copy(), 0.5)

    @classmethod
    def from_tag(cls, tag):
        tag = tag.strip()
        if tag == "U1":
            return cls.u1()
        if tag == "SU2":
            return cls.su2()
        if tag == "SO3":
            return cls.so3()
        if tag.startswith("Torus(") and tag.endswith(")"):
            return cls.torus(int(tag[6:-1]))
        raise ValueError(f"unknown group tag {tag!r}")

    @property
    def dim(self):
        return self.basis.shape[0]

    @property
    def is_abelian(self):
        return self.tag == "U1" or self.tag.startswith("Torus")

    @property
    def dtype(self):
        return self.basis.dtype

    @property
    def normalization(self):
        return f"<X,Y> = -{self.scale:g} Re tr(XY)"

    def __repr__(self):
        return f"CompactGroup({self.tag})"

    # -- algebra -------------------------------------------------------------

    def hat(self, coeffs):
        """Coefficient vectors ``(..., dim)`` to matrices ``(..., n, n)``."""
        coeffs = np.asarray(coeffs, dtype=float)
        return np.einsum("...k,kij->...ij", coeffs, self.basis)

    def vee(self, X):
        """Matrices to coefficients; the basis is orthonormal so this is <X, B_k>."""
        X = np.asarray(X)
        tr = np.einsum("...ij,kji->...k", X, self.basis)
        return -self.scale * np.real(tr)

    def inner(self, a, b):
        return np.sum(np.asarray(a, float) * np.asarray(b, float), axis=-1)

    def norm(self, a):
        return np.sqrt(self.inner(a, a))

    def bracket(self, a, b):
        X, Y = self.hat(a), self.hat(b)
        return self.vee(X @ Y - Y @ X)

    def adjoint(self, g, a):
        """``Ad(g) X = g X g^{-1}`` in coefficients."""
        if self.is_abelian:
            a = np.asarray(a, float)
            shape = np.broadcast_shapes(a.shape, np.shape(g)[:-2] + (self.dim,))
            return np.broadcast_to(a, shape).copy()
        g = np.asarray(g)
        return self.vee(g @ self.hat(a) @ _dagger(g))

    # -- group ---------------------------------------------------------------

    def identity(self, shape=()):
        eye = np.eye(self.matrix_size, dtype=self.dtype)
        return np.broadcast_to(eye, tuple(shape) + eye.shape).copy()

    def inverse(self, g):
        return _dagger(np.asarray(g))

    def exp(self, a):
        """Matrix exponential of ``hat(a)`` via closed forms."""
        a = np.asarray(a, dtype=float)
        if self.is_abelian:
            phase = np.exp(1j * a)
            out = np.zeros(a.shape[:-1] + (self.matrix_size, self.matrix_size), dtype=complex)
            idx = np.arange(self.matrix_size)
            out[..., idx, idx] = phase
            return out
        theta = np.linalg.norm(a, axis=-1)[..., None, None]
        X = self.hat(a)
        if self.tag == "SU2":
            return np.cos(theta) * self.identity(a.shape[:-1]) + np.sinc(theta / np.pi) * X
        # SO3: Rodrigues
        small = theta < 1e-6
        safe = np.where(small, 1.0, theta)
        c1 = np.where(small, 1.0 - theta**2 / 6.0, np.sin(safe) / safe)
        c2 = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(safe)) / safe**2)
        return self.identity(a.shape[:-1]) + c1 * X + c2 * (X @ X)

    def _angle_axis(self, g):
        """Rotation angle in [0, pi] and the unnormalized sin-weighted axis."""
        g = np.asarray(g)
        if self.tag == "SU2":
            s = np.stack([np.imag(g[..., 1, 0]), -np.real(g[..., 1, 0]), np.imag(g[..., 0, 0])], axis=-1)
            c = np.real(g[..., 0, 0] + g[..., 1, 1]) / 2.0
        else:
            s = 0.5 * np.stack(
                [g[..., 2, 1] - g[..., 1, 2], g[..., 0, 2] - g[..., 2, 0], g[..., 1, 0] - g[..., 0, 1]],
                axis=-1,
            )
            s = np.real(s)
            c = (np.real(np.trace(g, axis1=-2, axis2=-1)) - 1.0) / 2.0
        sin = np.linalg.norm(s, axis=-1)
        return np.arctan2(sin, c), s, sin

    def log(self, g, tol=CUT_LOCUS_TOL):
        """Principal logarithm as coefficients.

        Raises CutLocusAmbiguous when the element sits on the cut locus
        (e.g. -1 in U1, -I in SU2, half-turns in SO3).
        """
        g = np.asarray(g)
        if self.is_abelian:
            theta = np.angle(np.diagonal(g, axis1=-2, axis2=-1))
            if np.any(np.pi - np.abs(theta) < tol):
                raise CutLocusAmbiguous("element has an eigenvalue -1; log branch is ambiguous")
            return theta
        alpha, s, sin = self._angle_axis(g)
        if np.any(np.pi - alpha < tol):
            raise CutLocusAmbiguous("rotation by pi; log branch is ambiguous")
        factor = np.where(sin > 0, alpha / np.where(sin > 0, sin, 1.0), 1.0)
        return factor[..., None] * s

    def distance(self, a, b):
        """Bi-invariant geodesic distance, vectorized over leading axes."""
        m = _dagger(np.asarray(a)) @ np.asarray(b)
        if self.is_abelian:
            theta = np.angle(np.diagonal(m, axis1=-2, axis2=-1))
            return np.sqrt(self.scale * np.sum(theta**2, axis=-1))
        alpha, _, _ = self._angle_axis(m)
        return alpha

    def random(self, rng, size=()):
        """Haar-distributed elements."""
        size = (size,) if np.isscalar(size) else tuple(size)
        if self.is_abelian:
            return self.exp(rng.uniform(-np.pi, np.pi, size + (self.dim,)))
        q = rng.normal(size=size + (4,))
        q /= np.linalg.norm(q, axis=-1, keepdims=True)
        su2 = _quaternion_to_su2(q)
        if self.tag == "SU2":
            return su2
        return su2_to_so3(su2)

    def random_algebra(self, rng, size=(), max_norm=1.0):
        size = (size,) if np.isscalar(size) else tuple(size)
        v = rng.normal(size=size + (self.dim,))
        v /= np.linalg.norm(v, axis=-1, keepdims=True)
        r = max_norm * rng.uniform(0, 1, size + (1,)) ** (1.0 / self.dim)
        return v * r

    def defect(self, g):
        """Unitarity and determinant defect of a (stack of) matrices."""
        g = np.asarray(g)
        unit = np.linalg.norm(g @ _dagger(g) - self.identity(), axis=(-2, -1))
        if self.is_abelian:
            return unit
        return np.maximum(unit, np.abs(np.linalg.det(g) - 1.0))

    def project(self, g):
        """Nearest group element by polar decomposition."""
        u, _, vh = np.linalg.svd(np.asarray(g))
        out = u @ vh
        if not self.is_abelian:
            det = np.linalg.det(out)
            if self.tag == "SU2":
                out = out / np.sqrt(det)[..., None, None]
        return out

    def finite_grid(self, size):
        """A finite subgroup used as a uniform fiber net.

        U1 uses the cyclic group of the requested order; the torus a product of
        cyclic groups; SU2 the binary tetrahedral/octahedral/icosahedral group
        (24/48/120) closest to ``size``; SO3 the matching rotation group.
        """
        if self.tag == "U1":
            return self.exp(2 * np.pi * np.arange(size)[:, None] / size)
        if self.is_abelian:
            m = max(1, int(round(size ** (1.0 / self.dim))))
            grids = np.meshgrid(*[np.arange(m)] * self.dim, indexing="ij")
            angles = 2 * np.pi * np.stack([x.ravel() for x in grids], axis=-1) / m
            return self.exp(angles)
        order = min((24, 48, 120), key=lambda n: abs(n - (size if self.tag == "SU2" else 2 * size)))
        q = binary_polyhedral_group(order)
        if self.tag == "SU2":
            return q
        return _dedupe(self, su2_to_so3(q))


def _quaternion_to_su2(q):
    """Unit quaternions to SU(2) via 1, i, j, k -> I, i sx, i sy, -i sz."""
    a, b, c, d = np.moveaxis(np.asarray(q, float), -1, 0)
    out = np.empty(a.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = a - 1j * d
    out[..., 0, 1] = 1j * b + c
    out[..., 1, 0] = 1j * b - c
    out[..., 1, 1] = a + 1j * d
    return out


def su2_to_so3(g):
    """Adjoint representation of SU(2) written in the basis i*sigma."""
    su2 = CompactGroup.su2()
    cols = [su2.adjoint(g, e) for e in np.eye(3)]
    return np.stack(cols, axis=-1)


def _dedupe(group, elems, tol=1e-8):
    keep = []
    for g in elems:
        if not keep or np.min(group.distance(np.stack(keep), g)) > tol:
            keep.append(g)
    return np.stack(keep)


def generate_group(group, generators, max_size=500, tol=1e-8):
    """Closure of a finite set of elements under multiplication."""
    elems = [group.identity()]
    frontier = [group.identity()]
    gens = [np.asarray(x) for x in generators]
    while frontier:
        new = []
        for g in frontier:
            for s in gens:
                h = g @ s
                if np.min(group.distance(np.stack(elems), h)) > tol:
                    elems.append(h)
                    new.append(h)
        if len(elems) > max_size:
            raise ValueError("generators do not close within max_size elements")
        frontier = new
    return np.stack(elems)


def binary_polyhedral_group(order):
    """The binary tetrahedral (24), octahedral (48) or icosahedral (120) group."""
    su2 = CompactGroup.su2()
    phi = (1 + np.sqrt(5)) / 2
    a = _quaternion_to_su2(np.array([0.5, 0.5, 0.5, 0.5]))
    if order == 24:
        gens = [a, _quaternion_to_su2(np.array([0.0, 1.0, 0.0, 0.0]))]
    elif order == 48:
        gens = [a, _quaternion_to_su2(np.array([1.0, 1.0, 0.0, 0.0]) / np.sqrt(2))]
    elif order == 120:
        gens = [a, _quaternion_to_su2(np.array([phi, 1 / phi, 1.0, 0.0]) / 2)]
    else:
        raise ValueError("order must be 24, 48 or 120")
    elems = generate_group(su2, gens, max_size=order + 1)
    if len(elems) != order:
        raise RuntimeError(f"closure produced {len(elems)} elements, expected {order}")
    return elems


def multiplication_index(group, grid, tol=1e-6):
    """``table[j, i]`` = index of ``grid[j] @ grid[i]^{-1}`` inside ``grid``."""
    k = len(grid)
    prod = grid[:, None] @ group.inverse(grid)[None, :]
    d = group.distance(prod[:, :, None], grid[None, None, :])
    table = np.argmin(d, axis=-1)
    if np.max(np.take_along_axis(d, table[..., None], -1)) > tol:
        raise ValueError("grid is not closed under multiplication")
    return table.reshape(k, k)


def algebra_span(group, elements, rel_tol=1e-8):
    """Rank and orthonormal basis of the span of coefficient vectors.

    Modified Gram-Schmidt with one re-orthogonalization pass; a residual is
    dropped when its norm falls below ``rel_tol`` times the largest input norm.
    """
    vecs = np.atleast_2d(np.asarray(elements, dtype=float))
    if vecs.size == 0:
        return 0, np.zeros((0, group.dim))
    largest = np.max(np.linalg.norm(vecs, axis=-1))
    if largest == 0.0:
        return 0, np.zeros((0, group.dim))
    drop = rel_tol * largest
    basis = []
    for v in vecs:
        r = v.copy()
        for _ in range(2):
            for b in basis:
                r -= np.dot(r, b) * b
        n = np.linalg.norm(r)
        if n > drop:
            basis.append(r / n)
            if len(basis) == group.dim:
                break
    if not basis:
        return 0, np.zeros((0, group.dim))
    return len(basis), np.array(basis)


@dataclass(frozen=True, eq=False)
class ClosedSubgroup:
    """A closed subgroup from a fixed catalog of shapes.

    kind is one of ``trivial``, ``cyclic`` (order n along ``direction``),
    ``circle`` (the one-parameter subgroup along ``direction``) or ``full``.
    """

    kind: str
    order: int = 1
    direction: Optional[np.ndarray] = None
    resolution: int = 64

    def __post_init__(self):
        if self.kind not in ("trivial", "cyclic", "circle", "full"):
            raise ValueError(f"unknown subgroup kind {self.kind!r}")
        if self.direction is not None:
            d = np.asarray(self.direction, float)
            object.__setattr__(self, "direction", d / np.linalg.norm(d))

    @classmethod
    def trivial(cls):
        return cls("trivial")

    @classmethod
    def full(cls):
        return cls("full")

    @classmethod
    def cyclic(cls, n, direction=None):
        if n == 1:
            return cls.trivial()
        return cls("cyclic", order=int(n), direction=direction)

    @classmethod
    def circle(cls, direction, resolution=64):
        return cls("circle", direction=np.asarray(direction, float), resolution=resolution)

    @property
    def name(self):
        if self.kind == "trivial":
            return "Trivial"
        if self.kind == "full":
            return "Full"
        if self.kind == "cyclic":
            return f"FiniteCyclic({self.order})"
        d = np.round(self.direction, 6)
        # d and -d span the same circle
        if d[np.flatnonzero(d)[0]] < 0:
            d = -d
        return "CircleSubgroup(" + ",".join(f"{x + 0.0:.6g}" for x in d) + ")"

    def __repr__(self):
        return f"ClosedSubgroup({self.name})"

    def _direction(self, group):
        if self.direction is not None:
            return self.direction
        return np.eye(group.dim)[0]

    def dimension(self, group):
        return {"trivial": 0, "cyclic": 0, "circle": 1, "full": group.dim}[self.kind]

    def algebra_basis(self, group):
        if self.kind == "circle":
            return self._direction(group)[None, :]
        if self.kind == "full":
            return np.eye(group.dim)
        return np.zeros((0, group.dim))

    def period(self, group):
        """Smallest T > 0 with exp(T X) = I for the unit direction X."""
        X = group.hat(self._direction(group))
        lam = np.abs(np.imag(np.linalg.eigvals(X)))
        lam = lam[lam > 1e-9]
        base = 2 * np.pi / lam.min()
        for m in range(1, 65):
            T = m * base
            if group.distance(group.identity(), group.exp(T * self._direction(group))) < 1e-9:
                return T
        raise ValueError("direction does not generate a closed circle")

    def elements(self, group, resolution=None):
        """Sampled elements; exact for finite subgroups."""
        if self.kind == "trivial":
            return group.identity((1,))
        d = self._direction(group)
        if self.kind == "cyclic":
            T = self.period(group)
            return group.exp(np.arange(self.order)[:, None] * (T / self.order) * d)
        if self.kind == "circle":
            n = resolution or self.resolution
            T = self.period(group)
            return group.exp(np.arange(n)[:, None] * (T / n) * d)
        return group.finite_grid(resolution or self.resolution)

    def conjugate(self, group, g):
        """The subgroup ``g^{-1} H g``."""
        if self.kind in ("trivial", "full") or group.is_abelian:
            return self
        d = group.adjoint(group.inverse(g), self._direction(group))
        return ClosedSubgroup(self.kind, self.order, d, self.resolution)

    def same_as(self, other, group, tol=1e-6):
        if self.kind != other.kind or self.order != other.order:
            return False
        if self.kind in ("circle", "cyclic"):
            a, b = self._direction(group), other._direction(group)
            if self.kind == "circle":
                return abs(abs(np.dot(a, b)) - 1.0) < tol
            return np.linalg.norm(a - b) < tol
        return True

    def distance_to(self, group, g, tol=1e-9):
        """Distance from g to the nearest subgroup element."""
        return quotient_distance(group, self, group.identity(), g, tol=tol)


def _golden_min(fun, lo, hi, iters=45):
    """Vectorized golden-section minimization on [lo, hi]."""
    inv = (np.sqrt(5) - 1) / 2
    a, b = lo.copy(), hi.copy()
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        # one of the two interior points survives each step
        c_new = np.where(left, b - inv * (b - a), d)
        d_new = np.where(left, c, a + inv * (b - a))
        fc_keep, fd_keep = fc, fd
        c, d = c_new, d_new
        fresh = np.where(left, c, d)
        f_fresh = fun(fresh)
        fc = np.where(left, f_fresh, fd_keep)
        fd = np.where(left, fc_keep, f_fresh)
    return fun((a + b) / 2)


def _circle_min(group, direction, period, a, b, n):
    """min over t of d(a, b exp(t X)), with a coarse grid then golden refinement."""
    m = _dagger(np.asarray(a)) @ np.asarray(b)
    eye = group.identity()
    t = np.arange(n) * (period / n)
    gx = group.exp(t[:, None] * direction)
    d = group.distance(eye, m[..., None, :, :] @ gx)
    j = np.argmin(d, axis=-1)
    t0 = t[j]

    def fun(tt):
        return group.distance(eye, m @ group.exp(tt[..., None] * direction))

    refined = _golden_min(fun, t0 - period / n, t0 + period / n)
    return np.minimum(refined, np.min(d, axis=-1))


def quotient_distance(group, subgroup, a, b, resolution=None, tol=1e-7):
    """Distance in G/H for the normal metric: ``min_h d(a, b h)``.

    The circle case samples H on a grid, refines the best cell, and repeats at
    twice the resolution; SamplerTooCoarse is raised when the two disagree by
    more than ``tol``.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if subgroup.kind == "trivial":
        return group.distance(a, b)
    if subgroup.kind == "full":
        return np.zeros(np.broadcast_shapes(a.shape[:-2], b.shape[:-2]))
    if subgroup.kind == "cyclic":
        hs = subgroup.elements(group)
        d = group.distance(a[..., None, :, :], b[..., None, :, :] @ hs)
        return np.min(d, axis=-1)
    n = resolution or subgroup.resolution
    X = subgroup._direction(group)
    T = subgroup.period(group)
    d1 = _circle_min(group, X, T, a, b, n)
    d2 = _circle_min(group, X, T, a, b, 2 * n)
    if np.max(np.abs(d1 - d2), initial=0.0) > tol:
        raise SamplerTooCoarse(
            f"quotient distance changed by {np.max(np.abs(d1 - d2)):.3g} on refinement to {2 * n} samples"
        )
    return np.minimum(d1, d2)
