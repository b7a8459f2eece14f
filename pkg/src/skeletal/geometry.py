"""Convex polygon model, edge reflections, and two-edge wedges.

Points are complex numbers throughout.  A polygon stores its vertices in
counterclockwise order; edge ``i`` is the segment from ``vertex[i-1]`` to
``vertex[i]`` (indices mod n), so edges ``i`` and ``i+1`` meet at vertex
``i``.  That convention makes the pair (i, i+1) the natural label for the
corner at ``vertex[i]`` and is relied on by the zero-set module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DuplicateVertex, NonConvex, TooFewVertices

# Relative tolerance (in units of the polygon diameter) used by the
# geometric predicates.  Polygons are validated after rescaling to unit
# diameter, so this is an absolute number internally.
GEOM_TOL = 1e-9


def _as_complex(points) -> np.ndarray:
    a = np.asarray(points)
    if np.iscomplexobj(a):
        return a.astype(complex).ravel()
    a = np.atleast_2d(a).astype(float)
    if a.shape[-1] != 2:
        raise ValueError("points must be complex or an (n, 2) array")
    return a[..., 0] + 1j * a[..., 1]


def _cross(a: complex, b: complex) -> float:
    return (a * b.conjugate()).imag * -1.0


@dataclass(frozen=True)
class Wedge:
    """Closed component of the plane minus two edge lines that contains
    the polygon.

    ``apex`` is the intersection of the two lines (None when parallel).
    Membership is two signed half-plane tests; ``inner`` are the unit
    inward normals and ``offset`` the line offsets for those tests.
    """

    i: int
    j: int
    apex: complex | None
    parallel: bool
    inner: tuple[complex, complex]
    anchor: tuple[complex, complex]
    tol: float = GEOM_TOL

    def contains(self, z, slack: float = 0.0):
        tol = self.tol + slack
        z = np.asarray(z, dtype=complex)
        ok = np.ones(z.shape, dtype=bool)
        for nrm, a in zip(self.inner, self.anchor):
            ok &= (nrm.conjugate() * (z - a)).real >= -tol
        return bool(ok) if ok.shape == () else ok


@dataclass(frozen=True)
class ConvexPolygon:
    """Validated convex polygon with counterclockwise vertices."""

    vertices: np.ndarray  # complex, shape (n,)
    _edge_units: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        v = self.vertices
        units = (v - np.roll(v, 1))
        units = units / np.abs(units)
        object.__setattr__(self, "_edge_units", units)

    # -- basic data --------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.vertices)

    def vertex(self, i: int) -> complex:
        return complex(self.vertices[i % self.n])

    def edge(self, i: int) -> tuple[complex, complex]:
        """Endpoints (start, end) of edge i: vertex i-1 to vertex i."""
        return self.vertex(i - 1), self.vertex(i)

    def edge_unit(self, i: int) -> complex:
        return complex(self._edge_units[i % self.n])

    def outward_normal(self, i: int) -> complex:
        # CCW polygon: interior lies left of the edge direction.
        return -1j * self.edge_unit(i)

    def side_lengths(self) -> np.ndarray:
        v = self.vertices
        return np.abs(v - np.roll(v, 1))

    def interior_angle(self, i: int) -> float:
        """Interior angle at vertex i (between edges i and i+1)."""
        prev_dir = -self.edge_unit(i)          # from vertex i back along edge i
        next_dir = self.edge_unit(i + 1)       # from vertex i along edge i+1
        ang = np.angle(prev_dir / next_dir) % (2 * np.pi)
        return float(ang)

    @property
    def centroid(self) -> complex:
        v = self.vertices
        w = np.roll(v, -1)
        cr = v.real * w.imag - v.imag * w.real
        area = cr.sum() / 2.0
        c = ((v + w) * cr).sum() / (6.0 * area)
        return complex(c)

    @property
    def area(self) -> float:
        v = self.vertices
        w = np.roll(v, -1)
        return float((v.real * w.imag - v.imag * w.real).sum() / 2.0)

    @property
    def diameter(self) -> float:
        v = self.vertices
        d = np.abs(v[:, None] - v[None, :])
        return float(d.max())

    # -- predicates --------------------------------------------------

    def contains(self, z, tol: float | None = None):
        """Signed membership: True if z is inside or on the boundary.

        Accepts scalars or arrays.  ``tol`` widens the polygon by that
        margin (negative shrinks it).
        """
        if tol is None:
            tol = GEOM_TOL * self.diameter
        z = np.asarray(z, dtype=complex)
        starts = np.roll(self.vertices, 1)
        nrm = -1j * self._edge_units  # outward normals
        s = ((z[..., None] - starts[None, :]) * nrm.conjugate()[None, :]).real
        return np.all(s <= tol, axis=-1) if z.shape else bool(np.all(s <= tol))

    def distance_to_boundary(self, z: complex) -> float:
        """Unsigned distance from z to the polygon boundary."""
        z = complex(z)
        best = np.inf
        for i in range(self.n):
            a, b = self.edge(i)
            e = b - a
            t = ((z - a).conjugate() * e).real / abs(e) ** 2
            t = min(max(t, 0.0), 1.0)
            best = min(best, abs(z - (a + t * e)))
        return best

    # -- reflections -------------------------------------------------

    def reflect(self, i: int, z):
        """Mirror image of z across the line through edge i."""
        a, _ = self.edge(i)
        c = self.edge_unit(i) ** 2
        z = np.asarray(z, dtype=complex)
        out = a + c * np.conjugate(z - a)
        return out if out.shape else complex(out)

    def reflect_matrix(self, i: int) -> np.ndarray:
        """The 2x2 (symmetric, orthogonal) matrix of the reflection's
        linear part, for chain-ruling gradients and Hessians."""
        c = self.edge_unit(i) ** 2
        return np.array([[c.real, c.imag], [c.imag, -c.real]])

    # -- wedges ------------------------------------------------------

    def wedge(self, i: int, j: int) -> Wedge:
        """Closed region bounded by the lines of edges i and j that
        contains the polygon."""
        i, j = i % self.n, j % self.n
        if i == j:
            raise ValueError("wedge needs two distinct edges")
        ai, _ = self.edge(i)
        aj, _ = self.edge(j)
        ui, uj = self.edge_unit(i), self.edge_unit(j)
        ni, nj = 1j * ui, 1j * uj  # inward normals (CCW polygon)
        cr = _cross(ui, uj)
        dot = (ui.conjugate() * uj).real
        scale = self.diameter
        if abs(cr) < GEOM_TOL and dot < 0:
            # anti-parallel edge directions: parallel lines, strip region
            return Wedge(i, j, None, True, (ni, nj), (ai, aj), GEOM_TOL * scale)
        if abs(cr) < GEOM_TOL:
            # same direction: lines coincide or polygon degenerate; the
            # validator rejects this, guard anyway
            raise NonConvex("edges %d and %d are parallel with equal orientation" % (i, j))
        # apex: solve ai + s*ui = aj + t*uj
        s = _cross(aj - ai, uj) / cr
        apex = ai + s * ui
        return Wedge(i, j, apex, False, (ni, nj), (ai, aj), GEOM_TOL * scale)


def validate_polygon(points) -> ConvexPolygon:
    """Check convexity and orientation, returning a ConvexPolygon.

    Clockwise input is silently reversed.  Duplicate consecutive (or
    coincident) vertices and non-convex or collinear corners are
    rejected.  Idempotent: feeding a polygon's vertices back yields an
    equal polygon.
    """
    v = _as_complex(points)
    if len(v) < 3:
        raise TooFewVertices("need at least 3 vertices, got %d" % len(v))
    scale = float(np.abs(v[:, None] - v[None, :]).max())
    if scale == 0.0:
        raise DuplicateVertex("all vertices coincide")
    tol = GEOM_TOL * scale
    d = np.abs(v[:, None] - v[None, :])
    np.fill_diagonal(d, np.inf)
    if d.min() < tol:
        a, b = np.unravel_index(int(d.argmin()), d.shape)
        raise DuplicateVertex("vertices %d and %d coincide" % (a, b))

    e = np.roll(v, -1) - v
    f = np.roll(e, -1)
    crosses = e.real * f.imag - e.imag * f.real
    if np.all(crosses < 0):
        v = v[::-1].copy()
        crosses = -crosses[::-1]
    if np.any(crosses <= tol * scale):
        k = int(np.argmin(crosses))
        word = "collinear" if abs(crosses[k]) <= tol * scale else "reflex"
        raise NonConvex("vertex %d is %s" % ((k + 1) % len(v), word))
    return ConvexPolygon(vertices=v)


def reflect_point(z, i: int, polygon: ConvexPolygon):
    """Module-level alias for ConvexPolygon.reflect with argument order
    matching the operation contract."""
    return polygon.reflect(i, z)


def wedge(polygon: ConvexPolygon, i: int, j: int) -> Wedge:
    return polygon.wedge(i, j)


def wedge_contains(w: Wedge, z: complex) -> bool:
    return w.contains(z)
