"""Green functions reflected across polygon edges.

For edge i with reflection R_i, the reflected potential is
g_i(z) = -g(R_i z): harmonic wherever R_i z stays outside the polygon,
zero exactly on the edge line, and negative inside the polygon.  The
skeleton is built from ties g_i = g_j between these functions.

Inside the wedge between two edge lines that contains the polygon both
reflections land outside the polygon, so values there never raise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conformal import ExteriorMap
from .errors import ReflectionInsideDomain
from .geometry import ConvexPolygon


@dataclass
class ReflectedGreen:
    """g_i = -g(R_i z) for one polygon edge."""

    emap: ExteriorMap
    edge: int
    _c: complex = field(init=False, repr=False)
    _a: complex = field(init=False, repr=False)

    def __post_init__(self):
        p = self.emap.polygon
        self.edge = self.edge % p.n
        u = p.edge_unit(self.edge)
        self._c = u * u
        self._a = p.vertex(self.edge)

    @property
    def polygon(self) -> ConvexPolygon:
        return self.emap.polygon

    def reflect(self, z):
        return self._a + self._c * np.conjugate(z - self._a)

    def valid(self, z) -> bool:
        """True when the reflected point is not strictly inside the
        polygon, so the value below is defined."""
        return not bool(self.polygon.contains(
            self.reflect(z), tol=-1e-11 * self.emap.scale))

    def _checked_reflect(self, z: complex) -> complex:
        rz = complex(self.reflect(z))
        if self.polygon.contains(rz, tol=-1e-11 * self.emap.scale):
            raise ReflectionInsideDomain(
                "reflection of %r across edge %d lands inside" % (z, self.edge))
        return rz

    def value(self, z: complex, w0: complex | None = None) -> float:
        return -self.emap.green(self._checked_reflect(z), w0)

    def gradient(self, z: complex, w0: complex | None = None) -> complex:
        rz = self._checked_reflect(z)
        return -self._c * np.conjugate(self.emap.green_gradient(rz, w0))

    def data(self, z: complex, w0: complex | None = None):
        """(value, gradient, w) with w the circle preimage of R_i z,
        reusable as the warm start for nearby calls."""
        rz = self._checked_reflect(z)
        g, grad, w = self.emap.green_data(rz, w0)
        return -g, -self._c * np.conjugate(grad), w

    def hessian(self, z: complex = None, w: complex | None = None) -> np.ndarray:
        if w is None:
            rz = self._checked_reflect(z)
            w = self.emap.inverse(rz)
        H = self.emap.hessian(w=w)
        c = self._c
        M = np.array([[c.real, c.imag], [c.imag, -c.real]])
        return -(M @ H @ M)

    def level_curve(self, t: float, theta):
        """Points of {g_i = -t}: the edge-i reflection of the exterior
        level curve {g = t}, sampled forward (no inversion)."""
        return self.reflect(self.emap.level_point(t, theta))

    def level_tangent(self, t: float, theta):
        """d/dtheta of level_curve."""
        return self._c * np.conjugate(self.emap.level_tangent(t, theta))


def reflected_family(emap: ExteriorMap) -> list[ReflectedGreen]:
    return [ReflectedGreen(emap, i) for i in range(emap.polygon.n)]
