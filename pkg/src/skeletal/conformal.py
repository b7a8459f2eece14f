"""Exterior conformal map of a convex polygon and its Green function.

The map F sends {|w| > 1} onto the exterior of the polygon with
F(inf) = inf and F'(inf) = cap > 0, so g(z) = log|F^{-1}(z)| is the
Green function with pole at infinity and cap is the logarithmic
capacity.  F is represented through the derivative product

    F'(w) = cap * prod_k (1 - w_k / w)^{beta_k},

with prevertices w_k on the unit circle and exponents
beta_k = 1 - theta_k / pi summing to 2.  Integrals of F' are taken in
the inverted variable u = 1/w (paths stay in the closed unit disk) and
split into an explicit pole term plus a regular correction

    F(w) = A + cap * (w - Q(1/w)),
    Q(u)  = int_0^u (P(s) - 1) / s^2 ds,   P(s) = prod_k (1 - w_k s)^{beta_k},

which is single valued because the prevertices satisfy the closure
condition sum_k beta_k w_k = 0.  Endpoint singularities of boundary
integrals are absorbed with Gauss-Jacobi rules; interior panels follow
the half-distance subdivision rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.special import roots_jacobi, roots_legendre

from .errors import (
    IllConditioned,
    MapError,
    NearVertexGradient,
    NoConvergence,
    PointInsideDomain,
)
from .geometry import ConvexPolygon

TWO_PI = 2.0 * np.pi

# quadrature orders
_NQ_SIDE = 16      # Gauss-Jacobi / Legendre order for boundary panels
_NQ_PATH = 20      # order for radial path panels
_FAST_MARGIN = 2e-3  # min distance from 1/w to a prevertex for the fixed rule
_FAST_LEVELS = 11    # geometric panel refinement toward the path endpoint


def _log1m(x):
    """Principal log(1 - x), stable for |x| << 1.  x = 1 gives -inf,
    which downstream sums treat as a hard zero of the map factor."""
    x = np.asarray(x, dtype=complex)
    with np.errstate(divide="ignore"):
        re = 0.5 * np.log1p(np.abs(x) ** 2 - 2.0 * x.real)
    im = np.arctan2(-x.imag, 1.0 - x.real)
    return re + 1j * im


def _expm1c(z):
    """exp(z) - 1, stable for |z| << 1."""
    z = np.asarray(z, dtype=complex)
    a, b = z.real, z.imag
    em = np.expm1(a)
    cb, sb = np.cos(b), np.sin(b)
    return (em * cb - 2.0 * np.sin(b / 2.0) ** 2) + 1j * ((em + 1.0) * sb)


def _circular_log_factors(theta, phis):
    """log(1 - exp(i(phi_j - theta))) for every prevertex angle.

    Returns an array of shape theta.shape + (n,).  Uses the exact polar
    form 1 - e^{-i d} = 2 sin(d/2) exp(i (pi - d)/2) with d reduced to
    (0, 2 pi).
    """
    theta = np.asarray(theta, dtype=float)
    d = (theta[..., None] - phis) % TWO_PI
    mag = 2.0 * np.sin(d / 2.0)
    return np.log(mag) + 1j * (np.pi - d) / 2.0


@dataclass
class ExteriorMap:
    """Solved exterior map of a convex polygon.

    Coordinates are the polygon's original ones; the parameter problem
    is solved on a translated/rescaled copy and the scale is folded
    into ``capacity`` and ``translation``.
    """

    polygon: ConvexPolygon
    prevertex_angles: np.ndarray     # increasing, angles[k] -> vertex k
    exponents: np.ndarray            # beta_k = 1 - theta_k / pi
    capacity: float
    translation: complex             # conformal center A
    residual: float
    scale: float                     # polygon diameter, for tolerances
    _rules: dict = field(default_factory=dict, repr=False)
    _fast_nodes: tuple = field(default=None, repr=False)
    _seed_table: tuple = field(default=None, repr=False)
    _vertex_images: np.ndarray = field(default=None, repr=False)

    # ------------------------------------------------------------------
    # basic data
    # ------------------------------------------------------------------

    @property
    def n(self) -> int:
        return self.polygon.n

    @property
    def prevertices(self) -> np.ndarray:
        return np.exp(1j * self.prevertex_angles)

    def _sigma(self) -> np.ndarray:
        """Singular points of the inverted-plane integrand: 1/w_k."""
        return np.exp(-1j * self.prevertex_angles)

    # ------------------------------------------------------------------
    # integrand pieces
    # ------------------------------------------------------------------

    def _log_factors(self, s):
        """(sum_k beta_k log(1 - w_k s), hit) where hit marks points that
        round onto a prevertex; -inf factors there would turn 0 * inf into
        NaN inside the complex contraction."""
        L = _log1m(s[..., None] * self.prevertices)
        hit = np.isneginf(L.real).any(axis=-1)
        if hit.any():
            L = np.where(np.isneginf(L.real), 0.0, L)
        S = np.tensordot(L, self.exponents, axes=(-1, 0))
        return S, hit

    def _P(self, s):
        """prod_k (1 - w_k s)^{beta_k} on the closed unit disk."""
        s = np.asarray(s, dtype=complex)
        S, hit = self._log_factors(s)
        return np.where(hit, 0.0, np.exp(S))

    def _Pm1(self, s):
        """P(s) - 1 computed without cancellation near s = 0."""
        s = np.asarray(s, dtype=complex)
        S, hit = self._log_factors(s)
        return np.where(hit, -1.0, _expm1c(S))

    def _P_logderiv(self, s):
        """P'(s) / P(s) = -sum_k beta_k w_k / (1 - w_k s)."""
        w = self.prevertices
        s = np.asarray(s, dtype=complex)
        return -np.tensordot(w / (1.0 - s[..., None] * w),
                             self.exponents, axes=(-1, 0))

    # ------------------------------------------------------------------
    # Q(u) = int_0^u (P - 1)/s^2 ds
    # ------------------------------------------------------------------

    def _fast_rule(self):
        if self._fast_nodes is None:
            xg, wg = roots_legendre(_NQ_SIDE)
            brk = [0.0] + [1.0 - 0.5 ** k for k in range(1, _FAST_LEVELS + 1)] + [1.0]
            nodes, weights = [], []
            for a, b in zip(brk[:-1], brk[1:]):
                h = (b - a) / 2.0
                nodes.append(a + h * (xg + 1.0))
                weights.append(wg * h)
            self._fast_nodes = (np.concatenate(nodes), np.concatenate(weights))
        return self._fast_nodes

    def _jacobi_rule(self, beta: float):
        key = round(beta, 14)
        if key not in self._rules:
            self._rules[key] = roots_jacobi(_NQ_PATH, beta, 0.0)
        return self._rules[key]

    def _q_fast(self, u: np.ndarray) -> np.ndarray:
        """Vectorized Q on points with min_k |u - 1/w_k| >= _FAST_MARGIN."""
        x, v = self._fast_rule()
        out = np.empty(u.shape, dtype=complex)
        for lo in range(0, len(u), 256):
            ub = u[lo:lo + 256]
            s = ub[:, None] * x[None, :]
            q = _expm1c(np.tensordot(_log1m(s[..., None] * self.prevertices),
                                     self.exponents, axes=(-1, 0)))
            np.divide(q, s * s, out=q)
            out[lo:lo + 256] = ub * (q @ v)
        return out

    def _q_scalar(self, u: complex) -> complex:
        """Adaptive Q along [0, u], absorbing a prevertex endpoint."""
        u = complex(u)
        if u == 0.0:
            return 0.0
        sig = self._sigma()
        k = int(np.argmin(np.abs(sig - u)))
        endpoint = abs(sig[k] - u) < 1e-12
        if endpoint:
            u = complex(sig[k])
        others = np.delete(np.arange(self.n), k) if endpoint else None

        xg, wg = roots_legendre(_NQ_PATH)
        total = 0.0 + 0.0j
        if endpoint:
            # split: march on [0, v], Jacobi-absorbed tail on [v, u]
            gap = np.abs(sig[others] - u).min() if len(others) else 2.0
            r = min(0.5, 0.45 * gap / abs(u))
            v = u * (1.0 - r)
        else:
            v = u
        # marching leg [0, v]
        t = 0.0 + 0.0j
        direction = v
        dist = abs(v)
        done = 0.0
        guard = 0
        while done < dist - 1e-15 * dist:
            d = np.abs(sig - t).min()
            step = min(dist - done, max(0.5 * d, 1e-14))
            a = t
            b = t + direction * (step / dist)
            h = (b - a) / 2.0
            s = a + h * (xg + 1.0)
            q = self._Pm1(s) / (s * s)
            total += h * np.dot(wg, q)
            t = b
            done += step
            guard += 1
            if guard > 300:
                raise MapError("path quadrature failed to terminate")
        if not endpoint:
            return total
        # Jacobi tail: int_v^u P/s^2 with (1 - w_k s) = w_k (u - s)
        beta = float(self.exponents[k])
        xj, wj = self._jacobi_rule(beta)
        L = u - v
        s = v + (xj + 1.0) * (L / 2.0)
        if len(others):
            rest = np.exp(np.tensordot(_log1m(s[:, None] * self.prevertices[others]),
                                       self.exponents[others], axes=(-1, 0)))
        else:
            rest = np.ones_like(s)
        front = np.exp(beta * np.log(self.prevertices[k] * L / 2.0))
        tail = (L / 2.0) * front * np.dot(wj, rest / (s * s))
        # subtract the explicit 1/s^2 part added back below
        tail -= (1.0 / v - 1.0 / u)
        return total + tail

    def _Q(self, u) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=complex))
        sig = self._sigma()
        dist = np.abs(u[:, None] - sig[None, :]).min(axis=1)
        out = np.empty(u.shape, dtype=complex)
        fast = dist >= _FAST_MARGIN
        if fast.any():
            out[fast] = self._q_fast(u[fast])
        for i in np.nonzero(~fast)[0]:
            out[i] = self._q_scalar(u[i])
        return out

    # ------------------------------------------------------------------
    # forward map and derivatives
    # ------------------------------------------------------------------

    def forward(self, w):
        """F(w) for |w| >= 1 (scalar or array)."""
        w = np.asarray(w, dtype=complex)
        scalar = w.shape == ()
        wf = np.atleast_1d(w)
        z = self.translation + self.capacity * (wf - self._Q(1.0 / wf))
        return complex(z[0]) if scalar else z

    def fprime(self, w):
        w = np.asarray(w, dtype=complex)
        return self.capacity * self._P(1.0 / w)

    def fsecond(self, w):
        w = np.asarray(w, dtype=complex)
        s = 1.0 / w
        return -self.capacity * self._P(s) * self._P_logderiv(s) * s * s

    def vertex_image(self, k: int) -> complex:
        """F at the k-th prevertex (equals polygon vertex k up to the
        solve residual)."""
        if self._vertex_images is None:
            sig = self._sigma()
            q = np.array([self._q_scalar(sig[i]) for i in range(self.n)])
            self._vertex_images = self.translation + self.capacity * (self.prevertices - q)
        return complex(self._vertex_images[k % self.n])

    # ------------------------------------------------------------------
    # boundary parametrization (theta-space quadrature)
    # ------------------------------------------------------------------

    def _theta_span(self, theta: float) -> int:
        """Index k of the boundary side [phi_k, phi_{k+1}] holding theta."""
        phi = self.prevertex_angles
        t = (theta - phi[0]) % TWO_PI + phi[0]
        k = int(np.searchsorted(np.append(phi, phi[0] + TWO_PI), t, side="right")) - 1
        return min(max(k, 0), self.n - 1)

    def _boundary_quad(self) -> "_BoundaryQuadrature":
        if "bq" not in self._rules:
            self._rules["bq"] = _BoundaryQuadrature(
                self.prevertex_angles, self.exponents)
        return self._rules["bq"]

    def _theta_integral(self, a: float, b: float,
                        left: int | None = None, right: int | None = None):
        """Complex integral of F'(e^{i t}) i e^{i t} / cap over [a, b].

        ``left``/``right`` name prevertex indices sitting exactly at the
        endpoints whose singular factor should be absorbed.
        """
        return self._boundary_quad().integral(a, b, left, right)

    def boundary_point(self, theta):
        """Point of the polygon boundary at circle angle theta."""
        theta = float(theta)
        k = self._theta_span(theta)
        phi = self.prevertex_angles
        t = (theta - phi[0]) % TWO_PI + phi[0]
        if t - phi[k] < 1e-12:
            return self.polygon.vertex(k)
        right = None
        kn = (k + 1) % self.n
        end = phi[k + 1] if k + 1 < self.n else phi[0] + TWO_PI
        if end - t < 1e-12:
            return self.polygon.vertex(kn)
        anchor = self.polygon.vertex(k)
        val = self._theta_integral(float(phi[k]), t, left=k, right=right)
        return anchor + self.capacity * val

    def boundary_speed(self, theta):
        """|F'| on the unit circle: reciprocal of 2 pi times the
        equilibrium density at the corresponding boundary point."""
        logs = _circular_log_factors(np.asarray(theta, float), self.prevertex_angles)
        S = np.tensordot(logs.real, self.exponents, axes=(-1, 0))
        return self.capacity * np.exp(S)

    # ------------------------------------------------------------------
    # level curves
    # ------------------------------------------------------------------

    def level_point(self, t: float, theta):
        """F(e^{t + i theta}): point(s) of the level curve {g = t}."""
        theta = np.asarray(theta, dtype=float)
        w = np.exp(t + 1j * theta)
        return self.forward(w)

    def level_tangent(self, t: float, theta):
        """d/dtheta of level_point (non-unit tangent)."""
        theta = np.asarray(theta, dtype=float)
        w = np.exp(t + 1j * theta)
        return self.fprime(w) * 1j * w

    def trace_level_set(self, t: float, resolution: int = 256) -> np.ndarray:
        """Closed polyline (counterclockwise, not repeating the first
        point) of the level curve {g = t}, t > 0."""
        if t <= 0:
            raise ValueError("level must be positive; the boundary is the polygon")
        theta = np.linspace(0.0, TWO_PI, int(resolution), endpoint=False)
        return self.level_point(t, theta)

    # ------------------------------------------------------------------
    # inverse map
    # ------------------------------------------------------------------

    def _seeds(self):
        if self._seed_table is None:
            radii = np.array([1.0, 1.05, 1.2, 1.6, 3.0, 10.0])
            th = np.linspace(0.0, TWO_PI, 96, endpoint=False)
            w = (radii[:, None] * np.exp(1j * th[None, :])).ravel()
            sig = self._sigma()
            ok = np.abs((1.0 / w)[:, None] - sig[None, :]).min(axis=1) >= _FAST_MARGIN
            w = w[ok]
            self._seed_table = (w, self.forward(w))
        return self._seed_table

    def _newton(self, z: complex, w0: complex, tol: float, iters: int = 60):
        w = complex(w0)
        if abs(w) < 1.0:
            w /= abs(w)
        r = complex(self.forward(w)) - z
        best = (abs(r), w)
        for _ in range(iters):
            if abs(r) <= tol:
                return w, abs(r)
            fp = complex(self.fprime(np.array([w]))[0])
            if fp == 0.0 or not np.isfinite(fp):
                break
            dw = r / fp
            step = 1.0
            while True:
                wn = w - step * dw
                if abs(wn) < 1.0:
                    wn /= abs(wn)
                rn = complex(self.forward(wn)) - z
                if abs(rn) < abs(r) or step < 1.0 / 128:
                    break
                step /= 2.0
            w, r = wn, rn
            if abs(r) < best[0]:
                best = (abs(r), w)
        return best[1], best[0]

    def inverse(self, z: complex, w0: complex | None = None) -> complex:
        """Solve F(w) = z for |w| >= 1.  z must not lie strictly inside
        the polygon."""
        z = complex(z)
        tol = 3e-14 * self.scale
        if self.polygon.contains(z, tol=-1e-11 * self.scale):
            raise PointInsideDomain("z = %r lies inside the polygon" % z)
        if w0 is None:
            w0 = (z - self.translation) / self.capacity
            if abs(w0) < 1.0:
                w0 = w0 / abs(w0) if w0 != 0 else 1.0 + 0j
        w, res = self._newton(z, w0, tol)
        if res <= tol:
            return w
        if res <= 100.0 * tol and \
                np.abs(self.polygon.vertices - z).min() < 1e-5 * self.scale:
            # the quadrature branch of the forward map bottoms out near
            # a corner; its floor sits above the global tolerance
            return w
        seeds_w, seeds_z = self._seeds()
        k = int(np.argmin(np.abs(seeds_z - z)))
        w, res = self._newton(z, seeds_w[k], tol)
        if res <= tol:
            return w
        # continuation from far away as a last resort
        far = self.translation + self.capacity * 64.0 * np.exp(1j * np.angle(z - self.translation + 1e-30))
        w = 64.0 * np.exp(1j * np.angle(z - self.translation + 1e-30))
        for frac in np.linspace(0.0, 1.0, 33)[1:]:
            zt = far + frac * (z - far)
            w, res = self._newton(zt, w, tol)
        if res <= tol * 10:
            return w
        raise MapError("inverse map failed at z = %r (residual %.3e)" % (z, res))

    def inverse_many(self, z, w0=None) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        if w0 is None:
            seeds = (flat - self.translation) / self.capacity
            small = np.abs(seeds) < 1.0
            seeds[small] = seeds[small] / np.abs(seeds[small])
        else:
            seeds = np.asarray(w0, dtype=complex).ravel().copy()
        tol = 3e-14 * self.scale
        w = seeds.copy()
        r = self.forward(w) - flat
        for _ in range(40):
            act = np.abs(r) > tol
            if not act.any():
                break
            fp = self.fprime(w[act])
            dw = r[act] / fp
            # limit steps to keep iterates in the chart
            mag = np.abs(dw)
            lim = 0.5 * np.maximum(1.0, np.abs(w[act]))
            dw = np.where(mag > lim, dw * (lim / mag), dw)
            wn = w[act] - dw
            bad = np.abs(wn) < 1.0
            wn[bad] = wn[bad] / np.abs(wn[bad])
            rn = self.forward(wn) - flat[act]
            worse = np.abs(rn) > np.abs(r[act])
            if worse.any():
                # half-step retry for the worse ones
                wh = w[act][worse] - 0.5 * dw[worse]
                badh = np.abs(wh) < 1.0
                wh[badh] = wh[badh] / np.abs(wh[badh])
                rh = self.forward(wh) - flat[act][worse]
                wn[worse] = np.where(np.abs(rh) < np.abs(rn[worse]), wh, wn[worse])
                rn[worse] = np.where(np.abs(rh) < np.abs(rn[worse]), rh, rn[worse])
            w[act] = wn
            r[act] = rn
        strag = np.abs(r) > tol
        for i in np.nonzero(strag)[0]:
            w[i] = self.inverse(flat[i], w[i])
        return w.reshape(z.shape)

    # ------------------------------------------------------------------
    # Green function
    # ------------------------------------------------------------------

    def green(self, z, w0=None) -> float:
        """g(z) = log|F^{-1}(z)|; zero on the boundary, positive outside."""
        w = self.inverse(z, w0)
        return float(np.log(abs(w)))

    def green_many(self, z, w0=None) -> np.ndarray:
        w = self.inverse_many(z, w0)
        return np.log(np.abs(w))

    def _guard_vertex(self, z: complex):
        dv = np.abs(self.polygon.vertices - z).min()
        if dv < 1e-9 * self.scale:
            raise NearVertexGradient("z = %r within cutoff of a corner" % (z,))

    def green_gradient(self, z, w0=None) -> complex:
        """Gradient of g at z as a complex number g_x + i g_y."""
        z = complex(z)
        self._guard_vertex(z)
        w = self.inverse(z, w0)
        fp = complex(self.fprime(np.array([w]))[0])
        return (1.0 / (w * fp)).conjugate()

    def green_data(self, z, w0=None):
        """(g, gradient, w) in one inversion; the workhorse for tracing."""
        z = complex(z)
        w = self.inverse(z, w0)
        fp = complex(self.fprime(np.array([w]))[0])
        g = float(np.log(abs(w)))
        return g, (1.0 / (w * fp)).conjugate(), w

    def green_second(self, z=None, w=None) -> complex:
        """Second complex derivative G'' of G = log f (f = F^{-1});
        encodes the Hessian of g: H = [[Re G'', -Im G''], [-Im G'', -Re G'']]."""
        if w is None:
            w = self.inverse(z)
        w = complex(w)
        fp = complex(self.fprime(np.array([w]))[0])
        fs = complex(self.fsecond(np.array([w]))[0])
        return -(fp + w * fs) / (w * fp) ** 2 / fp

    def hessian(self, z=None, w=None) -> np.ndarray:
        gpp = self.green_second(z, w)
        return np.array([[gpp.real, -gpp.imag], [-gpp.imag, -gpp.real]])


# ----------------------------------------------------------------------
# boundary quadrature in the circle angle
# ----------------------------------------------------------------------


class _BoundaryQuadrature:
    """Adaptive panels for integrals of the boundary integrand
    i e^{i theta} prod_j (1 - w_j e^{-i theta})^{beta_j}.

    Gauss-Jacobi panels absorb prevertex endpoint singularities; plain
    panels never extend past half their circular distance to the
    nearest prevertex.  A rule cache may be shared across instances
    with identical exponents (the parameter solver reuses one).
    """

    def __init__(self, phi: np.ndarray, beta: np.ndarray, rules: dict | None = None):
        self.phi = np.asarray(phi, dtype=float)
        self.beta = np.asarray(beta, dtype=float)
        self.n = len(self.phi)
        self.rules = {} if rules is None else rules
        if "gl" not in self.rules:
            self.rules["gl"] = roots_legendre(_NQ_SIDE)
        for k in range(self.n):
            for right in (False, True):
                key = (round(float(beta[k]), 14), right)
                if key not in self.rules:
                    a, b = (beta[k], 0.0) if right else (0.0, beta[k])
                    self.rules[key] = roots_jacobi(_NQ_SIDE, a, b)

    def _gap(self, t: float, exclude: int | None = None) -> float:
        """Circular distance from angle t to the nearest prevertex,
        skipping ``exclude``."""
        d = np.abs((self.phi - t + np.pi) % TWO_PI - np.pi)
        if exclude is not None:
            d = np.delete(d, exclude % self.n)
        return float(d.min()) if len(d) else TWO_PI

    def _smooth(self, theta, skip=(), skip_delta=()):
        logs = _circular_log_factors(theta, self.phi)
        S = logs @ self.beta
        for k, d in zip(skip, skip_delta):
            S = S - self.beta[k % self.n] * np.log(d)
        return 1j * np.exp(1j * theta) * np.exp(S)

    def _jacobi_panel(self, k: int, t: float, L: float, right: bool) -> complex:
        """Panel of length L absorbing prevertex k sitting at its
        singular end (left end t when right=False, right end t when
        right=True)."""
        bk = float(self.beta[k % self.n])
        xj, wj = self.rules[(round(bk, 14), right)]
        h = L / 2.0
        if right:
            theta = t - L + h * (xj + 1.0)
            delta = t - theta
        else:
            theta = t + h * (xj + 1.0)
            delta = theta - t
        f = self._smooth(theta, skip=(k,), skip_delta=(delta,))
        return h ** (bk + 1.0) * np.dot(wj, f)

    def _march(self, a: float, b: float) -> complex:
        """Plain panels over [a, b]; one-half rule toward prevertices."""
        xg, wg = self.rules["gl"]
        total = 0.0 + 0.0j
        t = a
        guard = 0
        while b - t > 1e-14:
            d = self._gap(t)
            L = min(b - t, max(0.5 * d, 1e-14))
            h = L / 2.0
            theta = t + h * (xg + 1.0)
            total += h * np.dot(wg, self._smooth(theta))
            t += L
            guard += 1
            if guard > 260:
                raise MapError("boundary quadrature failed to terminate")
        return total

    def integral(self, a: float, b: float,
                 left: int | None = None, right: int | None = None) -> complex:
        if b < a:
            return -self.integral(b, a, left=right, right=left)
        if b - a < 1e-15:
            return 0.0 + 0.0j
        total = 0.0 + 0.0j
        t0, t1 = a, b
        if left is not None:
            L = min((b - a) / 2.0, 0.5 * self._gap(a, exclude=left))
            total += self._jacobi_panel(left, a, L, right=False)
            t0 = a + L
        if right is not None:
            L = min((b - t0) / 2.0, 0.5 * self._gap(b, exclude=right))
            total += self._jacobi_panel(right, b, L, right=True)
            t1 = b - L
        return total + self._march(t0, t1)

    def side(self, k: int) -> complex:
        """Integral over the full prevertex gap [phi_k, phi_{k+1}]."""
        phix = self.phi[0] + TWO_PI if k == self.n - 1 else self.phi[k + 1]
        return self.integral(float(self.phi[k]), float(phix),
                             left=k, right=(k + 1) % self.n)


# ----------------------------------------------------------------------
# parameter problem
# ----------------------------------------------------------------------


def _side_vectors(phi: np.ndarray, beta: np.ndarray, rules: dict) -> np.ndarray:
    """Complex side vectors of the image polygon for unit capacity."""
    bq = _BoundaryQuadrature(phi, beta, rules)
    return np.array([bq.side(k) for k in range(len(phi))])


def solve_exterior_map(polygon: ConvexPolygon, tol: float = 1e-10) -> ExteriorMap:
    """Solve the prevertex parameter problem for the exterior map.

    Raises NoConvergence if the side-length system cannot be driven to
    the requested residual and IllConditioned if prevertices collide.
    """
    n = polygon.n
    shift = polygon.centroid
    scl = polygon.diameter
    verts = (polygon.vertices - shift) / scl
    targets = np.abs(np.roll(verts, -1) - verts)  # target length of side k
    log_t = np.log(targets)
    beta = np.array([1.0 - polygon.interior_angle(k) / np.pi for k in range(n)])

    rules: dict = {}  # shared across solver iterations

    def gaps_of(y):
        e = np.exp(np.append(y, 0.0) - max(np.max(y), 0.0))
        return TWO_PI * e / e.sum()

    def residuals(y):
        gaps = gaps_of(y)
        phi = np.concatenate([[0.0], np.cumsum(gaps)[:-1]])
        V = _side_vectors(phi, beta, rules)
        ln = np.log(np.abs(V)) - log_t
        ln -= ln.mean()
        w = np.exp(1j * phi)
        closure = (beta * w).sum()
        return np.concatenate([ln, [closure.real, closure.imag]])

    frac = targets / targets.sum()
    g0 = 0.5 * frac + 0.5 / n
    y0 = np.log(g0[:-1] / g0[-1])

    sol = least_squares(residuals, y0, method="lm", xtol=1e-15, ftol=1e-15,
                        gtol=1e-15, max_nfev=400 * n)
    if np.max(np.abs(sol.fun)) > 0.1 * tol:
        # 2-point FD jacobians can stall short of the target on thin
        # polygons; a 3-point polish from the lm iterate is cheap
        sol = least_squares(residuals, sol.x, method="trf", jac="3-point",
                            xtol=5e-16, ftol=5e-16, gtol=5e-16, max_nfev=100 * n)
    res_vec = residuals(sol.x)
    res = float(np.max(np.abs(res_vec)))
    if not np.isfinite(res) or res > tol:
        raise NoConvergence(
            "parameter problem residual %.3e exceeds tol %.1e" % (res, tol))
    gaps = gaps_of(sol.x)
    if gaps.min() < 1e-10:
        raise IllConditioned("prevertex gap %.3e below 1e-10" % gaps.min())

    phi = np.concatenate([[0.0], np.cumsum(gaps)[:-1]])
    V = _side_vectors(phi, beta, rules)
    D = np.roll(verts, -1) - verts
    rho = (D * V.conjugate()).sum() / (np.abs(V) ** 2).sum()
    cap_n = abs(rho)            # capacity of the normalized polygon
    alpha = float(np.angle(rho)) % TWO_PI
    # rotating every prevertex by alpha preserves the vertex pairing;
    # keep the angles as one increasing run starting at alpha
    phi = alpha + np.concatenate([[0.0], np.cumsum(gaps)[:-1]])

    emap = ExteriorMap(
        polygon=polygon,
        prevertex_angles=phi,
        exponents=beta,
        capacity=cap_n * scl,
        translation=shift,  # provisional; fixed below
        residual=res,
        scale=scl,
    )
    # conformal center from the forward formula at the prevertices
    sig = emap._sigma()
    q = np.array([emap._q_scalar(sig[i]) for i in range(n)])
    images = emap.capacity * (emap.prevertices - q)
    A = (polygon.vertices - images).mean()
    emap.translation = complex(A)
    emap._vertex_images = images + A

    pos_err = float(np.abs(emap._vertex_images - polygon.vertices).max() / scl)
    emap.residual = max(res, pos_err)
    if emap.residual > 100 * tol:
        raise NoConvergence(
            "vertex position defect %.3e exceeds tolerance" % pos_err)
    return emap
