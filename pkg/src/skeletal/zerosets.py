"""Tie curves between reflected potentials.

For edges i != j the tie set is {z in W_ij : g_i(z) = g_j(z)}, with
W_ij the wedge between the two edge lines that contains the polygon.
Each connected piece is traced as a chain of samples by arclength
continuation: predictor along the tangent, Newton corrector on the
perpendicular line.  Ties carry the level t = -g_i.

The root of a tie set depends on how the reflected level curves
{g_i = -t} and {g_j = -t} first meet as t grows:

* adjacent edges meet at the shared polygon vertex, t = 0 ("vertex");
* most non-adjacent pairs meet at an interior tangency point, from
  which two branches run ("plus"/"minus"); the point and level come
  from a separation bisection over t followed by a tangency Newton
  iteration with exact Hessians;
* when the first meeting happens at the crossing point of the two
  edge lines instead, the curves cross transversally there and a
  single branch enters the wedge ("apex").  No tangency point exists
  for such a pair.

The strict-descent check scans every branch for points where the two
gradients become parallel; the condition requires them anti-parallel
(normalized dot product below -margin_tol) wherever that happens.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from shapely.geometry import LineString, Polygon as ShapelyPolygon, box
from shapely.ops import nearest_points

from .conformal import ExteriorMap
from .errors import (
    BranchAmbiguity,
    DescentViolation,
    NoTangency,
    OutOfRange,
    TraceStall,
)
from .geometry import ConvexPolygon, Wedge
from .reflections import ReflectedGreen, reflected_family

TRACE_STEP = 1e-2       # default continuation step, fraction of diameter
TRACE_STEP_MIN = 1e-6   # halving floor, fraction of diameter
MAX_TURN = 0.35         # max tangent turn per step, radians
MARGIN_TOL = 1e-8       # strict-descent margin threshold (dimensionless)
PARALLEL_TOL = 1e-6     # |cross|/(|grad_i||grad_j|) counting as parallel
_REGION_FACTOR = 1.3    # tracing stops this many diameters from centroid
_RING_RES = 512         # polyline resolution for separation tests


def _cross2(a: complex, b: complex) -> float:
    return a.real * b.imag - a.imag * b.real


@dataclass
class ZeroBranch:
    """One traced piece of a tie set, ordered by increasing level."""

    i: int
    j: int
    kind: str                 # "vertex" | "plus" | "minus" | "apex"
    z: np.ndarray             # complex samples, z[0] is the root
    t: np.ndarray             # levels at the samples
    grad_i: np.ndarray        # gradient of g_i at samples (nan at a vertex root)
    grad_j: np.ndarray
    w_i: np.ndarray           # circle preimages of the reflected points
    w_j: np.ndarray
    end_reason: str           # "region" | "wedge"
    start_reason: str = "top"  # "top" at a root point, else like end_reason

    @property
    def top(self) -> complex:
        return complex(self.z[0])

    @property
    def t_top(self) -> float:
        return float(self.t[0])

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    def arclengths(self) -> np.ndarray:
        d = np.abs(np.diff(self.z))
        return np.concatenate([[0.0], np.cumsum(d)])

    def covers(self, t: float) -> bool:
        return self.t[0] - 1e-12 <= t <= self.t[-1] + 1e-12


@dataclass
class _PairData:
    wedge: Wedge
    adjacent: bool
    # ("vertex"|"tangency"|"apex"|"none", root point, root level)
    contact: tuple | None = None
    branches: list = field(default_factory=list)
    step_used: float = -1.0


@dataclass
class DescentReport:
    """Outcome of the strict-descent verification.

    The check is evidence from sampling, not a certification: it finds
    the points along the traced tie branches where the two gradients
    are (nearly) parallel and requires the normalized dot product to
    be below -margin_tol at each of them.  The margin is the smallest
    -dot/(|grad_i||grad_j|) over those points (inf when none exist).
    Level drops along a branch are reported as violations too; drops
    thinner than the refinement floor become inconclusive records.
    """

    ok: bool
    verdict: str                       # "pass" | "fail" | "inconclusive"
    margin: float
    margin_tol: float
    sampling_step: float
    checked_branches: int
    near_parallel: list                # (i, j, kind, z, normalized dot)
    violations: list                   # (i, j, kind, z, value, reason)
    inconclusive: list                 # (i, j, kind, z, reason)
    skipped_pairs: list                # pairs whose tie set was not traced

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "verdict": self.verdict,
            "margin": None if not np.isfinite(self.margin) else self.margin,
            "margin_tol": self.margin_tol,
            "sampling_step": self.sampling_step,
            "checked_branches": self.checked_branches,
            "near_parallel": [
                {"i": i, "j": j, "kind": k, "z": [z.real, z.imag], "dot": v}
                for (i, j, k, z, v) in self.near_parallel
            ],
            "violations": [
                {"i": i, "j": j, "kind": k, "z": [z.real, z.imag],
                 "value": v, "reason": r}
                for (i, j, k, z, v, r) in self.violations
            ],
            "inconclusive": [
                {"i": i, "j": j, "kind": k, "z": [z.real, z.imag], "reason": r}
                for (i, j, k, z, r) in self.inconclusive
            ],
            "skipped_pairs": [list(p) for p in self.skipped_pairs],
        }


class ZeroSetSystem:
    """Tie curves of one polygon's reflected potentials."""

    def __init__(self, emap: ExteriorMap, step: float = TRACE_STEP):
        self.emap = emap
        self.polygon: ConvexPolygon = emap.polygon
        self.reflected: list[ReflectedGreen] = reflected_family(emap)
        self.step = float(step)
        self.scale = emap.scale
        self.center = self.polygon.centroid
        self._pairs: dict[tuple[int, int], _PairData] = {}
        self._rings: dict[float, np.ndarray] = {}
        self._wedge_polys: dict[tuple[int, int], object] = {}
        self._clip_box = box(self.center.real - 2.0 * self.scale,
                             self.center.imag - 2.0 * self.scale,
                             self.center.real + 2.0 * self.scale,
                             self.center.imag + 2.0 * self.scale)

    # -- pair bookkeeping ------------------------------------------------

    def _key(self, i: int, j: int) -> tuple[int, int]:
        i %= self.polygon.n
        j %= self.polygon.n
        if i == j:
            raise ValueError("tie sets need two distinct edges")
        return (i, j) if i < j else (j, i)

    def _adjacent_vertex(self, i: int, j: int) -> int | None:
        """Shared vertex index when edges i and j are adjacent."""
        n = self.polygon.n
        if (i + 1) % n == j:
            return i
        if (j + 1) % n == i:
            return j
        return None

    def _pair(self, i: int, j: int) -> _PairData:
        key = self._key(i, j)
        if key not in self._pairs:
            i0, j0 = key
            shared = self._adjacent_vertex(i0, j0)
            wedge = self.polygon.wedge(i0, j0)
            if shared is not None:
                contact = ("vertex", self.polygon.vertex(shared), 0.0)
                self._pairs[key] = _PairData(wedge, True, contact)
            else:
                self._pairs[key] = _PairData(wedge, False)
        return self._pairs[key]

    # -- potential differences -------------------------------------------

    def _h_data(self, i: int, j: int, z: complex, wi=None, wj=None):
        """(h, grad_h, gi, grad_i, grad_j, wi, wj) at z for h = g_i - g_j."""
        gi, di, wi = self.reflected[i].data(z, wi)
        gj, dj, wj = self.reflected[j].data(z, wj)
        return gi - gj, di - dj, gi, di, dj, wi, wj

    # -- level curve rings for the separation test -------------------------

    def _ring(self, t: float) -> np.ndarray:
        key = round(t, 14)
        if key not in self._rings:
            th = np.linspace(0.0, 2.0 * np.pi, _RING_RES, endpoint=False)
            self._rings[key] = self.emap.level_point(t, th)
        return self._rings[key]

    def _clipped_reflection(self, i: int, t: float, key: tuple[int, int]):
        ring = self.reflected[i].reflect(self._ring(t))
        pts = np.column_stack([ring.real, ring.imag])
        line = LineString(np.vstack([pts, pts[:1]]))
        clipped = line.intersection(self._wedge_poly(key))
        return None if clipped.is_empty else clipped

    def _wedge_poly(self, key: tuple[int, int]):
        if key not in self._wedge_polys:
            wedge = self._pair(*key).wedge
            region = self._clip_box
            L = 16.0 * self.scale
            for nrm, a in zip(wedge.inner, wedge.anchor):
                d = 1j * nrm  # direction along the edge line
                corners = [a - L * d, a + L * d, a + L * (d + nrm),
                           a - L * (d - nrm)]
                region = region.intersection(
                    ShapelyPolygon([(c.real, c.imag) for c in corners]))
            self._wedge_polys[key] = region
        return self._wedge_polys[key]

    def _separation(self, i: int, j: int, t: float):
        """Distance between the wedge-clipped reflected level curves at
        level t; None when either curve misses the wedge."""
        key = self._key(i, j)
        a = self._clipped_reflection(i, t, key)
        b = self._clipped_reflection(j, t, key)
        if a is None or b is None:
            return None
        return float(a.distance(b)), a, b

    # -- top point of a pair ----------------------------------------------

    def find_max_point(self, i: int, j: int) -> tuple[complex, float]:
        """Highest point of the tie set: the point where the reflected
        potentials first tie as the level descends.

        Adjacent edges tie at the shared polygon vertex with t = 0.
        Non-adjacent edges tie where the reflected level curves first
        touch; raises NoTangency when that touch is not an interior
        tangency (first contact at the wedge apex, or curves never
        meeting inside the wedge).
        """
        kind, root, level = self._first_contact(i, j)
        if kind in ("vertex", "tangency"):
            return root, level
        key = self._key(i, j)
        if kind == "apex":
            raise NoTangency(
                "edges %d,%d first tie at their wedge apex; "
                "no interior tangency exists" % key)
        raise NoTangency("edges %d,%d never tie inside their wedge" % key)

    def _first_contact(self, i: int, j: int) -> tuple:
        """Classify and cache how the tie set of edges i, j is rooted.

        Returns ("vertex"|"tangency"|"apex"|"none", point, level).  For
        "apex" the point is a tie-curve point near where the curve
        leaves the wedge (the apex itself when it lies in the tracing
        region) and the level is the tie level there.
        """
        key = self._key(i, j)
        pd = self._pair(i, j)
        if pd.contact is not None:
            return pd.contact
        i0, j0 = key
        found = self._bracket_touch(i0, j0)
        if found is None:
            pd.contact = ("none", None, None)
            return pd.contact
        t_lo, t_hi, seed = found
        state = self._settle(i0, j0, seed)
        if state is not None:
            seed = state[0]
        # the two edge lines' crossing point is itself a tie, so the
        # curves always meet by level g(apex); an interior tangency
        # exists only when they touch strictly below that
        apex = pd.wedge.apex
        t_apex = np.inf if apex is None else self.emap.green(apex)
        if t_hi < t_apex - max(1e-9, 100.0 * (t_hi - t_lo)):
            try:
                m, t = self._tangency_newton(
                    i0, j0, seed, 0.5 * (t_lo + t_hi), pd.wedge)
                pd.contact = ("tangency", m, t)
                return pd.contact
            except NoTangency:
                pass
        if state is None:
            pd.contact = ("none", None, None)
        else:
            pd.contact = ("apex", state[0], -state[3])
        return pd.contact

    def _settle(self, i: int, j: int, z0: complex):
        """Full 2-D Newton for h = 0 from z0; returns an _h_data state."""
        z = complex(z0)
        wi = wj = None
        state = None
        for _ in range(40):
            h, dh, gi, di, dj, wi, wj = self._h_data(i, j, z, wi, wj)
            state = (z, h, dh, gi, di, dj, wi, wj)
            if abs(h) <= 1e-12:
                return state
            if abs(dh) == 0.0 or not np.isfinite(abs(dh)):
                return None
            dz = -h * dh / abs(dh) ** 2
            if abs(dz) > 0.1 * self.scale:
                dz *= 0.1 * self.scale / abs(dz)
            z += dz
        return state if abs(state[1]) <= 1e-11 else None

    def _bracket_touch(self, i: int, j: int):
        """Bisect the level at which the clipped reflected curves first
        meet; returns (t_separated, t_touching, seed_point) or None."""
        t_lo, sep_lo = None, None
        t_hi = None
        for k in range(-20, 13):
            t = 2.0 ** (0.5 * k)
            sep = self._separation(i, j, t)
            if sep is None:
                if t_lo is not None:
                    break  # curves left the wedge without meeting
                continue
            if sep[0] > 0.0:
                t_lo, sep_lo = t, sep
            else:
                t_hi = t
                break
        if t_hi is None:
            return None
        if t_lo is None:
            # touching at the bottom of the ladder already; ties start
            # essentially at the boundary level
            t_lo = 1e-9
        for _ in range(18):
            t_mid = 0.5 * (t_lo + t_hi)
            sep = self._separation(i, j, t_mid)
            if sep is None or sep[0] > 0.0:
                t_lo = t_mid
                if sep is not None:
                    sep_lo = sep
            else:
                t_hi = t_mid
        if sep_lo is None:
            return None
        p, q = nearest_points(sep_lo[1], sep_lo[2])
        seed = complex(0.5 * (p.x + q.x), 0.5 * (p.y + q.y))
        return t_lo, t_hi, seed

    def _tangency_newton(self, i: int, j: int, z0: complex, t0: float,
                         wedge: Wedge) -> tuple[complex, float]:
        """Solve g_i + t = 0, g_j + t = 0, grad g_i x grad g_j = 0."""
        ri, rj = self.reflected[i], self.reflected[j]
        z, t = complex(z0), float(t0)
        wi = wj = None
        lim = 0.05 * self.scale
        for _ in range(60):
            gi, di, wi = ri.data(z, wi)
            gj, dj, wj = rj.data(z, wj)
            Hi = ri.hessian(w=wi)
            Hj = rj.hessian(w=wj)
            cr = _cross2(di, dj)
            F = np.array([gi + t, gj + t, cr * self.scale])
            gnorm = abs(di) * abs(dj) + 1e-300
            if abs(F[0]) < 1e-12 and abs(F[1]) < 1e-12 and abs(cr) < 1e-11 * gnorm:
                if not wedge.contains(z, slack=1e-7 * self.scale):
                    raise NoTangency(
                        "edges %d,%d touch outside their wedge" % (i, j))
                return z, t
            ai = np.array([di.real, di.imag])
            aj = np.array([dj.real, dj.imag])
            dcr = np.array([
                _cross2(complex(Hi[0, 0], Hi[1, 0]), dj) + _cross2(di, complex(Hj[0, 0], Hj[1, 0])),
                _cross2(complex(Hi[0, 1], Hi[1, 1]), dj) + _cross2(di, complex(Hj[0, 1], Hj[1, 1])),
            ])
            J = np.array([
                [ai[0], ai[1], 1.0],
                [aj[0], aj[1], 1.0],
                [dcr[0] * self.scale, dcr[1] * self.scale, 0.0],
            ])
            try:
                dx = np.linalg.solve(J, -F)
            except np.linalg.LinAlgError:
                break
            dz = complex(dx[0], dx[1])
            if abs(dz) > lim:
                dz *= lim / abs(dz)
                dx[2] *= lim / abs(complex(dx[0], dx[1]))
            z += dz
            t += dx[2]
        raise NoTangency(
            "tangency iteration for edges %d,%d failed to converge" % (i, j))

    # -- tracing ------------------------------------------------------------

    def _in_region(self, z: complex) -> bool:
        return abs(z - self.center) <= _REGION_FACTOR * self.scale

    def _corrector(self, i: int, j: int, z_pred: complex, nu: complex,
                   wi, wj, tol: float):
        """1-D Newton for h = 0 along the line z_pred + s nu."""
        s = 0.0
        state = None
        for _ in range(30):
            z = z_pred + s * nu
            h, dh, gi, di, dj, wi, wj = self._h_data(i, j, z, wi, wj)
            state = (z, h, dh, gi, di, dj, wi, wj)
            if abs(h) <= tol:
                return state
            slope = (dh.conjugate() * nu).real
            if slope == 0.0 or not np.isfinite(slope):
                return None
            s -= h / slope
            if abs(s) > 4.0 * self.step * self.scale:
                return None
        return state if state is not None and abs(state[1]) <= 10 * tol else None

    def _trace_from(self, i: int, j: int, z0: complex, tau0: complex,
                    wedge: Wedge, step: float):
        """March one branch from z0 in direction tau0 until it leaves
        the tracing region or its wedge.  Returns sample arrays."""
        htol = 1e-12
        smax = step * self.scale
        smin = TRACE_STEP_MIN * self.scale
        zs, ts, dis, djs, wis, wjs = [], [], [], [], [], []

        got = self._corrector(i, j, z0, 1j * tau0, None, None, htol)
        if got is None:
            raise TraceStall("no tie point near seed %r" % z0)
        z, h, dh, gi, di, dj, wi, wj = got
        tau = 1j * dh / abs(dh)
        if (tau.conjugate() * tau0).real < 0:
            tau = -tau
        zs.append(z); ts.append(-gi); dis.append(di); djs.append(dj)
        wis.append(wi); wjs.append(wj)

        end_reason = None
        h_cur = smax
        guard = 0
        while end_reason is None:
            guard += 1
            if guard > 20000:
                raise TraceStall("tie trace for edges %d,%d did not terminate"
                                 % (i, j))
            got = None
            while h_cur >= smin:
                z_pred = z + h_cur * tau
                got = self._corrector(i, j, z_pred, 1j * tau, wi, wj, htol)
                if got is not None:
                    z_new = got[0]
                    dh_new = got[2]
                    tau_new = 1j * dh_new / abs(dh_new)
                    if (tau_new.conjugate() * tau).real < 0:
                        tau_new = -tau_new
                    turn = abs(np.angle(tau_new / tau))
                    if turn <= MAX_TURN and abs(z_new - z_pred) <= 0.75 * h_cur:
                        break
                h_cur /= 2.0
                got = None
            if got is None:
                raise TraceStall(
                    "corrector failed at %r for edges %d,%d (step floor)"
                    % (z, i, j))
            z_new, h_val, dh_new, gi_new, di_new, dj_new, wi, wj = got
            tau_new = 1j * dh_new / abs(dh_new)
            if (tau_new.conjugate() * tau).real < 0:
                tau_new = -tau_new

            if not self._in_region(z_new):
                end_reason = "region"
            elif not wedge.contains(z_new, slack=0.0):
                # land on the wedge boundary by shrinking the step
                lo, hi = 0.0, 1.0
                for _ in range(50):
                    mid = 0.5 * (lo + hi)
                    zm = z + mid * (z_new - z)
                    if wedge.contains(zm, slack=0.0):
                        lo = mid
                    else:
                        hi = mid
                z_mid = z + lo * (z_new - z)
                got_b = self._corrector(i, j, z_mid, 1j * tau, wi, wj, htol)
                if got_b is not None:
                    z_new, h_val, dh_new, gi_new, di_new, dj_new, wi, wj = got_b
                end_reason = "wedge"

            zs.append(z_new); ts.append(-gi_new)
            dis.append(di_new); djs.append(dj_new)
            wis.append(wi); wjs.append(wj)
            z, tau = z_new, tau_new
            h_cur = min(smax, 2.0 * h_cur)
        return (np.array(zs), np.array(ts), np.array(dis), np.array(djs),
                np.array(wis), np.array(wjs), end_reason)

    def _seed_vertex(self, i: int, j: int):
        """Starting point and direction for the tie curve of adjacent
        edges, found by a sign bisection on a small arc around the
        shared vertex."""
        shared = self._adjacent_vertex(i, j)
        p = self.polygon
        v = p.vertex(shared)
        r0 = min(1e-3 * self.scale,
                 0.2 * min(p.side_lengths()[shared % p.n],
                           p.side_lengths()[(shared + 1) % p.n]))
        u_next = p.edge_unit((shared + 1) % p.n)
        theta = p.interior_angle(shared)
        lam_lo, lam_hi = 0.02, 0.98

        def h_at(lam):
            psi = np.angle(u_next) + lam * theta
            z = v + r0 * np.exp(1j * psi)
            h, *_ = self._h_data(i, j, z)
            return h, z

        # the tie leaves the corner strictly between the two edges, so h
        # changes sign across the sector
        h_lo, _ = h_at(lam_lo)
        h_hi, _ = h_at(lam_hi)
        if h_lo == 0.0 or h_hi == 0.0 or (h_lo < 0) == (h_hi < 0):
            raise BranchAmbiguity(
                "no sign change around vertex %d for edges %d,%d"
                % (shared, i, j))
        for _ in range(60):
            lam = 0.5 * (lam_lo + lam_hi)
            h_m, z_m = h_at(lam)
            if h_m == 0.0:
                break
            if (h_m < 0) == (h_lo < 0):
                lam_lo = lam
            else:
                lam_hi = lam
        _, z_seed = h_at(0.5 * (lam_lo + lam_hi))
        tau0 = (z_seed - v) / abs(z_seed - v)
        return v, z_seed, tau0

    def trace_zero_set(self, i: int, j: int,
                       step: float | None = None) -> list[ZeroBranch]:
        """All branches of the tie set of edges i and j, each ordered by
        increasing level from its root.  Results are cached."""
        key = self._key(i, j)
        pd = self._pair(i, j)
        st = self.step if step is None else float(step)
        if pd.branches and abs(pd.step_used - st) < 1e-15:
            return pd.branches
        kind, root, t_root = self._first_contact(i, j)
        if kind == "none":
            return []
        pd.step_used = st
        pd.branches = []
        i0, j0 = key
        if kind == "vertex":
            v, z_seed, tau0 = self._seed_vertex(i0, j0)
            zs, ts, dis, djs, wis, wjs, reason = self._trace_from(
                i0, j0, z_seed, tau0, pd.wedge, st)
            nanc = np.array([np.nan + 1j * np.nan])
            branch = ZeroBranch(
                i0, j0, "vertex",
                z=np.concatenate([[v], zs]),
                t=np.concatenate([[0.0], ts]),
                grad_i=np.concatenate([nanc, dis]),
                grad_j=np.concatenate([nanc, djs]),
                w_i=np.concatenate([nanc, wis]),
                w_j=np.concatenate([nanc, wjs]),
                end_reason=reason,
            )
            pd.branches = [branch]
        elif kind == "tangency":
            _, dh_m, _gi, di_m, dj_m, wi_m, wj_m = self._h_data(i0, j0, root)
            tau0 = 1j * dh_m / abs(dh_m)
            for kname, sgn in (("plus", 1.0), ("minus", -1.0)):
                z0 = root + sgn * max(0.25 * st, 2e-3) * self.scale * tau0
                zs, ts, dis, djs, wis, wjs, reason = self._trace_from(
                    i0, j0, z0, sgn * tau0, pd.wedge, st)
                pd.branches.append(ZeroBranch(
                    i0, j0, kname,
                    z=np.concatenate([[root], zs]),
                    t=np.concatenate([[t_root], ts]),
                    grad_i=np.concatenate([[di_m], dis]),
                    grad_j=np.concatenate([[dj_m], djs]),
                    w_i=np.concatenate([[wi_m], wis]),
                    w_j=np.concatenate([[wj_m], wjs]),
                    end_reason=reason,
                ))
        else:
            # transversal root: one branch through the seed; march both
            # ways and join the halves into a single increasing-t chain
            _, dh_r, _gi, di_r, _dj, _wi, _wj = self._h_data(i0, j0, root)
            tau0 = 1j * dh_r / abs(dh_r)
            if -(di_r.conjugate() * tau0).real < 0.0:
                tau0 = -tau0
            up = self._trace_from(i0, j0, root, tau0, pd.wedge, st)
            dn = self._trace_from(i0, j0, root, -tau0, pd.wedge, st)
            sel = slice(None, 0, -1)  # drop the duplicated seed sample
            pd.branches = [ZeroBranch(
                i0, j0, "apex",
                z=np.concatenate([dn[0][sel], up[0]]),
                t=np.concatenate([dn[1][sel], up[1]]),
                grad_i=np.concatenate([dn[2][sel], up[2]]),
                grad_j=np.concatenate([dn[3][sel], up[3]]),
                w_i=np.concatenate([dn[4][sel], up[4]]),
                w_j=np.concatenate([dn[5][sel], up[5]]),
                end_reason=up[6],
                start_reason=dn[6],
            )]
        return pd.branches

    # -- locating a level on a branch ----------------------------------------

    def branch_point(self, i: int, j: int, kind: str, t: float) -> complex:
        """Point of the (i, j) branch of the given kind at level t."""
        for br in self.trace_zero_set(i, j):
            if br.kind == kind:
                return self._point_on(br, t)
        raise OutOfRange("no %r branch for edges %d,%d" % (kind, i, j))

    def branch_state(self, i: int, j: int, kind: str, t: float):
        """(point, grad_i, grad_j, w_i, w_j) at level t, indices sorted.

        The w values are the circle preimages of the two reflected
        points.  At the root of a vertex branch (t = 0) the gradients
        diverge and both preimages equal the prevertex of the shared
        polygon corner.
        """
        i0, j0 = self._key(i, j)
        for br in self.trace_zero_set(i0, j0):
            if br.kind == kind:
                z, di, dj, wi, wj = self._locate(br, t)
                if wi is None or not np.isfinite(wi):
                    shared = self._adjacent_vertex(i0, j0)
                    wv = complex(self.emap.prevertices[shared])
                    wi = wj = wv
                return z, di, dj, complex(wi), complex(wj)
        raise OutOfRange("no %r branch for edges %d,%d" % (kind, i0, j0))

    def _point_on(self, br: ZeroBranch, t: float) -> complex:
        return self._locate(br, t)[0]

    def _locate(self, br: ZeroBranch, t: float):
        """(point, grad_i, grad_j, w_i, w_j) on the branch at level t."""
        ts = br.t
        if not np.all(np.diff(ts) > -1e-9):
            raise DescentViolation(
                "level not monotone along edges %d,%d branch %s"
                % (br.i, br.j, br.kind))
        if t < ts[0] - 1e-9 or t > ts[-1] + 1e-9:
            raise OutOfRange(
                "level %.6g outside branch range [%.6g, %.6g]"
                % (t, ts[0], ts[-1]))
        t = min(max(t, ts[0]), ts[-1])
        if t - ts[0] < 1e-12:
            # the 2-D solve degenerates at a root point: gradients blow
            # up at a vertex and are parallel at a tangency
            return (br.top, complex(br.grad_i[0]), complex(br.grad_j[0]),
                    complex(br.w_i[0]), complex(br.w_j[0]))

        k = int(np.searchsorted(ts, t))
        k = min(max(k, 1), len(ts) - 1)
        lam = (t - ts[k - 1]) / max(ts[k] - ts[k - 1], 1e-300)
        z = br.z[k - 1] + lam * (br.z[k] - br.z[k - 1])
        wi = br.w_i[k] if np.isfinite(br.w_i[k]) else None
        wj = br.w_j[k] if np.isfinite(br.w_j[k]) else None
        if k == 1 and br.kind in ("vertex", "plus", "minus") and lam < 1.0:
            # below the first sample the point leaves the root like
            # (t - t_root)^p: p = (2 pi - corner angle)/pi at a polygon
            # vertex, p = 1/2 at a tangency; seed accordingly
            if br.kind == "vertex":
                shared = self._adjacent_vertex(br.i, br.j)
                p = (2.0 * np.pi - self.polygon.interior_angle(shared)) / np.pi
                th0 = float(self.emap.prevertex_angles[shared])
            else:
                p = 0.5
                th0 = float(np.angle(br.w_i[0]))
            z = br.top + (br.z[1] - br.top) * lam ** p
            scl = lam ** min(p, 1.0)
            th_i = th0 + (np.angle(br.w_i[1] / np.exp(1j * th0))) * scl
            th_j = th0 + (np.angle(br.w_j[1] / np.exp(1j * th0))) * scl
            wi = np.exp(t + 1j * th_i)
            wj = np.exp(t + 1j * th_j)
        # Newton on (g_i + t, g_j + t) in z
        for _ in range(40):
            gi, di, wi = self.reflected[br.i].data(z, wi)
            gj, dj, wj = self.reflected[br.j].data(z, wj)
            F = np.array([gi + t, gj + t])
            if max(abs(F[0]), abs(F[1])) < 1e-12:
                return z, di, dj, wi, wj
            J = np.array([[di.real, di.imag], [dj.real, dj.imag]])
            det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
            if abs(det) < 1e-12 * (abs(di) * abs(dj) + 1e-300):
                break  # gradients near parallel close to the root
            dx = np.linalg.solve(J, -F)
            dz = complex(dx[0], dx[1])
            if abs(dz) > 0.05 * self.scale:
                dz *= 0.05 * self.scale / abs(dz)
            z += dz
        # fall back to the polyline interpolation near-degenerate spots
        return z, di, dj, wi, wj

    # -- strict descent check --------------------------------------------------

    def check_strict_descent(self, sampling_step: float | None = None,
                             margin_tol: float = MARGIN_TOL) -> DescentReport:
        """Scan every tie branch for points with parallel gradients and
        require the gradients anti-parallel there.

        Candidate points are samples where the normalized cross product
        of the two gradients falls below a threshold, plus refined sign
        changes of the cross product between samples; tangency roots
        are candidates by construction.  Level monotonicity along each
        branch is checked as well.  Sampling evidence, not a proof.
        """
        n = self.polygon.n
        st = self.step if sampling_step is None else float(sampling_step)
        near, violations, inconclusive, skipped = [], [], [], []
        if st > 5.0 * TRACE_STEP:
            # steps are fractions of the diameter; past 5x the default
            # the samples are too sparse to support a pass verdict
            inconclusive.append((-1, -1, "sampling", 0j,
                                 "step %.3g exceeds %.3g of the diameter"
                                 % (st, 5.0 * TRACE_STEP)))
        checked = 0
        for i in range(n):
            for j in range(i + 1, n):
                branches = self.trace_zero_set(i, j, step=st)
                if not branches:
                    skipped.append((i, j))
                    continue
                for br in branches:
                    checked += 1
                    self._scan_branch(br, margin_tol, near, violations,
                                      inconclusive)
        margin = min((-d for (_i, _j, _k, _z, d) in near), default=np.inf)
        if violations:
            verdict = "fail"
        elif inconclusive or skipped:
            verdict = "inconclusive"
        else:
            verdict = "pass"
        return DescentReport(verdict == "pass", verdict, float(margin),
                             margin_tol, st, checked, near, violations,
                             inconclusive, skipped)

    def _classify(self, br: ZeroBranch, z: complex, ndot: float, tol: float,
                  near: list, viol: list, inc: list) -> None:
        near.append((br.i, br.j, br.kind, complex(z), float(ndot)))
        if ndot >= tol:
            viol.append((br.i, br.j, br.kind, complex(z), float(ndot),
                         "parallel gradients"))
        elif ndot >= -tol:
            inc.append((br.i, br.j, br.kind, complex(z),
                        "gradient dot inside tolerance band"))

    def _scan_branch(self, br: ZeroBranch, tol: float,
                     near: list, viol: list, inc: list) -> None:
        di, dj = br.grad_i, br.grad_j
        norm = np.abs(di) * np.abs(dj)
        with np.errstate(invalid="ignore", divide="ignore"):
            ncr = (di.real * dj.imag - di.imag * dj.real) / norm
            ndot = (di.real * dj.real + di.imag * dj.imag) / norm

        # a tangency root is a parallel point by construction; record it
        # once per pair (the sibling branch shares it)
        if br.kind == "plus":
            self._classify(br, br.top, ndot[0], tol, near, viol, inc)
        k_lo = 0 if br.kind == "apex" else 1

        covered = np.zeros(len(ncr), dtype=bool)
        for k in range(k_lo, len(ncr) - 1):
            a, b = ncr[k], ncr[k + 1]
            if not (np.isfinite(a) and np.isfinite(b)):
                continue
            if a != 0.0 and b != 0.0 and (a < 0) != (b < 0):
                covered[k] = covered[k + 1] = True
                z_par, d_par = self._refine_parallel(br, br.t[k], br.t[k + 1])
                self._classify(br, z_par, d_par, tol, near, viol, inc)
        for k in range(k_lo, len(ncr)):
            if covered[k] or not np.isfinite(ncr[k]):
                continue
            if abs(ncr[k]) <= PARALLEL_TOL:
                self._classify(br, br.z[k], ndot[k], tol, near, viol, inc)

        # level must not decrease along the branch
        drops = np.nonzero(np.diff(br.t) <= 0.0)[0]
        for k in drops:
            if (k == 0 and br.kind in ("plus", "minus")
                    and br.t[1] >= br.t[0] - 1e-11):
                continue  # the first step off a tangency is nearly flat
            seg = abs(br.z[k + 1] - br.z[k])
            if seg <= 2.0 * TRACE_STEP_MIN * self.scale:
                inc.append((br.i, br.j, br.kind, complex(br.z[k]),
                            "level flat below the refinement floor"))
            else:
                viol.append((br.i, br.j, br.kind, complex(br.z[k]),
                             float(br.t[k + 1] - br.t[k]), "level drop"))

    def _refine_parallel(self, br: ZeroBranch, ta: float, tb: float):
        """Zero of the normalized gradient cross product in (ta, tb)."""
        def f(t):
            _z, a, b = self._locate(br, t)[:3]
            return _cross2(a, b) / (abs(a) * abs(b))

        t_star = brentq(f, ta, tb, xtol=1e-13 * (1.0 + tb))
        z, a, b = self._locate(br, t_star)[:3]
        return z, (a.conjugate() * b).real / (abs(a) * abs(b))
