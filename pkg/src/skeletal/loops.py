"""Level-set loops of the reflected potentials and their measures.

A loop at level t is a cyclic chain of arcs, one per edge index, each
arc a segment of {g_j = -t} running between two tie-branch points.
Loops shrink as t grows; evolution stops at the first terminal event
(an arc collapses, two arcs touch, or a vertex runs into an arc), and
the critical loop splits there into smaller regular loops joined at
junction points.  The loop measure is the outward flux through the
loop; the arc measure is the flux absorbed by a tie branch while the
loop sweeps past it.  Together they satisfy an exact mass balance.

Arcs are parametrized by the circle angle of the conformal preimage of
their edge reflection.  In that variable the loop-measure density is
the constant 1/(2 pi), so arc masses reduce to angle spans; sample
points only matter for evaluating potentials of the measure later.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.spatial import cKDTree

from .errors import (
    BranchExhausted,
    CrossingMatching,
    DescentViolation,
    LoopError,
    NoTangency,
    NotCritical,
    OutOfRange,
    ReflectionInsideDomain,
)
from .zerosets import ZeroSetSystem

TWO_PI = 2.0 * np.pi

TURN_RES = 1e-2        # max tangent turning between arc samples, radians
EPS_GEOM = 1e-7        # coincidence threshold, fraction of the map scale
NEAR_ZONE = 5e-2       # candidate refinement starts at this gap fraction
EVENT_MERGE = 1e-9     # events closer than this in t are simultaneous
ANGLE_FLOOR = 1e-6     # internal angles must stay below pi minus this
_CUSP_SLACK = 0.15     # turns this close to -pi are read as +pi cusps


@dataclass(frozen=True, order=True)
class BranchRef:
    """Reference to one tie branch: sorted edge pair plus branch kind."""

    i: int
    j: int
    kind: str

    @property
    def pair(self) -> tuple[int, int]:
        return (self.i, self.j)

    def other(self, edge: int) -> int:
        if edge == self.i:
            return self.j
        if edge == self.j:
            return self.i
        raise ValueError("edge %d not in branch pair (%d, %d)"
                         % (edge, self.i, self.j))


def branch_ref(i: int, j: int, kind: str, n: int | None = None) -> BranchRef:
    if n is not None:
        i %= n
        j %= n
    if i > j:
        i, j = j, i
    return BranchRef(i, j, kind)


@dataclass
class LoopArc:
    """Closed segment of {g_edge = -t} between two tie-branch points."""

    t: float
    left: BranchRef
    edge: int
    right: BranchRef
    theta: tuple[float, float]   # unwrapped preimage angles, theta[1] >= theta[0]
    z: np.ndarray                # complex samples, left endpoint first

    @property
    def span(self) -> float:
        return self.theta[1] - self.theta[0]

    @property
    def chord(self) -> float:
        return float(abs(self.z[-1] - self.z[0]))

    @property
    def length(self) -> float:
        return float(np.abs(np.diff(self.z)).sum())

    def degenerate(self, eps: float) -> bool:
        return self.chord < eps


@dataclass
class _EventRec:
    kind: str                # "merge" | "contact" | "collision"
    t: float
    z: complex
    where: tuple             # merge: (arc,); contact: (arc_a, arc_b);
                             # collision: (vertex, arc)


@dataclass
class Loop:
    """Cyclic chain of level arcs; arc k runs from vertex k to k+1."""

    system: ZeroSetSystem
    t: float
    branches: tuple[BranchRef, ...]
    edges: tuple[int, ...]
    arcs: list[LoopArc]
    status: str = "regular"            # "regular" | "critical" | "point"
    events: list[_EventRec] = field(default_factory=list)
    collapse_point: complex | None = None

    @property
    def m(self) -> int:
        return len(self.edges)

    def vertex(self, k: int) -> complex:
        return complex(self.arcs[k % self.m].z[0])

    def vertices(self) -> np.ndarray:
        return np.array([a.z[0] for a in self.arcs])

    def polyline(self) -> np.ndarray:
        """Closed sample chain (first point not repeated)."""
        return np.concatenate([a.z[:-1] for a in self.arcs])

    def signed_area(self) -> float:
        p = self.polyline()
        q = np.roll(p, -1)
        return 0.5 * float(np.sum(p.real * q.imag - p.imag * q.real))

    def contains(self, pts) -> np.ndarray:
        from matplotlib.path import Path

        p = self.polyline()
        path = Path(np.column_stack([p.real, p.imag]), closed=False)
        zz = np.atleast_1d(np.asarray(pts, complex))
        inside = path.contains_points(np.column_stack([zz.real, zz.imag]))
        return inside if np.asarray(pts).shape != () else bool(inside[0])


@dataclass
class Junction:
    """Point where two loops of a decomposition meet."""

    z: complex
    t: float
    kind: str                  # "contact" | "collision" | "merge"
    loops: tuple[int, int]     # indices into the children (repeats allowed)


@dataclass
class LoopCheck:
    """Outcome of the regularity test; condition numbers follow the
    loop definition: 1 Jordan/orientation, 2 arc lengths, 3 outward
    gradients, 4 internal angles."""

    regular: bool
    condition: int | None
    detail: str
    min_turn: float


@dataclass
class DiscreteMeasure:
    """Quadrature atoms standing for a positive measure."""

    points: np.ndarray
    weights: np.ndarray
    tags: np.ndarray          # "boundary" | "skeleton" per atom

    def __post_init__(self):
        self.points = np.asarray(self.points, complex)
        self.weights = np.asarray(self.weights, float)
        self.tags = np.asarray(self.tags)
        if self.weights.size and self.weights.min() < -1e-12:
            raise ValueError("negative quadrature weight %g"
                             % self.weights.min())
        np.clip(self.weights, 0.0, None, out=self.weights)

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    @staticmethod
    def empty() -> "DiscreteMeasure":
        return DiscreteMeasure(np.empty(0, complex), np.empty(0),
                               np.empty(0, dtype="<U8"))

    def __add__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        return DiscreteMeasure(
            np.concatenate([self.points, other.points]),
            np.concatenate([self.weights, other.weights]),
            np.concatenate([self.tags, other.tags]))


# -- arc sampling -----------------------------------------------------------


def _edge_state(system: ZeroSetSystem, ref: BranchRef, edge: int, t: float):
    """(point, preimage angle) of a branch point, on the given edge's
    level-curve parametrization."""
    z, _di, _dj, wi, wj = system.branch_state(ref.i, ref.j, ref.kind, t)
    w = wi if edge == ref.i else wj
    return z, float(np.angle(w))


def _sample_span(system: ZeroSetSystem, t: float, edge: int,
                 tha: float, thb: float, turn_res: float = TURN_RES
                 ) -> np.ndarray:
    """Samples of {g_edge = -t} over [tha, thb], refined until adjacent
    tangents turn by at most turn_res and chords stay short."""
    rg = system.reflected[edge]
    span = thb - tha
    if span <= 1e-12:
        return rg.level_curve(t, np.array([tha, thb]))
    n0 = max(9, int(np.ceil(span / (5.0 * turn_res))) + 1)
    th = np.linspace(tha, thb, n0)
    cap = 4.0 * turn_res * system.scale
    for _ in range(14):
        z = rg.level_curve(t, th)
        tang = rg.level_tangent(t, th)
        mags = np.abs(tang)
        ok = mags > 1e-13 * (mags.max() + 1e-300)
        ang = np.angle(np.where(ok, tang, 1.0))
        for k in np.nonzero(~ok)[0]:           # corner endpoints at t = 0
            ang[k] = ang[k - 1] if k > 0 else ang[min(k + 1, len(ang) - 1)]
        turn = np.abs(np.angle(np.exp(1j * np.diff(ang))))
        bad = (turn > turn_res) | (np.abs(np.diff(z)) > cap)
        if not bad.any():
            return z
        mid = 0.5 * (th[:-1][bad] + th[1:][bad])
        th = np.sort(np.concatenate([th, mid]))
    return rg.level_curve(t, th)


def _make_arc(system: ZeroSetSystem, t: float, edge: int,
              left: BranchRef, right: BranchRef,
              tha: float, thb: float, turn_res: float = TURN_RES) -> LoopArc:
    z = _sample_span(system, t, edge, tha, thb, turn_res)
    return LoopArc(t, left, edge, right, (tha, thb), z)


def _build_loop(system: ZeroSetSystem, t: float,
                branches: tuple[BranchRef, ...], edges: tuple[int, ...],
                hints: list[float] | None = None,
                status: str = "regular",
                turn_res: float = TURN_RES) -> Loop:
    """Assemble the loop at level t from branch references.

    ``hints`` carries the previous angle spans so the mod-2pi branch of
    each span follows the loop continuously.
    """
    m = len(edges)
    if len(branches) != m:
        raise ValueError("need one branch per arc")
    ends = []
    for k in range(m):
        if edges[k] not in branches[k].pair or edges[k] not in branches[(k + 1) % m].pair:
            raise ValueError("edge %d not shared by its end branches" % edges[k])
        za, tha = _edge_state(system, branches[k], edges[k], t)
        zb, thb = _edge_state(system, branches[(k + 1) % m], edges[k], t)
        ends.append((za, tha, zb, thb))
    arcs = []
    for k, (za, tha, zb, thb) in enumerate(ends):
        span = (thb - tha) % TWO_PI
        if hints is not None:
            options = [s for s in (span - TWO_PI, span, span + TWO_PI)
                       if s >= -1e-12]
            span = max(min(options, key=lambda s: abs(s - hints[k])), 0.0)
        elif span > TWO_PI - 1e-9 and abs(zb - za) < EPS_GEOM * system.scale:
            span = 0.0
        arcs.append(_make_arc(system, t, edges[k], branches[k],
                              branches[(k + 1) % m], tha, tha + span,
                              turn_res))
    return Loop(system, t, tuple(branches), tuple(edges), arcs, status)


def boundary_loop(system: ZeroSetSystem) -> Loop:
    """The level-zero loop whose arcs are the polygon edges."""
    n = system.polygon.n
    branches = tuple(branch_ref(k - 1, k, "vertex", n) for k in range(n))
    return _build_loop(system, 0.0, branches, tuple(range(n)))


def advance_loop(loop: Loop, t: float) -> Loop:
    """Rebuild the loop at a higher level with the same combinatorics.

    Only meaningful strictly below the loop's first event; past it the
    branch windows run out (OutOfRange) or the result fails the
    regularity check.
    """
    if t < loop.t - 1e-12:
        raise OutOfRange("cannot advance from t=%g back to t=%g"
                         % (loop.t, t))
    return _build_loop(loop.system, t, loop.branches, loop.edges,
                       hints=[a.span for a in loop.arcs])


# -- regularity -------------------------------------------------------------


def _arc_angle_of(system: ZeroSetSystem, arc: LoopArc, z: complex) -> float:
    """Preimage angle of a point assumed to lie on the arc's level curve,
    unwrapped into the arc's angle window."""
    rg = system.reflected[arc.edge]
    idx = int(np.argmin(np.abs(arc.z - z)))
    guess = arc.theta[0] + arc.span * idx / max(len(arc.z) - 1, 1)
    w = system.emap.inverse(complex(rg.reflect(z)),
                            w0=np.exp(arc.t + 1j * guess))
    th = float(np.angle(w))
    mid = 0.5 * (arc.theta[0] + arc.theta[1])
    th += TWO_PI * np.round((mid - th) / TWO_PI)
    return th


def _arc_covers(system: ZeroSetSystem, arc: LoopArc, z: complex,
                slack: float = 1e-7) -> bool:
    try:
        th = _arc_angle_of(system, arc, z)
    except Exception:
        return False
    return arc.theta[0] - slack <= th <= arc.theta[1] + slack


def _tangent_at(system: ZeroSetSystem, arc: LoopArc, theta: float) -> complex:
    tau = complex(system.reflected[arc.edge].level_tangent(arc.t, theta))
    if abs(tau) < 1e-300:
        return 0.0j
    return tau / abs(tau)


def _vertex_turns(loop: Loop) -> np.ndarray:
    """Left-turn angle at each loop vertex; near-reversals count as +pi
    cusps.  Internal angle = pi - turn."""
    sysm = loop.system
    m = loop.m
    turns = np.empty(m)
    for k in range(m):
        prev = loop.arcs[(k - 1) % m]
        nxt = loop.arcs[k]
        if loop.t == 0.0:
            tin = sysm.polygon.edge_unit(prev.edge)
            tout = sysm.polygon.edge_unit(nxt.edge)
        else:
            tin = _tangent_at(sysm, prev, prev.theta[1])
            tout = _tangent_at(sysm, nxt, nxt.theta[0])
        if tin == 0.0 or tout == 0.0:
            turns[k] = np.pi    # collapsed tangent data: treat as cusp
            continue
        turn = float(np.angle(tout / tin))
        if turn < -np.pi + _CUSP_SLACK:
            turn += TWO_PI
        turns[k] = turn
    return turns


def _sibling_points(system: ZeroSetSystem, p: int, q: int, t: float):
    """All tie-branch points of the pair (p, q) at level t."""
    pts = []
    for br in system.trace_zero_set(p, q):
        if br.covers(t):
            pts.append((br.kind, complex(system.branch_point(p, q, br.kind, t))))
    return pts


def is_regular_loop(loop: Loop) -> LoopCheck:
    """Check the four conditions of a regular loop; diagnostics name the
    first violated one."""
    sysm = loop.system
    eps = EPS_GEOM * sysm.scale
    m = loop.m
    failures: list[tuple[int, str]] = []

    if m < 2:
        return LoopCheck(False, 1, "fewer than two arcs", 0.0)

    # (2) positive arc lengths
    for k, a in enumerate(loop.arcs):
        if a.degenerate(eps):
            failures.append((2, "arc %d (edge %d) has coincident endpoints"
                             % (k, a.edge)))
            break

    # (1) Jordan + counter-clockwise: arcs of one loop can only meet at
    # tie-branch points of their edge pair, so intersection tests reduce
    # to angle-window containment of those points
    if loop.signed_area() <= 0.0:
        failures.append((1, "loop is not counter-clockwise"))
    else:
        hit = None
        guard = 0.02 * sysm.scale
        for a in range(m):
            for b in range(a + 1, m):
                adjacent = (b - a == 1) or (a == 0 and b == m - 1)
                arc_a, arc_b = loop.arcs[a], loop.arcs[b]
                if arc_a.edge == arc_b.edge:
                    continue    # segments of one Jordan level curve
                shared = {complex(arc_a.z[0]), complex(arc_a.z[-1])} if adjacent else set()
                # arcs further apart than the sampling sag cannot meet;
                # only close pairs need the exact tie-point test
                if adjacent:
                    v = arc_a.z[-1] if abs(arc_a.z[-1] - arc_b.z[0]) < 10 * eps \
                        else arc_a.z[0]
                    keep_a = np.abs(arc_a.z - v) > 0.25 * max(arc_a.chord, eps)
                    keep_b = np.abs(arc_b.z - v) > 0.25 * max(arc_b.chord, eps)
                    if keep_a.sum() < 2 or keep_b.sum() < 2:
                        continue
                    far = _arc_gap(LoopArc(arc_a.t, arc_a.left, arc_a.edge,
                                           arc_a.right, arc_a.theta,
                                           arc_a.z[keep_a]),
                                   LoopArc(arc_b.t, arc_b.left, arc_b.edge,
                                           arc_b.right, arc_b.theta,
                                           arc_b.z[keep_b])) > guard
                else:
                    far = _arc_gap(arc_a, arc_b) > guard
                if far:
                    continue
                for kind, zp in _sibling_points(sysm, arc_a.edge, arc_b.edge, loop.t):
                    if adjacent and any(abs(zp - s) < 10 * eps for s in shared):
                        continue
                    if (_arc_covers(sysm, arc_a, zp) and
                            _arc_covers(sysm, arc_b, zp)):
                        hit = (a, b, zp)
                        break
                if hit:
                    break
            if hit:
                break
        if hit:
            failures.append((1, "arcs %d and %d cross near %s"
                             % (hit[0], hit[1], hit[2])))

    # (3) gradient points outside: spot check at arc midpoints (the arc
    # orientation guarantees it analytically; this guards mis-stitching)
    for k, a in enumerate(loop.arcs):
        if a.degenerate(eps) or len(a.z) < 3:
            continue
        mid = len(a.z) // 2
        tau = a.z[mid + 1] - a.z[mid - 1]
        try:
            grad = sysm.reflected[a.edge].gradient(complex(a.z[mid]))
        except ReflectionInsideDomain:
            failures.append((3, "arc %d left the reflection domain" % k))
            break
        cross = tau.real * grad.imag - tau.imag * grad.real
        if cross >= 0.0:
            failures.append((3, "gradient points inside on arc %d" % k))
            break

    # (4) internal angles in [0, pi)
    turns = _vertex_turns(loop)
    k_min = int(np.argmin(turns))
    if turns[k_min] <= ANGLE_FLOOR:
        failures.append((4, "internal angle at vertex %d reached pi" % k_min))

    if failures:
        cond, detail = min(failures)
        return LoopCheck(False, cond, detail, float(turns.min()))
    return LoopCheck(True, None, "regular", float(turns.min()))


# -- evolution to the critical time -----------------------------------------


def _triple_tie(system: ZeroSetSystem, a: int, b: int, c: int, z0: complex):
    """Point with g_a = g_b = g_c, Newton from z0; (z, t) or None."""
    z = complex(z0)
    wa = wb = wc = None
    for _ in range(60):
        try:
            ga, da, wa = system.reflected[a].data(z, wa)
            gb, db, wb = system.reflected[b].data(z, wb)
            gc, dc, wc = system.reflected[c].data(z, wc)
        except ReflectionInsideDomain:
            return None
        f1, f2 = ga - gb, gb - gc
        if max(abs(f1), abs(f2)) < 1e-13:
            return z, -float(ga + gb + gc) / 3.0
        r1, r2 = da - db, db - dc
        det = r1.real * r2.imag - r1.imag * r2.real
        if abs(det) < 1e-14 * (abs(r1) * abs(r2) + 1e-300):
            return None
        dx = (-f1 * r2.imag + f2 * r1.imag) / det
        dy = (-f2 * r1.real + f1 * r2.real) / det
        dz = complex(dx, dy)
        step = 0.05 * system.scale
        if abs(dz) > step:
            dz *= step / abs(dz)
        z += dz
    return None


def _arc_gap(a: LoopArc, b: LoopArc) -> float:
    pa = np.column_stack([a.z.real, a.z.imag])
    pb = np.column_stack([b.z.real, b.z.imag])
    if len(pa) > len(pb):
        pa, pb = pb, pa
    d, _ = cKDTree(pb).query(pa)
    return float(d.min())


def _vertex_arc_gap(v: complex, arc: LoopArc) -> float:
    return float(np.abs(arc.z - v).min())


def _monitor(loop: Loop):
    """(min arc chord, min non-adjacent arc gap, min vertex-arc gap,
    min vertex turn)."""
    m = loop.m
    chords = [a.chord for a in loop.arcs]
    gap = np.inf
    for a in range(m):
        for b in range(a + 2, m):
            if a == 0 and b == m - 1:
                continue
            gap = min(gap, _arc_gap(loop.arcs[a], loop.arcs[b]))
    vgap = np.inf
    for k in range(m):
        v = loop.vertex(k)
        for l in range(m):
            if l in ((k - 1) % m, k % m):
                continue
            vgap = min(vgap, _vertex_arc_gap(v, loop.arcs[l]))
    return min(chords), gap, vgap, float(_vertex_turns(loop).min())


def _candidates(loop: Loop, blacklist: set) -> list[_EventRec]:
    """Exactly refined upcoming events within the near zone."""
    sysm = loop.system
    near = NEAR_ZONE * sysm.scale
    t_now = loop.t
    m = loop.m
    out: list[_EventRec] = []

    def push(kind, sol, where):
        if sol is None:
            return
        z, t_ev = sol
        if t_ev < t_now - EVENT_MERGE:
            return
        key = (kind, where, round(t_ev, 12))
        if key in blacklist:
            return
        out.append(_EventRec(kind, t_ev, z, where))

    for k, arc in enumerate(loop.arcs):
        if arc.chord < near and m >= 3:
            a = loop.arcs[(k - 1) % m].edge
            c = loop.arcs[(k + 1) % m].edge
            if a != c:
                z0 = 0.5 * (arc.z[0] + arc.z[-1])
                push("merge", _triple_tie(sysm, a, arc.edge, c, z0), (k,))
            else:
                # both endpoints are branches of one pair: they merge at
                # the pair's tangency root
                try:
                    push("merge", sysm.find_max_point(a, arc.edge), (k,))
                except NoTangency:
                    pass

    for a in range(m):
        for b in range(a + 2, m):
            if a == 0 and b == m - 1:
                continue
            arc_a, arc_b = loop.arcs[a], loop.arcs[b]
            if _arc_gap(arc_a, arc_b) >= near:
                continue
            try:
                z_m, t_m = sysm.find_max_point(arc_a.edge, arc_b.edge)
            except NoTangency:
                continue
            push("contact", (z_m, t_m), (a, b))

    for k in range(m):
        v = loop.vertex(k)
        va, vb = loop.branches[k].pair
        for l in range(m):
            if l in ((k - 1) % m, k % m):
                continue
            arc = loop.arcs[l]
            if arc.edge in (va, vb):
                continue
            if _vertex_arc_gap(v, arc) >= near:
                continue
            push("collision", _triple_tie(sysm, va, vb, arc.edge, v),
                 (k, l))
    return out


def _interior_hit(loop_c: Loop, arc_idx: int, z: complex, eps: float) -> bool:
    """True when z sits on the arc strictly between its endpoints.

    Endpoint hits are vertex merges in disguise and must not count as
    contacts or collisions.
    """
    arc = loop_c.arcs[arc_idx]
    if abs(z - arc.z[0]) < 50 * eps or abs(z - arc.z[-1]) < 50 * eps:
        return False
    return _arc_covers(loop_c.system, arc, z, slack=1e-6)


def _confirm_events(loop_c: Loop, cands: list[_EventRec], eps: float):
    """Keep the candidates that manifest on the loop built at t_c."""
    confirmed = []
    for ev in cands:
        if ev.t > loop_c.t + EVENT_MERGE:
            continue
        if ev.kind == "merge":
            k = ev.where[0]
            if loop_c.arcs[k].chord < 10 * eps:
                confirmed.append(ev)
        elif ev.kind == "contact":
            a, b = ev.where
            if (_interior_hit(loop_c, a, ev.z, eps) and
                    _interior_hit(loop_c, b, ev.z, eps)):
                confirmed.append(ev)
        else:
            k, l = ev.where
            if (abs(loop_c.vertex(k) - ev.z) < 10 * eps and
                    _interior_hit(loop_c, l, ev.z, eps)):
                confirmed.append(ev)
    # degeneracies can arrive without their own candidate when another
    # event fired first: flag them so the decomposition sees them
    flagged = {ev.where[0] for ev in confirmed if ev.kind == "merge"}
    for k, arc in enumerate(loop_c.arcs):
        if k not in flagged and arc.chord < 10 * eps:
            confirmed.append(_EventRec(
                "merge", loop_c.t, complex(0.5 * (arc.z[0] + arc.z[-1])), (k,)))
    return confirmed


def evolve_to_critical(loop: Loop, dt_init: float | None = None
                       ) -> tuple[float, Loop]:
    """Advance the loop until the first terminal event.

    Returns (t_c, critical loop).  The critical loop carries the refined
    events; when every vertex lands on one point its status is "point"
    and the collapse point is set.
    """
    if loop.status != "regular":
        raise LoopError("evolution needs a regular loop, got %r" % loop.status)
    sysm = loop.system
    eps = EPS_GEOM * sysm.scale
    if loop.m == 2:
        raise LoopError("two-arc loops do not evolve")

    t = loop.t
    cur = loop
    dt = dt_init if dt_init is not None else 0.02 * (0.1 + t)
    prev_margin = None
    blacklist: set = set()

    for _ in range(100000):
        cands = _candidates(cur, blacklist)
        if cands:
            t_c = min(ev.t for ev in cands)
            due = [ev for ev in cands if ev.t <= t_c + EVENT_MERGE]
            crit = _build_loop(sysm, t_c, cur.branches, cur.edges,
                               hints=[a.span for a in cur.arcs])

            confirmed = _confirm_events(crit, due, eps)
            if not confirmed:
                for ev in due:
                    blacklist.add((ev.kind, ev.where, round(ev.t, 12)))
                continue
            verts = crit.vertices()
            spread = np.abs(verts - verts.mean()).max()
            if spread < 10 * eps:
                z0 = complex(verts.mean())
                uniq = list(dict.fromkeys(crit.edges))
                sol = (_triple_tie(sysm, uniq[0], uniq[1], uniq[2], z0)
                       if len(uniq) >= 3 else None)
                crit.status = "point"
                crit.collapse_point = sol[0] if sol else z0
                if sol:
                    crit.t = sol[1]
            else:
                crit.status = "critical"
            crit.events = confirmed
            return crit.t, crit

        t_trial = t + dt
        try:
            nxt = _build_loop(sysm, t_trial, cur.branches, cur.edges,
                              hints=[a.span for a in cur.arcs],
                              turn_res=8.0 * TURN_RES)
        except OutOfRange as exc:
            dt *= 0.5
            if dt < 1e-12 * (1.0 + t):
                raise BranchExhausted(
                    "branch range ended at t=%.12g before any loop event: %s"
                    % (t, exc)) from exc
            continue
        chord, gap, vgap, turn = _monitor(nxt)
        if turn <= ANGLE_FLOOR:
            raise DescentViolation(
                "internal angle reached pi at t=%.12g near %s"
                % (t_trial, nxt.vertex(int(np.argmin(_vertex_turns(nxt))))))
        margin = min(chord, gap, vgap)
        if margin < eps:
            # inside an event without a refined candidate: halve back
            dt *= 0.25
            if dt < 1e-12 * (1.0 + t):
                raise LoopError(
                    "monitors collapsed at t=%.12g with no refinable event"
                    % t_trial)
            continue
        cur, t = nxt, t_trial
        if prev_margin is not None and prev_margin > margin:
            rate = (prev_margin - margin) / dt
            dt = min(2.0 * dt, max(0.4 * margin / rate, 1e-6))
        else:
            dt *= 2.0
        dt = min(dt, 0.2 * (0.1 + t))
        prev_margin = margin
    raise LoopError("evolution failed to terminate")


# -- decomposition of a critical loop ----------------------------------------


def _junction_ref(system: ZeroSetSystem, p: int, q: int, zj: complex,
                  t_c: float, inside_poly: np.ndarray | None) -> BranchRef:
    """Branch of the pair (p, q) running through the junction point.

    When both branches of a tangency pass (they share the root), the one
    descending into the polygon traced by ``inside_poly`` wins.
    """
    p, q = min(p, q), max(p, q)
    tol = 1e-5 * system.scale
    hits = []
    for br in system.trace_zero_set(p, q):
        if not br.covers(t_c):
            continue
        try:
            zb = system.branch_point(p, q, br.kind, t_c)
        except OutOfRange:
            continue
        if abs(zb - zj) < tol:
            hits.append(br)
    if not hits:
        raise LoopError(
            "no tie branch of edges (%d, %d) passes the junction at %s"
            % (p, q, zj))
    if len(hits) == 1 or inside_poly is None:
        return BranchRef(p, q, hits[0].kind)
    from matplotlib.path import Path

    path = Path(np.column_stack([inside_poly.real, inside_poly.imag]))
    for br in hits:
        delta = min(1e-4 * (1.0 + t_c), 0.5 * (br.t_end - t_c))
        if delta <= 0:
            continue
        zp = system.branch_point(p, q, br.kind, t_c + delta)
        if path.contains_point((zp.real, zp.imag)):
            return BranchRef(p, q, br.kind)
    raise CrossingMatching(
        "no branch of edges (%d, %d) descends into the child at %s"
        % (p, q, zj))


def decompose_critical(loop: Loop) -> tuple[list[Loop], list[Junction]]:
    """Split a critical loop at its junctions into regular child loops.

    Degenerate arc runs contract to a single junction vertex; contact
    and collision points cut the loop in two.  The induced matching on
    the arc cycle must be non-crossing.
    """
    if loop.status != "critical":
        raise NotCritical("decomposition needs a critical loop, got %r"
                          % loop.status)
    sysm = loop.system
    eps = EPS_GEOM * sysm.scale
    t_c = loop.t
    m = loop.m

    points: dict[int, complex] = {}     # junction id -> location
    kinds: dict[int, str] = {}
    cuts: dict[int, list[tuple[int, float]]] = {}   # arc -> [(jid, theta)]
    vertex_junc: dict[int, int] = {}                # vertex -> junction id
    next_id = 0

    degenerate = [a.degenerate(10 * eps) for a in loop.arcs]
    for ev in loop.events:
        if ev.kind == "merge":
            degenerate[ev.where[0]] = True
    if all(degenerate):
        raise NotCritical("all arcs degenerate: the loop is a point")

    # maximal cyclic runs of vanished arcs contract to merge junctions
    seen: set[int] = set()
    for k in range(m):
        if not degenerate[k] or k in seen:
            continue
        p = k
        while degenerate[(p - 1) % m]:
            p = (p - 1) % m
        q = k
        while degenerate[(q + 1) % m]:
            q = (q + 1) % m
        run = {(p + s) % m for s in range((q - p) % m + 1)}
        if run & seen:
            continue
        seen |= run
        jid, next_id = next_id, next_id + 1
        points[jid] = complex(0.5 * (loop.vertex(p) + loop.vertex((q + 1) % m)))
        kinds[jid] = "merge"
        for v in list(run) + [(q + 1) % m]:
            vertex_junc[v] = jid

    for ev in loop.events:
        if ev.kind == "merge":
            continue
        jid, next_id = next_id, next_id + 1
        points[jid] = ev.z
        kinds[jid] = ev.kind
        if ev.kind == "contact":
            for arc_idx in ev.where:
                th = _arc_angle_of(sysm, loop.arcs[arc_idx], ev.z)
                cuts.setdefault(arc_idx, []).append((jid, th))
        else:
            kv, l = ev.where
            vertex_junc[kv % m] = jid
            th = _arc_angle_of(sysm, loop.arcs[l], ev.z)
            cuts.setdefault(l, []).append((jid, th))

    # alternating cycle [node, piece, node, piece, ...]: a node is
    # ("ref", BranchRef) or ("junc", id), a piece is ("piece", (arc
    # index, theta lo, theta hi)); vanished arcs contribute no piece and
    # their end vertices collapse into one junction node
    cycle: list[tuple] = []
    for k in range(m):
        if degenerate[k]:
            continue
        if k in vertex_junc:
            node = ("junc", vertex_junc[k])
        else:
            node = ("ref", loop.branches[k])
        if not cycle or cycle[-1] != node:
            cycle.append(node)
        arc = loop.arcs[k]
        lo = arc.theta[0]
        for (jid, th) in sorted(cuts.get(k, []), key=lambda c: c[1]):
            if not lo - 1e-9 <= th <= arc.theta[1] + 1e-9:
                raise CrossingMatching(
                    "cut angle %.6f escapes arc %d window" % (th, k))
            cycle.append(("piece", (arc.edge, lo, th)))
            cycle.append(("junc", jid))
            lo = th
        cycle.append(("piece", (arc.edge, lo, arc.theta[1])))
    if cycle and cycle[0] == cycle[-1]:
        cycle.pop()
    if cycle and cycle[0][0] == "piece":
        # the walk started inside a wrapped degenerate run
        cycle = cycle[-1:] + cycle[:-1]
    if len(cycle) % 2 or any(it[0] == "piece" for it in cycle[0::2]) \
            or any(it[0] != "piece" for it in cycle[1::2]):
        raise CrossingMatching("cut cycle does not alternate")

    # parenthesis cutting on junction ids appearing at two nodes
    children_raw: list[list[tuple]] = []

    def extract(cyc: list[tuple]) -> list[tuple]:
        while True:
            pos: dict[int, list[int]] = {}
            for i, it in enumerate(cyc):
                if it[0] == "junc":
                    pos.setdefault(it[1], []).append(i)
            dup = {jid: ps for jid, ps in pos.items() if len(ps) == 2}
            if not dup:
                return cyc
            chosen = None
            for jid, (a, b) in dup.items():
                if not any(it[0] == "junc" and it[1] in dup and it[1] != jid
                           for it in cyc[a + 1:b]):
                    chosen = (jid, a, b)
                    break
            if chosen is None:
                raise CrossingMatching(
                    "junction chords interleave: %s"
                    % sorted((jid, tuple(ps)) for jid, ps in dup.items()))
            jid, a, b = chosen
            children_raw.append(cyc[a:b])
            cyc = cyc[:a] + [("junc", jid)] + cyc[b + 1:]

    children_raw.append(extract(cycle))

    # assemble child loops; remember which junction ids each child holds
    children: list[Loop] = []
    child_juncs: list[list[int]] = []
    for raw in children_raw:
        if len(raw) < 2 or raw[0][0] == "piece":
            raise CrossingMatching("malformed child cycle")
        node_list = raw[0::2]
        piece_list = [it[1] for it in raw[1::2]]
        edges = tuple(seg[0] for seg in piece_list)
        mloc = len(edges)
        poly = np.concatenate(
            [_sample_span(sysm, t_c, seg[0], seg[1], seg[2])[:-1]
             for seg in piece_list])
        branches = []
        for k, it in enumerate(node_list):
            if it[0] == "ref":
                branches.append(it[1])
            else:
                e_prev = piece_list[(k - 1) % mloc][0]
                branches.append(_junction_ref(sysm, e_prev, edges[k],
                                              points[it[1]], t_c, poly))
        arcs = [_make_arc(sysm, t_c, seg[0], branches[k],
                          branches[(k + 1) % mloc], seg[1], seg[2])
                for k, seg in enumerate(piece_list)]
        children.append(Loop(sysm, t_c, tuple(branches), edges, arcs))
        child_juncs.append([it[1] for it in node_list if it[0] == "junc"])

    junctions = []
    for jid in sorted(points):
        owners = [ci for ci, js in enumerate(child_juncs) for j in js
                  if j == jid]
        if len(owners) == 1:
            owners = owners * 2
        if len(owners) != 2:
            raise CrossingMatching(
                "junction %d touches %d loops" % (jid, len(owners)))
        junctions.append(Junction(points[jid], t_c, kinds[jid],
                                  (owners[0], owners[1])))
    for child in children:
        chk = is_regular_loop(child)
        if not chk.regular:
            raise CrossingMatching(
                "decomposition produced an irregular child: condition %s, %s"
                % (chk.condition, chk.detail))
    return children, junctions


# -- measures ----------------------------------------------------------------


def _panels(a: float, b: float, grade_a: bool, grade_b: bool,
            depth: int = 32, width: float = 0.4) -> list[tuple[float, float]]:
    """Panel subdivision of [a, b], geometrically graded toward the
    flagged endpoints (singular data) and capped at the given width."""
    if b <= a:
        return []
    cuts = [a, b]
    span = b - a
    if grade_a:
        cuts += [a + span * 0.5 ** k for k in range(1, depth)]
    if grade_b:
        cuts += [b - span * 0.5 ** k for k in range(1, depth)]
    cuts = sorted(set(cuts))
    out = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        parts = max(1, int(np.ceil((hi - lo) / width)))
        edges = np.linspace(lo, hi, parts + 1)
        out += list(zip(edges[:-1], edges[1:]))
    return out


def loop_measure(loop: Loop, quad_order: int = 12) -> DiscreteMeasure:
    """Outward-flux measure of the loop: density |grad g_j| / (2 pi) per
    arclength, which is exactly d(theta) / (2 pi) in the preimage angle.

    Atoms sit on the arcs; panels are graded toward endpoints at polygon
    corners (level zero), where the map parametrization is singular.
    """
    if quad_order < 4:
        raise ValueError("quad_order must be at least 4")
    xg, wg = leggauss(quad_order)
    pts, wts = [], []
    grade = loop.t == 0.0
    for arc in loop.arcs:
        if arc.span <= 1e-14:
            continue
        rg = loop.system.reflected[arc.edge]
        for (lo, hi) in _panels(arc.theta[0], arc.theta[1], grade, grade):
            th = 0.5 * (hi - lo) * xg + 0.5 * (hi + lo)
            pts.append(rg.level_curve(loop.t, th))
            wts.append(0.5 * (hi - lo) * wg / TWO_PI)
    if not pts:
        return DiscreteMeasure.empty()
    points = np.concatenate(pts)
    weights = np.concatenate(wts)
    return DiscreteMeasure(points, weights,
                           np.full(len(points), "boundary", dtype="<U8"))


def _arc_density(system: ZeroSetSystem, ref: BranchRef, t: float) -> tuple:
    """(point, d(mass)/dt) of the tie-branch measure at level t."""
    z, di, dj, _wi, _wj = system.branch_state(ref.i, ref.j, ref.kind, t)
    diff = di - dj
    cross = abs(di.real * dj.imag - di.imag * dj.real)
    if cross < 1e-300:
        raise DescentViolation(
            "parallel gradients on branch (%d, %d, %s) at t=%.12g"
            % (ref.i, ref.j, ref.kind, t))
    return z, (abs(diff) ** 2) / (TWO_PI * cross)


def arc_measure(system: ZeroSetSystem, ref: BranchRef,
                t0: float, t1: float, quad_order: int = 12) -> DiscreteMeasure:
    """Measure swept onto the tie branch between levels t0 and t1:
    density |grad g_i - grad g_j| per arclength over 2 pi.

    A square-root substitution absorbs the inverse-square-root blowup at
    a tangency root; geometric grading handles the fractional powers at
    a polygon-vertex root.
    """
    if t1 <= t0 + 1e-14:
        return DiscreteMeasure.empty()
    branch = None
    for br in system.trace_zero_set(ref.i, ref.j):
        if br.kind == ref.kind:
            branch = br
    if branch is None:
        raise OutOfRange("no %r branch for edges %d,%d"
                         % (ref.kind, ref.i, ref.j))
    t0 = max(t0, branch.t_top)
    at_root = abs(t0 - branch.t_top) < 1e-11
    root_kind = branch.kind if at_root else "interior"

    xg, wg = leggauss(max(quad_order, 4))
    pts, wts = [], []
    if root_kind in ("plus", "minus"):
        # t = t0 + sigma^2 regularizes the tangency endpoint
        smax = np.sqrt(t1 - t0)
        for (lo, hi) in _panels(0.0, smax, False, False, width=smax / 8):
            sg = 0.5 * (hi - lo) * xg + 0.5 * (hi + lo)
            for s, w in zip(sg, 0.5 * (hi - lo) * wg):
                z, den = _arc_density(system, ref, t0 + s * s)
                pts.append(z)
                wts.append(w * den * 2.0 * s)
    else:
        # at a polygon-vertex root the density extends smoothly (its
        # leading correction is quadratic in t for every corner angle),
        # so plain panels do; nodes stay clear of the corner itself
        for (lo, hi) in _panels(t0, t1, False, False,
                                width=max((t1 - t0) / 4, 1e-12)):
            tg = 0.5 * (hi - lo) * xg + 0.5 * (hi + lo)
            for t, w in zip(tg, 0.5 * (hi - lo) * wg):
                z, den = _arc_density(system, ref, t)
                pts.append(z)
                wts.append(w * den)
    points = np.asarray(pts, complex)
    weights = np.asarray(wts, float)
    return DiscreteMeasure(points, weights,
                           np.full(len(points), "skeleton", dtype="<U8"))
