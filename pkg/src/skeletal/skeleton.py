"""Skeleton assembly and verification.

The driver runs the descent: starting from the boundary loop, each
regular loop evolves to its first critical level, sheds mass onto the
tie arcs it swept, and either collapses to a point or splits into child
loops that continue independently.  The deposited arc measures, joined
across steps and across tangency points, make up the skeleton: a tree
of analytic curves carrying a unit measure whose exterior potential
matches the equilibrium potential of the polygon.

Verification is potential matching on exterior level rings, where the
expected value is known in closed form from the capacity, plus the
structural bookkeeping: tree adjacency, the 2n - 3 arc bound, positive
interior density, and unit mass.
"""

from dataclasses import dataclass, field

import numpy as np

from .conformal import ExteriorMap, solve_exterior_map
from .errors import (
    AtomCollision,
    DescentViolation,
    IterationCap,
    PointInsideDomain,
)
from .geometry import ConvexPolygon
from .loops import (
    BranchRef,
    DiscreteMeasure,
    arc_measure,
    boundary_loop,
    decompose_critical,
    evolve_to_critical,
    loop_measure,
)
from .zerosets import DescentReport, ZeroSetSystem

# endpoints closer than this fraction of the polygon scale are the same
# tree node
NODE_TOL = 1e-6


@dataclass
class SkeletonArc:
    """One analytic curve of the skeleton.

    A tangency pair swept from its touch point is stored as a single
    arc: the two half-branches join there analytically, so ``refs`` has
    two entries and the polyline runs straight through.  ``density``
    holds |grad g_i - grad g_j| at the polyline samples; the endpoint
    values repeat the nearest interior sample (at a polygon corner the
    true limit diverges).
    """

    refs: tuple[BranchRef, ...]
    edges: tuple[int, int]
    t_range: tuple[float, float]
    polyline: np.ndarray
    density: np.ndarray
    measure: DiscreteMeasure

    @property
    def mass(self) -> float:
        return self.measure.mass

    @property
    def endpoints(self) -> tuple[complex, complex]:
        return complex(self.polyline[0]), complex(self.polyline[-1])

    def length(self) -> float:
        return float(np.abs(np.diff(self.polyline)).sum())


@dataclass
class SkeletonNode:
    """Tree vertex: a point where arcs start or end."""

    z: complex
    t: float
    kind: str                 # "corner" | "collapse" | "merge" | "collision"
    arcs: list[int] = field(default_factory=list)

    @property
    def degree(self) -> int:
        return len(self.arcs)


@dataclass
class StepRecord:
    """One evolve-and-replace step of the descent, for diagnostics."""

    t_start: float
    t_critical: float
    m: int
    status: str               # "point" | "split"
    events: tuple[str, ...]
    balance: float            # mass(start) - mass(children) - mass(arcs)


@dataclass
class Skeleton:
    polygon: ConvexPolygon
    system: ZeroSetSystem
    capacity: float
    arcs: list[SkeletonArc]
    nodes: list[SkeletonNode]
    touch_points: list[tuple[complex, float]]   # interior tangency points
    measure: DiscreteMeasure
    steps: list[StepRecord]
    descent: DescentReport | None

    @property
    def mass(self) -> float:
        return self.measure.mass

    @property
    def arc_count(self) -> int:
        return len(self.arcs)

    def node_at(self, z: complex) -> SkeletonNode | None:
        tol = NODE_TOL * self.system.scale
        for node in self.nodes:
            if abs(node.z - z) < tol:
                return node
        return None

    def adjacency(self) -> list[tuple[int, int]]:
        """(node, node) per arc, indices into ``nodes``."""
        tol = NODE_TOL * self.system.scale
        out = []
        for arc in self.arcs:
            pair = []
            for z in arc.endpoints:
                hit = [k for k, node in enumerate(self.nodes)
                       if abs(node.z - z) < tol]
                pair.append(hit[0] if hit else -1)
            out.append((pair[0], pair[1]))
        return out

    def is_tree(self) -> bool:
        """Connected and acyclic on the node/arc incidence."""
        edges = self.adjacency()
        nv = len(self.nodes)
        if any(a < 0 or b < 0 for a, b in edges):
            return False
        parent = list(range(nv))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in edges:
            ra, rb = find(a), find(b)
            if ra == rb:
                return False          # cycle
            parent[ra] = rb
        return len({find(k) for k in range(nv)}) == 1


# -- descent driver ----------------------------------------------------------


def _sweep_branch(system: ZeroSetSystem, ref: BranchRef,
                  t0: float, t1: float, quad_order: int) -> DiscreteMeasure:
    return arc_measure(system, ref, t0, t1, quad_order=quad_order)


def _merge_segments(segs: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Join abutting t-intervals; a branch swept by consecutive steps
    accumulates one contiguous range."""
    segs = sorted(segs)
    out = [list(segs[0])]
    for a, b in segs[1:]:
        if a <= out[-1][1] + 1e-9:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [(a, b) for a, b in out]


def _chebyshev_grid(a: float, b: float, n: int) -> np.ndarray:
    u = 0.5 * (1.0 - np.cos(np.linspace(0.0, np.pi, n)))
    return a + (b - a) * u


def _branch_samples(system: ZeroSetSystem, ref: BranchRef,
                    ts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(points, |grad difference|) along one branch."""
    z = np.empty(ts.size, complex)
    den = np.empty(ts.size)
    for k, t in enumerate(ts):
        pt, di, dj, _wi, _wj = system.branch_state(ref.i, ref.j, ref.kind,
                                                   float(t))
        z[k] = pt
        den[k] = abs(di - dj)
    return z, den


def _build_arc(system: ZeroSetSystem, ref: BranchRef, t0: float, t1: float,
               measure: DiscreteMeasure, samples: int = 33) -> SkeletonArc:
    ts = _chebyshev_grid(t0, t1, samples)
    z, den = _branch_samples(system, ref, ts[1:-1])
    z0 = complex(system.branch_point(ref.i, ref.j, ref.kind, t0))
    z1 = complex(system.branch_point(ref.i, ref.j, ref.kind, t1))
    poly = np.concatenate([[z0], z, [z1]])
    den = np.concatenate([[den[0]], den, [den[-1]]])
    return SkeletonArc((ref,), ref.pair, (t0, t1), poly, den, measure)


def _build_joined_arc(system: ZeroSetSystem, minus: BranchRef, plus: BranchRef,
                      t_m: float, t1_minus: float, t1_plus: float,
                      measure: DiscreteMeasure,
                      samples: int = 33) -> SkeletonArc:
    """Single analytic arc through the touch point of a tangency pair.

    Both half-branches leave the touch point like sqrt(t - t_m), so a
    grid uniform in that root coordinate samples the joined curve
    evenly.
    """
    half = max(samples // 2, 8)
    out = []
    dens = []
    for ref, t1, flip in ((minus, t1_minus, True), (plus, t1_plus, False)):
        sig = np.linspace(0.0, np.sqrt(t1 - t_m), half + 1)[1:]
        ts = t_m + sig ** 2
        z, den = _branch_samples(system, ref, ts)
        ze = complex(system.branch_point(ref.i, ref.j, ref.kind, t1))
        z[-1], den[-1] = ze, den[-1]
        if flip:
            z, den = z[::-1], den[::-1]
        out.append(z)
        dens.append(den)
    m_pt, t_star = system.find_max_point(minus.i, minus.j)
    poly = np.concatenate([out[0], [m_pt], out[1]])
    # the raw gradient difference vanishes exactly at the touch point
    # while the arclength density of the measure stays positive (the
    # branch speed diverges at the same rate); fill the joint sample by
    # interpolation so the stored profile reflects the measure
    joint = 0.5 * (dens[0][-1] + dens[1][0])
    den = np.concatenate([dens[0], [joint], dens[1]])
    return SkeletonArc((minus, plus), minus.pair,
                       (min(t1_minus, t1_plus), max(t1_minus, t1_plus)),
                       poly, den, measure)


def build_skeleton(polygon, *, quad_order: int = 12, balance_tol: float = 1e-7,
                   force: bool = False, check_descent: bool = True,
                   tol: float = 1e-10) -> Skeleton:
    """Run the full descent and assemble the skeleton.

    ``polygon`` may be a ConvexPolygon, an ExteriorMap, or a prepared
    ZeroSetSystem.  The strict-descent check runs first unless disabled;
    a failing verdict aborts with DescentViolation unless ``force`` is
    set, in which case the attempt proceeds and the report rides along
    for the verifier to flag.
    """
    if isinstance(polygon, ZeroSetSystem):
        system = polygon
    elif isinstance(polygon, ExteriorMap):
        system = ZeroSetSystem(polygon)
    else:
        system = ZeroSetSystem(solve_exterior_map(polygon, tol=tol))
    poly = system.polygon
    n = poly.n

    report: DescentReport | None = None
    if check_descent:
        report = system.check_strict_descent()
        if not report.ok and not force:
            exc = DescentViolation(
                "strict descent %s (margin %g); pass force=True to attempt "
                "anyway" % (report.verdict, report.margin))
            exc.report = report
            raise exc

    sweeps: dict[BranchRef, list[tuple[float, float]]] = {}
    deposits: dict[BranchRef, DiscreteMeasure] = {}
    nodes: list[SkeletonNode] = [
        SkeletonNode(complex(v), 0.0, "corner") for v in poly.vertices]
    touch: list[tuple[complex, float]] = []
    steps: list[StepRecord] = []

    work = [boundary_loop(system)]
    splits = 0
    while work:
        lp = work.pop()
        mu0 = loop_measure(lp, quad_order=quad_order)
        t_c, crit = evolve_to_critical(lp)

        lam = DiscreteMeasure.empty()
        for ref in crit.branches:
            piece = _sweep_branch(system, ref, lp.t, t_c, quad_order)
            lam = lam + piece
            sweeps.setdefault(ref, []).append((lp.t, t_c))
            deposits[ref] = deposits.get(ref, DiscreteMeasure.empty()) + piece

        if crit.status == "point":
            nodes.append(SkeletonNode(complex(crit.collapse_point), t_c,
                                      "collapse"))
            mu_next = DiscreteMeasure.empty()
            children = []
        else:
            splits += 1
            if splits > max(n - 2, 1):
                raise IterationCap(
                    "%d decompositions on an %d-gon exceed the splitting "
                    "budget" % (splits, n))
            children, juncs = decompose_critical(crit)
            for j in juncs:
                if j.kind == "contact":
                    touch.append((complex(j.z), j.t))
                else:
                    nodes.append(SkeletonNode(complex(j.z), j.t, j.kind))
            mu_next = DiscreteMeasure.empty()
            for ch in children:
                mu_next = mu_next + loop_measure(ch, quad_order=quad_order)
                work.append(ch)

        balance = mu0.mass - mu_next.mass - lam.mass
        steps.append(StepRecord(lp.t, t_c, lp.m,
                                "point" if crit.status == "point" else "split",
                                tuple(e.kind for e in crit.events),
                                balance))
        if abs(balance) > balance_tol:
            exc = DescentViolation(
                "mass leak %.3e at step t=%g..%g (tolerance %g)"
                % (balance, lp.t, t_c, balance_tol))
            exc.steps = steps
            raise exc

    arcs = _assemble_arcs(system, sweeps, deposits)
    _attach_arcs(system, nodes, arcs)

    total = DiscreteMeasure.empty()
    for arc in arcs:
        total = total + arc.measure
    return Skeleton(poly, system, system.emap.capacity, arcs, nodes, touch,
                    total, steps, report)


def _assemble_arcs(system: ZeroSetSystem,
                   sweeps: dict[BranchRef, list[tuple[float, float]]],
                   deposits: dict[BranchRef, DiscreteMeasure]
                   ) -> list[SkeletonArc]:
    """Merge swept segments per branch, then join tangency halves whose
    sweeps both start at the touch level."""
    ranges: dict[BranchRef, tuple[float, float]] = {}
    for ref, segs in sweeps.items():
        merged = _merge_segments(segs)
        if len(merged) != 1:
            raise DescentViolation(
                "branch %s swept in disconnected pieces %s" % (ref, merged))
        ranges[ref] = merged[0]

    arcs: list[SkeletonArc] = []
    done: set[BranchRef] = set()
    for ref in sorted(ranges, key=lambda r: (r.i, r.j, r.kind)):
        if ref in done:
            continue
        if ref.kind in ("plus", "minus"):
            twin = BranchRef(ref.i, ref.j,
                             "plus" if ref.kind == "minus" else "minus")
            if twin in ranges and twin not in done:
                t0a, t1a = ranges[ref]
                t0b, t1b = ranges[twin]
                zm, t_star = system.find_max_point(ref.i, ref.j)
                if abs(t0a - t_star) < 1e-8 and abs(t0b - t_star) < 1e-8:
                    minus, plus = ((ref, twin) if ref.kind == "minus"
                                   else (twin, ref))
                    t1m = ranges[minus][1]
                    t1p = ranges[plus][1]
                    arcs.append(_build_joined_arc(
                        system, minus, plus, t_star, t1m, t1p,
                        deposits[ref] + deposits[twin]))
                    done |= {ref, twin}
                    continue
        t0, t1 = ranges[ref]
        arcs.append(_build_arc(system, ref, t0, t1, deposits[ref]))
        done.add(ref)
    return arcs


def _attach_arcs(system: ZeroSetSystem, nodes: list[SkeletonNode],
                 arcs: list[SkeletonArc]) -> None:
    tol = NODE_TOL * system.scale
    for ai, arc in enumerate(arcs):
        for z in arc.endpoints:
            hits = [node for node in nodes if abs(node.z - z) < tol]
            for node in hits[:1]:
                node.arcs.append(ai)
    for node in nodes:
        node.arcs = sorted(set(node.arcs))


# -- potentials --------------------------------------------------------------


def potential(measure: DiscreteMeasure, z):
    """Logarithmic potential of the atom set: sum w_k log 1/|z - p_k|."""
    zz = np.atleast_1d(np.asarray(z, complex))
    if measure.points.size == 0:
        raise AtomCollision("empty measure has no potential")
    d = np.abs(zz[:, None] - measure.points[None, :])
    if d.min() < 1e-12 * (1.0 + np.abs(zz).max()):
        raise AtomCollision("evaluation point sits on a quadrature atom")
    val = -np.log(d) @ measure.weights
    return float(val[0]) if np.asarray(z).shape == () else val


def equilibrium_potential(emap: ExteriorMap, z):
    """Potential of the equilibrium measure at exterior points:
    -g(z) - log Cap."""
    zz = np.atleast_1d(np.asarray(z, complex))
    inside = emap.polygon.contains(zz, tol=0.0)
    if np.any(inside):
        raise PointInsideDomain("equilibrium potential needs exterior "
                                "points; got %r" % zz[inside][0])
    g = emap.green_many(zz)
    val = -g - np.log(emap.capacity)
    return float(val[0]) if np.asarray(z).shape == () else val


# -- verification ------------------------------------------------------------


@dataclass
class VerificationReport:
    verdict: str                       # "pass" | "fail" | "inconclusive"
    max_mismatch: float
    mismatch_by_level: dict[float, float]
    mass_defect: float
    arc_count: int
    arc_bound: int
    tree_ok: bool
    min_interior_density: float
    descent_verdict: str | None
    notes: list[str]

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "max_mismatch": self.max_mismatch,
            "mismatch_by_level": {str(k): v
                                  for k, v in self.mismatch_by_level.items()},
            "mass_defect": self.mass_defect,
            "arc_count": self.arc_count,
            "arc_bound": self.arc_bound,
            "tree_ok": self.tree_ok,
            "min_interior_density": self.min_interior_density,
            "descent_verdict": self.descent_verdict,
            "notes": self.notes,
        }


def verify_skeleton(skeleton: Skeleton, test_points=None,
                    levels: tuple[float, ...] = (0.2, 1.0),
                    points_per_level: int = 64,
                    tol: float = 1e-5,
                    mass_tol: float = 1e-7) -> VerificationReport:
    """Check the skeleton against its defining property.

    On a level ring {g = t} the equilibrium potential is -t - log Cap
    exactly, so the default test set needs no inverse mapping.  Explicit
    ``test_points`` (strictly exterior) are compared through the map
    instead.
    """
    emap = skeleton.system.emap
    notes: list[str] = []
    by_level: dict[float, float] = {}
    worst = 0.0

    if test_points is not None:
        u_skel = potential(skeleton.measure, test_points)
        u_eq = equilibrium_potential(emap, test_points)
        worst = float(np.abs(u_skel - u_eq).max())
    else:
        for t in levels:
            theta = np.linspace(0.0, 2.0 * np.pi, points_per_level,
                                endpoint=False)
            ring = emap.level_point(t, theta)
            u_skel = potential(skeleton.measure, ring)
            err = float(np.abs(u_skel - (-t - np.log(emap.capacity))).max())
            by_level[t] = err
            worst = max(worst, err)

    mass_defect = skeleton.mass - 1.0
    bound = 2 * skeleton.polygon.n - 3
    tree_ok = skeleton.is_tree()
    min_den = min((float(arc.density[1:-1].min()) for arc in skeleton.arcs
                   if arc.density.size > 2), default=np.inf)

    hard_fail = False
    if worst > tol:
        hard_fail = True
        notes.append("potential mismatch %.3e exceeds %g" % (worst, tol))
    if abs(mass_defect) > mass_tol:
        hard_fail = True
        notes.append("mass defect %.3e exceeds %g" % (mass_defect, mass_tol))
    if skeleton.arc_count > bound:
        hard_fail = True
        notes.append("%d arcs exceed the 2n-3 bound %d"
                     % (skeleton.arc_count, bound))
    if not tree_ok:
        hard_fail = True
        notes.append("arc adjacency is not a tree")
    if min_den <= 0.0:
        hard_fail = True
        notes.append("non-positive interior density sample")

    descent_verdict = skeleton.descent.verdict if skeleton.descent else None
    if hard_fail:
        verdict = "fail"
    elif descent_verdict not in ("pass", None):
        verdict = "inconclusive"
        notes.append("descent check verdict: %s" % descent_verdict)
    else:
        verdict = "pass"
    return VerificationReport(verdict, worst, by_level, mass_defect,
                              skeleton.arc_count, bound, tree_ok,
                              min_den, descent_verdict, notes)


# -- symmetry structure -------------------------------------------------------


@dataclass
class SymmetryStructure:
    """How the skeleton sits relative to a reflection axis."""

    on_axis: list[int]                 # arcs lying inside the axis line
    self_mirrored: list[int]           # fixed as sets but not in the line
    mirror_pairs: list[tuple[int, int]]
    unpaired: list[int]
    max_error: float

    @property
    def symmetric(self) -> bool:
        return not self.unpaired


def _resample(poly: np.ndarray, k: int = 17) -> np.ndarray:
    """Arclength-uniform resampling for shape comparison."""
    seg = np.abs(np.diff(poly))
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0.0:
        return np.full(k, poly[0])
    grid = np.linspace(0.0, s[-1], k)
    return (np.interp(grid, s, poly.real)
            + 1j * np.interp(grid, s, poly.imag))


def symmetry_structure(skeleton: Skeleton, anchor: complex, direction: complex,
                       tol: float = 1e-8) -> SymmetryStructure:
    """Classify arcs as on-axis or mirror partners for the reflection
    across the line through ``anchor`` along ``direction``."""
    u = direction / abs(direction)

    def mirror(z):
        return anchor + ((z - anchor) / u).conjugate() * u

    shapes = [_resample(arc.polyline) for arc in skeleton.arcs]
    scale = skeleton.system.scale
    on_axis, fixed, rest = [], [], []
    for k, shp in enumerate(shapes):
        line_off = np.abs(((shp - anchor) / u).imag).max()
        if line_off < tol * scale:
            on_axis.append(k)
            continue
        img = mirror(shp)
        set_off = min(np.abs(img - shp).max(), np.abs(img - shp[::-1]).max())
        if set_off < 2.0 * tol * scale:
            fixed.append(k)
        else:
            rest.append(k)

    pairs, unpaired = [], []
    err = 0.0
    used: set[int] = set()
    for k in rest:
        if k in used:
            continue
        img = mirror(shapes[k])
        best, best_d = None, np.inf
        for j in rest:
            if j == k or j in used:
                continue
            d = min(np.abs(img - shapes[j]).max(),
                    np.abs(img - shapes[j][::-1]).max())
            if d < best_d:
                best, best_d = j, d
        if best is not None and best_d < tol * scale:
            pairs.append((k, best))
            used |= {k, best}
            err = max(err, best_d)
        else:
            unpaired.append(k)
            used.add(k)
    return SymmetryStructure(on_axis, fixed, pairs, unpaired, float(err))
