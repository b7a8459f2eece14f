"""Loops: regularity, evolution to critical events, decomposition, measures."""

import numpy as np
import pytest

from skeletal import (
    DiscreteMeasure,
    Loop,
    ZeroSetSystem,
    advance_loop,
    arc_measure,
    boundary_loop,
    branch_ref,
    decompose_critical,
    evolve_to_critical,
    is_regular_loop,
    loop_measure,
    solve_exterior_map,
)
from skeletal.errors import LoopError, NotCritical, OutOfRange
from skeletal.shapes import (
    equilateral_triangle,
    random_convex_polygon,
    rectangle,
    square,
)

# level at which the reflected potentials of the unit square's opposite
# edges first touch (at the center); found by bisecting the potential
# along the vertical midline, independent of the loop machinery
T_STAR_SQUARE = 0.5460601776208401


@pytest.fixture(scope="module")
def square_system():
    return ZeroSetSystem(solve_exterior_map(square()))


@pytest.fixture(scope="module")
def triangle_system():
    return ZeroSetSystem(solve_exterior_map(equilateral_triangle()))


@pytest.fixture(scope="module")
def rect_system():
    return ZeroSetSystem(solve_exterior_map(rectangle(4.0, 1.0)))


def _descend(sysm, max_steps=64):
    """Run the full descent, asserting mass conservation at every step.

    Returns (total skeleton measure, collapse points, junction kinds,
    event kinds).
    """
    work = [boundary_loop(sysm)]
    total = DiscreteMeasure.empty()
    points, junk, evk = [], [], []
    steps = 0
    while work:
        steps += 1
        assert steps <= max_steps
        lp = work.pop()
        mu0 = loop_measure(lp)
        t_c, crit = evolve_to_critical(lp)
        evk += [e.kind for e in crit.events]
        lam = DiscreteMeasure.empty()
        for ref in crit.branches:
            lam = lam + arc_measure(sysm, ref, lp.t, t_c)
        if crit.status == "point":
            points.append(crit.collapse_point)
            mu_next = DiscreteMeasure.empty()
        else:
            children, juncs = decompose_critical(crit)
            junk += [j.kind for j in juncs]
            mu_next = DiscreteMeasure.empty()
            for ch in children:
                assert is_regular_loop(ch).regular
                mu_next = mu_next + loop_measure(ch)
                work.append(ch)
        balance = mu0.mass - mu_next.mass - lam.mass
        assert abs(balance) < 1e-7
        total = total + lam
    return total, points, junk, evk


# -- boundary loop ----------------------------------------------------------


def test_square_boundary_loop_structure(square_system):
    lp = boundary_loop(square_system)
    assert lp.m == 4
    assert lp.edges == (0, 1, 2, 3)
    assert lp.status == "regular"
    # prevertices of the square are equally spaced, so each edge claims a
    # quarter of the circle
    for arc in lp.arcs:
        assert abs(arc.span - np.pi / 2) < 1e-12
    verts = lp.vertices()
    poly = square_system.polygon.vertices
    gap = np.abs(verts[:, None] - poly[None, :]).min(axis=1)
    assert gap.max() < 1e-12


def test_boundary_loop_is_regular(square_system, triangle_system):
    for sysm in (square_system, triangle_system):
        chk = is_regular_loop(boundary_loop(sysm))
        assert chk.regular, chk.detail
        assert chk.condition is None
        assert chk.min_turn > 0.1


def test_boundary_loop_area_matches_polygon(square_system):
    lp = boundary_loop(square_system)
    assert abs(lp.signed_area() - square_system.polygon.area) < 1e-6


# -- advancing along the level parameter ------------------------------------


def test_advance_loop_stays_regular_and_shrinks(square_system):
    lp0 = boundary_loop(square_system)
    near = advance_loop(lp0, 0.01)
    far = advance_loop(near, 0.30)
    assert is_regular_loop(near).regular
    assert is_regular_loop(far).regular
    # deeper level curves nest strictly inside shallower ones
    assert near.contains(far.polyline()).all()
    assert near.contains(0.5 + 0.5j)
    assert not far.contains(1.0 + 0.0j)


def test_advance_loop_rejects_backward_motion(square_system):
    lp = advance_loop(boundary_loop(square_system), 0.2)
    with pytest.raises(OutOfRange):
        advance_loop(lp, 0.05)


# -- loop measures -----------------------------------------------------------


def test_boundary_measure_has_unit_mass(square_system, triangle_system):
    for sysm in (square_system, triangle_system):
        mu = loop_measure(boundary_loop(sysm))
        assert abs(mu.mass - 1.0) < 1e-12
        assert set(mu.tags) == {"boundary"}


def test_boundary_measure_atoms_sit_on_the_polygon(square_system):
    mu = loop_measure(boundary_loop(square_system))
    x, y = mu.points.real, mu.points.imag
    d = np.minimum.reduce([np.abs(x), np.abs(1 - x), np.abs(y), np.abs(1 - y)])
    assert d.max() < 1e-9
    assert x.min() > -1e-9 and x.max() < 1 + 1e-9


def test_mass_conserved_along_the_descent(square_system):
    # what the loop sheds between levels lands on the tie arcs:
    # |mu_0| = |mu_t| + |lambda restricted to [0, t]|
    lp = boundary_loop(square_system)
    for t in (0.01, 0.2, 0.45):
        adv = advance_loop(lp, t)
        mu = loop_measure(adv)
        lam = sum(arc_measure(square_system, ref, 0.0, t).mass
                  for ref in adv.branches)
        assert abs(mu.mass + lam - 1.0) < 1e-10


def test_loop_measure_mass_exact_at_any_order(square_system):
    # atom weights are angle widths over 2 pi, so the total is the summed
    # window span regardless of the quadrature order
    lp = advance_loop(boundary_loop(square_system), 0.2)
    span = sum(a.span for a in lp.arcs)
    for q in (6, 12, 20):
        mu = loop_measure(lp, quad_order=q)
        assert abs(mu.mass - span / (2 * np.pi)) < 1e-13


# -- evolution to the critical level -----------------------------------------


def test_square_boundary_collapses_at_center(square_system):
    t_c, crit = evolve_to_critical(boundary_loop(square_system))
    assert crit.status == "point"
    assert abs(t_c - T_STAR_SQUARE) < 1e-11
    assert abs(crit.collapse_point - (0.5 + 0.5j)) < 1e-10
    assert sorted(e.kind for e in crit.events) == ["merge"] * 4
    with pytest.raises(NotCritical):
        decompose_critical(crit)


def test_triangle_collapses_at_centroid(triangle_system):
    t_c, crit = evolve_to_critical(boundary_loop(triangle_system))
    assert crit.status == "point"
    assert abs(crit.collapse_point - triangle_system.polygon.centroid) < 1e-9
    assert all(e.kind == "merge" for e in crit.events)


def test_evolve_requires_a_regular_start(square_system):
    lp = boundary_loop(square_system)
    lp.status = "critical"
    with pytest.raises(LoopError):
        evolve_to_critical(lp)


# -- contact splitting: elongated rectangle ----------------------------------


def test_rectangle_contact_splits_into_mirror_children(rect_system):
    sysm = rect_system
    t_c, crit = evolve_to_critical(boundary_loop(sysm))
    kinds = [e.kind for e in crit.events]
    assert "contact" in kinds

    # the long sides touch first, at the center, at the tangency level of
    # that edge pair
    m_pt, t_touch = sysm.find_max_point(1, 3)
    assert abs(m_pt - (2.0 + 0.5j)) < 1e-9
    assert abs(t_c - t_touch) < 1e-11
    ev = next(e for e in crit.events if e.kind == "contact")
    assert abs(ev.z - (2.0 + 0.5j)) < 1e-8

    children, juncs = decompose_critical(crit)
    assert len(children) == 2
    assert [j.kind for j in juncs] == ["contact"]
    assert sorted(juncs[0].loops) == [0, 1]
    assert all(ch.m == 3 for ch in children)

    # mirror symmetry about x = 2: the children collapse at the same
    # level, at points summing to twice the center
    ends = [evolve_to_critical(ch) for ch in children]
    (ta, ca), (tb, cb) = ends
    assert ca.status == "point" and cb.status == "point"
    assert abs(ta - tb) < 1e-9
    assert abs(ca.collapse_point + cb.collapse_point - (4.0 + 1.0j)) < 1e-8


# -- full descent: mass conservation and structure ---------------------------


def test_square_descent_conserves_mass(square_system):
    total, points, junk, _ = _descend(square_system)
    assert abs(total.mass - 1.0) < 1e-9
    assert len(points) == 1
    assert junk == []
    assert set(total.tags) == {"skeleton"}


def test_rectangle_descent_conserves_mass(rect_system):
    total, points, junk, _ = _descend(rect_system)
    assert abs(total.mass - 1.0) < 1e-9
    assert len(points) == 2
    assert junk == ["contact"]


def test_pentagon_merge_cascade():
    sysm = ZeroSetSystem(solve_exterior_map(random_convex_polygon(5, seed=7)))
    total, points, junk, evk = _descend(sysm)
    assert abs(total.mass - 1.0) < 1e-9
    assert len(points) == 1
    # a generic pentagon loses vertices one merge at a time
    assert set(junk) == {"merge"}
    assert set(evk) == {"merge"}


# -- arc measures ------------------------------------------------------------


def test_arc_measure_empty_interval(square_system):
    ref = branch_ref(0, 1, "vertex", 4)
    mu = arc_measure(square_system, ref, 0.1, 0.1)
    assert mu.mass == 0.0
    assert mu.points.size == 0


def test_square_diagonal_arc_carries_a_quarter(square_system):
    # four congruent diagonal arcs split the unit boundary mass evenly
    ref = branch_ref(0, 1, "vertex", 4)
    mu8 = arc_measure(square_system, ref, 0.0, T_STAR_SQUARE, quad_order=8)
    mu16 = arc_measure(square_system, ref, 0.0, T_STAR_SQUARE, quad_order=16)
    assert abs(mu8.mass - 0.25) < 1e-10
    assert abs(mu16.mass - 0.25) < 1e-10
    assert abs(mu8.mass - mu16.mass) < 1e-12
    assert set(mu8.tags) == {"skeleton"}


def test_square_diagonal_atoms_lie_on_the_diagonal(square_system):
    ref = branch_ref(1, 2, "vertex", 4)
    mu = arc_measure(square_system, ref, 0.0, T_STAR_SQUARE)
    assert np.abs(mu.points.real + mu.points.imag - 1.0).max() < 1e-9


def test_tangency_arc_measure_is_order_stable(square_system):
    # past the touch level the opposite-edge tie set has two branch
    # points; the density blows up like an inverse square root there and
    # the substitution rule must keep the quadrature order-stable
    ref = branch_ref(1, 3, "plus", 4)
    a = arc_measure(square_system, ref, T_STAR_SQUARE, T_STAR_SQUARE + 0.2,
                    quad_order=8)
    b = arc_measure(square_system, ref, T_STAR_SQUARE, T_STAR_SQUARE + 0.2,
                    quad_order=16)
    assert a.mass > 1e-4
    assert abs(a.mass - b.mass) < 1e-9


# -- regularity diagnostics ---------------------------------------------------


def test_clockwise_loop_fails_orientation(square_system):
    lp = boundary_loop(square_system)
    rev = Loop(square_system, lp.t,
               tuple(reversed(lp.branches)), tuple(reversed(lp.edges)),
               [type(a)(a.t, a.right, a.edge, a.left,
                        (a.theta[1], a.theta[0]), a.z[::-1])
                for a in reversed(lp.arcs)])
    chk = is_regular_loop(rev)
    assert not chk.regular
    assert chk.condition == 1
    assert "counter-clockwise" in chk.detail


# -- measure container --------------------------------------------------------


def test_measure_addition_concatenates():
    a = DiscreteMeasure(np.array([1j]), np.array([0.25]), np.array(["boundary"]))
    b = DiscreteMeasure.empty() + a
    c = a + a
    assert b.mass == 0.25
    assert c.mass == 0.5
    assert c.points.size == 2


def test_measure_rejects_negative_weights():
    with pytest.raises(ValueError):
        DiscreteMeasure(np.array([0j]), np.array([-1e-6]), np.array(["boundary"]))
    # round-off dust is clipped, not rejected
    mu = DiscreteMeasure(np.array([0j]), np.array([-1e-14]), np.array(["boundary"]))
    assert mu.weights[0] == 0.0
