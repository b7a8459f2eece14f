"""Skeleton driver: assembly, potentials, verification, symmetry cases."""

import numpy as np
import pytest

from skeletal import (
    ConvexPolygon,
    DiscreteMeasure,
    build_skeleton,
    equilibrium_potential,
    potential,
    solve_exterior_map,
    symmetry_structure,
    verify_skeleton,
)
from skeletal.errors import AtomCollision, DescentViolation, PointInsideDomain
from skeletal.shapes import (
    equilateral_triangle,
    random_convex_polygon,
    random_isosceles_trapezoid,
    random_kite,
    rectangle,
    square,
)


@pytest.fixture(scope="module")
def square_skeleton():
    return build_skeleton(square())


@pytest.fixture(scope="module")
def triangle_skeleton():
    return build_skeleton(equilateral_triangle())


@pytest.fixture(scope="module")
def rect_skeleton():
    return build_skeleton(rectangle(4.0, 1.0))


# -- potentials (closed-form oracles first) -----------------------------------


def test_potential_single_atom():
    mu = DiscreteMeasure(np.array([0j]), np.array([1.0]), np.array(["skeleton"]))
    assert abs(potential(mu, complex(np.e)) - (-1.0)) < 1e-15


def test_potential_two_atoms_hand_value():
    mu = DiscreteMeasure(np.array([1.0 + 0j, -1.0 + 0j]),
                         np.array([0.5, 0.5]), np.array(["s", "s"]))
    assert abs(potential(mu, 1j) - (-0.5 * np.log(2.0))) < 1e-15


def test_potential_far_field_decay():
    mu = DiscreteMeasure(np.array([0.3 + 0.1j, -0.2 - 0.4j]),
                         np.array([0.6, 0.4]), np.array(["s", "s"]))
    for r in (1e3, 1e6):
        z = r * np.exp(0.7j)
        assert abs(potential(mu, z) + np.log(r)) < 1.0 / r * 10
    zs = np.array([10.0 + 0j, 5j])
    assert potential(mu, zs).shape == (2,)


def test_potential_rejects_atom_hit():
    mu = DiscreteMeasure(np.array([1j]), np.array([1.0]), np.array(["s"]))
    with pytest.raises(AtomCollision):
        potential(mu, 1j)


def test_equilibrium_potential_on_boundary_limit():
    emap = solve_exterior_map(square())
    # g -> 0 on the boundary, so the value tends to -log Cap
    z = np.array([0.5 - 1e-9j])
    val = equilibrium_potential(emap, z)[0]
    assert abs(val + np.log(emap.capacity)) < 1e-7


def test_equilibrium_potential_far_field():
    emap = solve_exterior_map(ConvexPolygon(
        np.array([1 + 0j, 1 + 2j, -1 + 2j, -1 + 0j])))  # side-2 square
    val = equilibrium_potential(emap, 10.0 + 1.0j)
    # U ~ -log|z - center| for unit mass far away
    assert abs(val + np.log(abs(10.0 + 1.0j - (0 + 1j)))) < 1e-3


def test_equilibrium_potential_rejects_interior():
    emap = solve_exterior_map(square())
    with pytest.raises(PointInsideDomain):
        equilibrium_potential(emap, 0.5 + 0.5j)


def test_equilibrium_potential_symmetry():
    emap = solve_exterior_map(square())
    a = equilibrium_potential(emap, 0.5 + 2.0j)
    b = equilibrium_potential(emap, 0.5 - 1.0j)
    assert abs(a - b) < 1e-10


# -- assembled skeletons ------------------------------------------------------


def test_square_skeleton_is_the_diagonals(square_skeleton):
    sk = square_skeleton
    assert sk.arc_count == 4
    assert abs(sk.mass - 1.0) < 1e-9
    assert sk.is_tree()
    center = 0.5 + 0.5j
    hub = sk.node_at(center)
    assert hub is not None and hub.kind == "collapse" and hub.degree == 4
    # each arc: one endpoint at a corner, the other at the center, and
    # the polyline stays on its diagonal
    for arc in sk.arcs:
        z0, z1 = arc.endpoints
        assert abs(z1 - center) < 1e-8
        assert min(abs(z0 - v) for v in sk.polygon.vertices) < 1e-10
        diag = z0 - center
        off = (sk.polygon.n and np.abs(
            ((arc.polyline - center) / diag).imag)).max()
        assert off < 1e-8
        assert abs(arc.mass - 0.25) < 1e-9


def test_triangle_skeleton_meets_at_centroid(triangle_skeleton):
    sk = triangle_skeleton
    assert sk.arc_count == 3 == 2 * 3 - 3
    hub = sk.node_at(sk.polygon.centroid)
    assert hub is not None and hub.degree == 3
    assert abs(hub.z - sk.polygon.centroid) < 1e-6
    assert all(abs(a.mass - 1.0 / 3.0) < 1e-9 for a in sk.arcs)


def test_rectangle_skeleton_structure(rect_skeleton):
    sk = rect_skeleton
    assert sk.arc_count == 5 == 2 * 4 - 3
    assert sk.is_tree()
    # the joined tangency arc runs between the two collapse points
    # through the touch point at the center
    joined = [a for a in sk.arcs if len(a.refs) == 2]
    assert len(joined) == 1
    assert len(sk.touch_points) == 1
    assert abs(sk.touch_points[0][0] - (2.0 + 0.5j)) < 1e-8
    mid = joined[0]
    hubs = [sk.node_at(z) for z in mid.endpoints]
    assert all(h is not None and h.kind == "collapse" and h.degree == 3
               for h in hubs)
    # the touch point is interior to the arc, not a node
    assert sk.node_at(2.0 + 0.5j) is None
    assert np.abs(mid.polyline.imag - 0.5).max() < 1e-8


def test_interior_density_positive(rect_skeleton):
    for arc in rect_skeleton.arcs:
        assert arc.density[1:-1].min() > 0.0


def test_step_records_balance(rect_skeleton):
    assert all(abs(s.balance) < 1e-7 for s in rect_skeleton.steps)
    kinds = [s.status for s in rect_skeleton.steps]
    assert kinds.count("split") == 1
    assert kinds.count("point") == 2


# -- verification -------------------------------------------------------------


def test_verify_square(square_skeleton):
    rep = verify_skeleton(square_skeleton)
    assert rep.verdict == "pass"
    assert rep.max_mismatch <= 1e-5
    assert rep.tree_ok
    assert abs(rep.mass_defect) < 1e-7
    assert rep.arc_count <= rep.arc_bound
    assert rep.min_interior_density > 0.0


def test_verify_triangle(triangle_skeleton):
    rep = verify_skeleton(triangle_skeleton)
    assert rep.verdict == "pass"
    assert rep.max_mismatch <= 1e-5


def test_verify_with_explicit_exterior_points(square_skeleton):
    pts = np.array([3.0 + 0.5j, 0.5 + 4.0j, -2.0 - 2.0j])
    rep = verify_skeleton(square_skeleton, test_points=pts)
    assert rep.verdict == "pass"
    assert rep.max_mismatch <= 1e-5


def test_verify_detects_zeroed_arc(square_skeleton):
    import copy

    sk = copy.copy(square_skeleton)
    broken = DiscreteMeasure(sk.measure.points.copy(),
                             sk.measure.weights.copy(),
                             sk.measure.tags.copy())
    kill = sk.arcs[0].measure.points
    for p in kill:
        broken.weights[np.argmin(np.abs(broken.points - p))] = 0.0
    sk.measure = broken
    rep = verify_skeleton(sk)
    assert rep.verdict == "fail"
    assert rep.max_mismatch > 1e-3


def test_iteration_is_capped():
    # the splitting budget scales with n, so a healthy polygon never
    # trips it; the guard exists for runaway decomposition loops
    sk = build_skeleton(random_convex_polygon(6, seed=2))
    splits = sum(1 for s in sk.steps if s.status == "split")
    assert splits <= 6 - 2


# -- symmetry fixtures --------------------------------------------------------


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_kite_structure(seed):
    sk = build_skeleton(random_kite(seed=seed))
    st = symmetry_structure(sk, 0j, 1.0 + 0j, tol=1e-8)
    assert len(st.on_axis) == 2
    assert len(st.mirror_pairs) == 1
    assert not st.unpaired
    assert st.max_error <= 1e-8 * sk.system.scale
    assert verify_skeleton(sk).verdict == "pass"


@pytest.mark.parametrize("seed", [1, 2])
def test_wide_trapezoid_is_the_separated_case(seed):
    sk = build_skeleton(random_isosceles_trapezoid(seed=seed))
    st = symmetry_structure(sk, 0j, 1j, tol=1e-8)
    joined = [a for a in sk.arcs if len(a.refs) == 2]
    # connector arc spans the two halves on the parallel-pair tie set
    assert len(joined) == 1
    assert joined[0].edges == (0, 2)
    assert st.self_mirrored and not st.on_axis
    assert len(st.mirror_pairs) == 2
    assert not st.unpaired


def test_tall_trapezoid_connector_lies_on_the_axis():
    p = ConvexPolygon(np.array([0.55 + 0j, 0.3 + 1.6j, -0.3 + 1.6j,
                                -0.55 + 0j]))
    sk = build_skeleton(p)
    st = symmetry_structure(sk, 0j, 1j, tol=1e-8)
    joined = [a for a in sk.arcs if len(a.refs) == 2]
    assert len(joined) == 1
    assert joined[0].edges == (1, 3)
    # the legs' tie curve is the symmetry axis itself
    assert st.on_axis and not st.self_mirrored
    assert np.abs(joined[0].polyline.real).max() < 1e-8


# -- descent gate -------------------------------------------------------------


def test_descent_report_travels_with_the_skeleton(square_skeleton):
    assert square_skeleton.descent is not None
    assert square_skeleton.descent.verdict == "pass"


def test_check_can_be_skipped():
    sk = build_skeleton(square(), check_descent=False)
    assert sk.descent is None
    assert verify_skeleton(sk).verdict == "pass"
