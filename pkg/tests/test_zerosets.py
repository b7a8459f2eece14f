"""Tie curves: roots, branch structure, parametrization, descent check."""

import json

import numpy as np
import pytest

from skeletal import ReflectedGreen, ZeroSetSystem, solve_exterior_map
from skeletal.errors import NoTangency, OutOfRange
from skeletal.shapes import (
    equilateral_triangle,
    random_convex_polygon,
    random_isosceles_trapezoid,
    random_kite,
    square,
)


@pytest.fixture(scope="module")
def square_system():
    return ZeroSetSystem(solve_exterior_map(square()))


@pytest.fixture(scope="module")
def kite_system():
    return ZeroSetSystem(solve_exterior_map(random_kite(seed=3)))


@pytest.fixture(scope="module")
def octagon_system():
    return ZeroSetSystem(solve_exterior_map(random_convex_polygon(8, seed=11)))


# -- square: everything known by symmetry ---------------------------------


def test_square_adjacent_branch_is_diagonal(square_system):
    zs = square_system
    # edges 1 (bottom) and 2 (right) share the vertex at 1+0j; their tie
    # runs along the diagonal x + y = 1
    (br,) = zs.trace_zero_set(1, 2)
    assert br.kind == "vertex"
    assert br.z[0] == 1.0 + 0.0j
    assert br.t[0] == 0.0
    assert np.abs(br.z.real + br.z.imag - 1.0).max() < 1e-10
    assert np.all(np.diff(br.t) > 0.0)
    assert br.end_reason == "region"


def test_square_adjacent_max_point_exact(square_system):
    m, t = square_system.find_max_point(1, 2)
    assert m == 1.0 + 0.0j
    assert t == 0.0


def test_square_opposite_tangency_at_center(square_system):
    zs = square_system
    m, t = zs.find_max_point(1, 3)
    assert abs(m - (0.5 + 0.5j)) < 1e-12
    # at the touch level the bottom reflection passes through the center:
    # -g_1(center) = g(conj(center))
    assert t == pytest.approx(zs.emap.green(0.5 - 0.5j), abs=1e-12)


def test_square_opposite_branches_on_midline(square_system):
    branches = square_system.trace_zero_set(1, 3)
    assert sorted(br.kind for br in branches) == ["minus", "plus"]
    for br in branches:
        assert np.abs(br.z.imag - 0.5).max() < 1e-10
        assert np.all(np.diff(br.t) >= 0.0)
        # the root sample carries the true (anti-parallel) gradients
        di, dj = br.grad_i[0], br.grad_j[0]
        assert abs(di + dj) < 1e-9 * abs(di)


def test_square_half_turn_symmetry(square_system):
    zs = square_system
    for t in (0.05, 0.2, 0.6):
        a = zs.branch_point(0, 1, "vertex", t)
        b = zs.branch_point(2, 3, "vertex", t)
        assert abs((a + b) - (1.0 + 1.0j)) < 1e-9


def test_branch_point_residuals(square_system):
    zs = square_system
    g1 = ReflectedGreen(zs.emap, 1)
    g2 = ReflectedGreen(zs.emap, 2)
    for t in (1e-4, 0.01, 0.3, 1.0):
        z = zs.branch_point(1, 2, "vertex", t)
        assert abs(g1.value(z) + t) < 1e-9
        assert abs(g2.value(z) + t) < 1e-9


def test_branch_point_out_of_range(square_system):
    zs = square_system
    (br,) = zs.trace_zero_set(1, 2)
    with pytest.raises(OutOfRange):
        zs.branch_point(1, 2, "vertex", br.t_end + 0.5)
    with pytest.raises(OutOfRange):
        zs.branch_point(1, 3, "plus", 0.5 * zs.find_max_point(1, 3)[1])
    with pytest.raises(OutOfRange):
        zs.branch_point(1, 3, "vertex", 0.1)  # no such kind for this pair


def test_square_descent_report(square_system):
    rep = square_system.check_strict_descent()
    assert rep.ok and rep.verdict == "pass"
    assert rep.checked_branches == 8
    assert not rep.violations and not rep.inconclusive and not rep.skipped_pairs
    # both opposite-pair tangency roots have anti-parallel gradients
    assert len(rep.near_parallel) == 2
    assert rep.margin == pytest.approx(1.0, abs=1e-9)
    json.dumps(rep.to_dict())  # must be serializable as-is


# -- equilateral triangle ---------------------------------------------------


def test_triangle_branches_on_bisectors():
    zs = ZeroSetSystem(solve_exterior_map(equilateral_triangle()))
    poly = zs.polygon
    c = poly.centroid
    for i in range(3):
        j = (i + 1) % 3
        (br,) = zs.trace_zero_set(i, j)
        v = poly.vertex(i)
        axis = (c - v) / abs(c - v)
        dev = np.abs((np.conj(axis) * (br.z - v)).imag)
        assert dev.max() < 1e-9
    rep = zs.check_strict_descent()
    assert rep.verdict == "pass"
    # only adjacent pairs exist and no parallel points occur along them
    assert np.isinf(rep.margin)
    assert rep.to_dict()["margin"] is None


# -- kite and trapezoid: structure forced by one mirror symmetry ------------


def test_kite_mirror_pairs_tie_on_axis(kite_system):
    # vertices are a, ib, -c, -ib; the symmetry axis is the real line and
    # the edge pairs (0,1) and (2,3) are mirror images sharing an on-axis
    # vertex, so their ties stay on the axis
    zs = kite_system
    for pair in [(0, 1), (2, 3)]:
        (br,) = zs.trace_zero_set(*pair)
        assert np.abs(br.z.imag).max() < 1e-9
        assert np.all(np.diff(br.t) > 0.0)


def test_kite_off_axis_pairs_mirror_each_other(kite_system):
    zs = kite_system
    for t in (0.05, 0.3):
        upper = zs.branch_point(1, 2, "vertex", t)
        lower = zs.branch_point(0, 3, "vertex", t)
        assert abs(np.conj(upper) - lower) < 1e-8


def test_trapezoid_leg_tie_is_symmetry_axis():
    zs = ZeroSetSystem(solve_exterior_map(random_isosceles_trapezoid(seed=5)))
    m, t = zs.find_max_point(1, 3)
    assert abs(m.real) < 1e-10
    for br in zs.trace_zero_set(1, 3):
        assert np.abs(br.z.real).max() < 1e-9


def test_trapezoid_rate_positive_before_axis():
    # along the tie from a bottom vertex the level climbs strictly until
    # the curve crosses the symmetry axis
    zs = ZeroSetSystem(solve_exterior_map(random_isosceles_trapezoid(seed=5)))
    (br,) = zs.trace_zero_set(0, 1)
    sel = br.z.real > 1e-6
    sel[0] = False  # gradients blow up at the vertex itself
    tau = np.empty_like(br.z)
    tau[:-1] = np.diff(br.z)
    tau[-1] = br.z[-1] - br.z[-2]
    tau /= np.abs(tau)
    rate = -(np.conj(br.grad_i) * tau).real
    assert rate[sel].min() > 0.0


# -- transversal (apex) roots ----------------------------------------------


def test_octagon_apex_pair_structure(octagon_system):
    zs = octagon_system
    with pytest.raises(NoTangency):
        zs.find_max_point(1, 3)
    (br,) = zs.trace_zero_set(1, 3)
    assert br.kind == "apex"
    assert br.start_reason == "wedge"
    assert br.end_reason == "region"
    assert np.all(np.diff(br.t) > 0.0)
    apex = zs.polygon.wedge(1, 3).apex
    assert br.t[0] == pytest.approx(zs.emap.green(apex), abs=1e-4)
    assert abs(br.z[0] - apex) < 0.05 * zs.scale
    # the root is queryable like any other branch point
    t_probe = 0.5 * (br.t[0] + br.t[-1])
    z = zs.branch_point(1, 3, "apex", t_probe)
    gi = ReflectedGreen(zs.emap, 1).value(z)
    gj = ReflectedGreen(zs.emap, 3).value(z)
    assert abs(gi + t_probe) < 1e-9 and abs(gj + t_probe) < 1e-9


def test_octagon_interior_tangency_pair(octagon_system):
    zs = octagon_system
    m, t = zs.find_max_point(0, 4)
    assert zs.polygon.wedge(0, 4).contains(m, slack=1e-9)
    branches = zs.trace_zero_set(0, 4)
    assert sorted(br.kind for br in branches) == ["minus", "plus"]
    for br in branches:
        assert br.t[0] == pytest.approx(t, abs=1e-12)


# -- tracing controls ---------------------------------------------------------


def test_trace_cache_and_step_override(square_system):
    zs = square_system
    a = zs.trace_zero_set(1, 2)
    assert zs.trace_zero_set(1, 2) is a
    fine = zs.trace_zero_set(1, 2, step=2e-3)
    assert len(fine[0].z) > 2 * len(a[0].z)
    again = zs.trace_zero_set(1, 2, step=2e-3)
    assert again is fine


def test_branch_covers(square_system):
    (br,) = square_system.trace_zero_set(0, 1)
    assert br.covers(br.t_top) and br.covers(br.t_end)
    assert br.covers(0.5 * (br.t_top + br.t_end))
    assert not br.covers(br.t_end + 1.0)
