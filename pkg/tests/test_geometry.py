from __future__ import annotations

import numpy as np
import pytest

from skeletal import ConvexPolygon, NonConvex, TooFewVertices, DuplicateVertex
from skeletal.geometry import validate_polygon, wedge


def square() -> ConvexPolygon:
    return ConvexPolygon(np.array([1 + 0j, 1 + 1j, 0 + 1j, 0 + 0j]))


def test_validate_accepts_ccw_square():
    p = validate_polygon([(1, 0), (1, 1), (0, 1), (0, 0)])
    assert p.n == 4
    assert np.isclose(p.area, 1.0)


def test_validate_reverses_clockwise_input():
    p = validate_polygon([(0, 0), (0, 1), (1, 1), (1, 0)])
    assert p.area > 0
    # orientation is counterclockwise after validation
    v = p.vertices
    e = np.roll(v, -1) - v
    f = np.roll(e, -1)
    assert np.all(e.real * f.imag - e.imag * f.real > 0)

def test_validate_rejects_small_inputs():
    with pytest.raises(TooFewVertices):
        validate_polygon([(0, 0), (1, 0)])


def test_validate_rejects_duplicates():
    with pytest.raises(DuplicateVertex):
        validate_polygon([(0, 0), (1, 0), (1, 1), (1, 0)])


def test_validate_rejects_collinear_and_reflex():
    with pytest.raises(NonConvex):
        validate_polygon([(0, 0), (1, 0), (2, 0), (1, 1)])
    with pytest.raises(NonConvex):
        validate_polygon([(0, 0), (2, 0), (1, 0.2), (2, 2), (0, 2)])


def test_edges_share_indexed_vertex():
    p = square()
    for i in range(4):
        a, b = p.edge(i)
        assert b == p.vertex(i)
        a2, _ = p.edge(i + 1)
        assert a2 == p.vertex(i)


def test_interior_angles_square():
    p = square()
    for i in range(4):
        assert np.isclose(p.interior_angle(i), np.pi / 2)


def test_interior_angles_sum():
    rng = np.random.default_rng(3)
    ang = np.sort(rng.uniform(0, 2 * np.pi, 7))
    pts = (1 + 0.25 * rng.uniform(-1, 1, 7)) * np.exp(1j * ang)
    p = ConvexPolygon(pts)
    total = sum(p.interior_angle(i) for i in range(p.n))
    assert np.isclose(total, (p.n - 2) * np.pi)


def test_centroid_area_diameter():
    p = square()
    assert np.isclose(p.centroid, 0.5 + 0.5j)
    assert np.isclose(p.area, 1.0)
    assert np.isclose(p.diameter, np.sqrt(2.0))


def test_contains_and_distance():
    p = square()
    assert p.contains(0.5 + 0.5j)
    assert not p.contains(1.5 + 0.5j)
    assert p.contains(1.0 + 0.5j)          # boundary point
    assert not p.contains(1.0 + 0.5j, tol=-1e-6)  # strict interior test
    assert np.isclose(p.distance_to_boundary(0.5 + 0.5j), 0.5)
    zs = np.array([0.5 + 0.5j, 2 + 0j])
    np.testing.assert_array_equal(p.contains(zs), [True, False])


def test_reflection_is_edge_mirror():
    p = square()
    # edge 1 runs from (1,0) to (1,1): the line x = 1
    z = 0.25 + 0.4j
    r = p.reflect(1, z)
    assert np.isclose(r, 1.75 + 0.4j)
    # involution
    assert np.isclose(p.reflect(1, r), z)
    # matrix form agrees on displacements
    M = p.reflect_matrix(1)
    d = r - p.vertex(1)
    d0 = z - p.vertex(1)
    np.testing.assert_allclose(M @ [d0.real, d0.imag], [d.real, d.imag], atol=1e-14)


def test_wedge_adjacent_edges():
    p = square()
    w = wedge(p, 1, 2)   # edges meeting at vertex 1 = (1,1)
    assert not w.parallel
    assert np.isclose(w.apex, 1 + 1j)
    # wedge between lines x=1 and y=1 containing the square
    assert w.contains(0.5 + 0.5j)
    assert w.contains(0.9 + 0.9j)
    assert not w.contains(1.5 + 0.5j)
    assert not w.contains(0.5 + 1.5j)


def test_wedge_parallel_strip():
    p = square()
    w = wedge(p, 1, 3)   # lines x=1 and x=0: a strip
    assert w.parallel
    assert w.contains(0.5 + 9j)
    assert not w.contains(1.2 + 0j)
    assert not w.contains(-0.2 + 0j)


def test_wedge_vectorized_contains():
    p = square()
    w = wedge(p, 1, 2)
    zs = np.array([0.5 + 0.5j, 2 + 0j, 0.2 + 0.9j])
    np.testing.assert_array_equal(w.contains(zs), [True, False, True])
