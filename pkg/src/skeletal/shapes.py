"""Convex polygon generators for tests, demos, and sweeps."""

from __future__ import annotations

import numpy as np

from .geometry import ConvexPolygon, validate_polygon

# reject random candidates whose corners get flatter than this
_MAX_ANGLE = np.pi - 0.12
_MIN_GAP = 0.25  # radians between direction angles of consecutive vertices


def regular_polygon(n: int, side: float = 1.0, center: complex = 0j,
                    rotation: float = 0.0) -> ConvexPolygon:
    th = rotation + 2.0 * np.pi * np.arange(n) / n
    R = side / (2.0 * np.sin(np.pi / n))
    return ConvexPolygon(center + R * np.exp(1j * th))


def square(side: float = 1.0) -> ConvexPolygon:
    return ConvexPolygon(np.array([0j, side + 0j, side + 1j * side, 1j * side]))


def rectangle(width: float, height: float) -> ConvexPolygon:
    return ConvexPolygon(np.array([0j, width + 0j, width + 1j * height,
                                   1j * height]))


def equilateral_triangle(side: float = 1.0) -> ConvexPolygon:
    return ConvexPolygon(side * np.array([0j, 1 + 0j,
                                          0.5 + 1j * np.sqrt(3) / 2]))


def random_convex_polygon(n: int, seed: int) -> ConvexPolygon:
    """Deterministic random convex n-gon with no near-flat corner.

    Vertices sit at jittered angles on a radius-jittered circle; the
    candidate is rejected until it is strictly convex with all interior
    angles bounded away from pi.
    """
    rng = np.random.default_rng(seed)
    for _ in range(1000):
        ang = np.sort(rng.uniform(0.0, 2.0 * np.pi, n))
        gaps = np.diff(np.append(ang, ang[0] + 2.0 * np.pi))
        if gaps.min() < _MIN_GAP:
            continue
        r = 1.0 + 0.3 * rng.uniform(-1.0, 1.0, n)
        pts = r * np.exp(1j * ang)
        try:
            p = validate_polygon(pts)
        except Exception:
            continue
        if max(p.interior_angle(i) for i in range(n)) < _MAX_ANGLE:
            return p
    raise RuntimeError("no admissible polygon after 1000 draws (n=%d, seed=%d)"
                       % (n, seed))


def random_kite(seed: int) -> ConvexPolygon:
    """Convex kite, symmetric about the real axis, not a rhombus."""
    rng = np.random.default_rng(seed)
    for _ in range(100):
        a = rng.uniform(0.8, 1.6)
        c = rng.uniform(0.4, 0.75)
        b = rng.uniform(0.45, 0.95)
        if abs(a - c) < 0.2:
            continue  # too close to a rhombus; keep the axis essential
        p = ConvexPolygon(np.array([a + 0j, 1j * b, -c + 0j, -1j * b]))
        if max(p.interior_angle(i) for i in range(4)) < _MAX_ANGLE:
            return p
    raise RuntimeError("kite generation failed (seed=%d)" % seed)


def random_isosceles_trapezoid(seed: int) -> ConvexPolygon:
    """Isosceles trapezoid, symmetric about the imaginary axis, with
    distinctly different parallel sides."""
    rng = np.random.default_rng(seed)
    for _ in range(100):
        a = rng.uniform(0.9, 1.4)    # half of the long base
        b = rng.uniform(0.35, 0.7) * a
        h = rng.uniform(0.5, 1.1)
        if a - b < 0.25:
            continue
        p = ConvexPolygon(np.array([a + 0j, b + 1j * h, -b + 1j * h, -a + 0j]))
        if max(p.interior_angle(i) for i in range(4)) < _MAX_ANGLE:
            return p
    raise RuntimeError("trapezoid generation failed (seed=%d)" % seed)
