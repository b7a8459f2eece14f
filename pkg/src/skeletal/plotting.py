"""Figure rendering for the CLI report path.

Everything draws into matplotlib axes with the Agg backend so the CLI
can emit SVG files headlessly.  Layer order: exterior level sets,
interior descent snapshots, the polygon outline, skeleton arcs, then
node and touch-point markers on top.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .conformal import ExteriorMap
from .errors import OutOfRange
from .geometry import ConvexPolygon
from .loops import advance_loop, boundary_loop
from .skeleton import Skeleton

_LEVEL_STYLE = dict(color="#4878cf", lw=0.7, alpha=0.75)
_POLY_STYLE = dict(color="black", lw=1.4)
_ARC_STYLE = dict(color="#c23b22", lw=1.6)


def draw_polygon(ax, polygon: ConvexPolygon) -> None:
    v = np.append(polygon.vertices, polygon.vertices[0])
    ax.plot(v.real, v.imag, **_POLY_STYLE)


def draw_exterior_levels(ax, emap: ExteriorMap, levels) -> None:
    for t in levels:
        ring = emap.trace_level_set(float(t), resolution=256)
        ring = np.append(ring, ring[0])
        ax.plot(ring.real, ring.imag, **_LEVEL_STYLE)


def draw_descent_snapshots(ax, skeleton: Skeleton, count: int) -> None:
    """Interior level curves of the extended potential, sampled between
    the boundary and the first critical level."""
    if count <= 0 or not skeleton.steps:
        return
    t_first = skeleton.steps[0].t_critical
    root = boundary_loop(skeleton.system)
    for t in np.linspace(0.0, t_first, count + 2)[1:-1]:
        try:
            loop = advance_loop(root, float(t))
        except OutOfRange:
            continue
        p = loop.polyline()
        p = np.append(p, p[0])
        ax.plot(p.real, p.imag, **_LEVEL_STYLE)


def draw_skeleton(ax, skeleton: Skeleton) -> None:
    for arc in skeleton.arcs:
        ax.plot(arc.polyline.real, arc.polyline.imag, **_ARC_STYLE)
    hubs = [node for node in skeleton.nodes if node.kind != "corner"]
    if hubs:
        z = np.array([node.z for node in hubs])
        ax.plot(z.real, z.imag, "o", ms=4.5, color="#c23b22", mew=0)
    if skeleton.touch_points:
        z = np.array([p for p, _t in skeleton.touch_points])
        ax.plot(z.real, z.imag, "s", ms=3.5, color="#7a3f9d", mew=0)


def skeleton_figure(skeleton: Skeleton, levels: int = 4,
                    snapshots: int | None = None) -> plt.Figure:
    """Full report figure: polygon, level sets in and out, skeleton."""
    fig, ax = plt.subplots(figsize=(6.0, 6.0))
    if levels > 0:
        ts = np.linspace(0.15, 1.0, levels)
        draw_exterior_levels(ax, skeleton.system.emap, ts)
    draw_descent_snapshots(ax, skeleton,
                           levels if snapshots is None else snapshots)
    draw_polygon(ax, skeleton.polygon)
    draw_skeleton(ax, skeleton)
    ax.set_aspect("equal")
    ax.set_axis_off()
    fig.tight_layout()
    return fig


def save_svg(fig: plt.Figure, path) -> None:
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
