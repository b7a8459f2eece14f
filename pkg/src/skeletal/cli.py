"""Command-line interface.

Subcommands: ``solve`` (conformal map summary), ``skeleton`` (full
pipeline to JSON and SVG), ``check-descent`` (strict-descent report),
``sweep`` (randomized descent evidence batches).

Exit codes are a stable contract: 0 success / descent pass, 2 argument
or input parse failure, 3 map solver non-convergence, 4 descent
violation during skeleton construction, 5 descent check failed,
6 descent check inconclusive.
"""

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .conformal import solve_exterior_map
from .errors import (
    DescentViolation,
    NoConvergence,
    PolygonError,
    SkeletalError,
)
from .geometry import ConvexPolygon, validate_polygon
from .shapes import random_convex_polygon
from .skeleton import Skeleton, build_skeleton, verify_skeleton
from .zerosets import ZeroSetSystem

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_NOCONV = 3
EXIT_VIOLATION = 4
EXIT_DESCENT_FAIL = 5
EXIT_INCONCLUSIVE = 6


# -- file formats -------------------------------------------------------------


def read_polygon_file(path) -> tuple[ConvexPolygon, str]:
    """Parse a PolygonFile: {"vertices": [[x, y], ...], "name"?: str}."""
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise PolygonError("cannot read %s: %s" % (path, exc)) from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise PolygonError(
            "%s: invalid JSON at line %d column %d: %s"
            % (path, exc.lineno, exc.colno, exc.msg)) from exc
    if not isinstance(data, dict) or "vertices" not in data:
        raise PolygonError("%s: missing 'vertices'" % path)
    verts = data["vertices"]
    try:
        z = np.array([complex(float(x), float(y)) for x, y in verts])
    except (TypeError, ValueError) as exc:
        raise PolygonError("%s: vertices must be [x, y] pairs" % path) from exc
    return validate_polygon(z), str(data.get("name", ""))


def polygon_to_dict(polygon: ConvexPolygon, name: str = "") -> dict:
    out = {"vertices": [[float(v.real), float(v.imag)]
                        for v in polygon.vertices]}
    if name:
        out["name"] = name
    return out


def skeleton_to_dict(skeleton: Skeleton, verification=None,
                     name: str = "") -> dict:
    """SkeletonFile payload; arrays expanded to plain lists."""
    arcs = []
    for arc in skeleton.arcs:
        arcs.append({
            "pair": [int(arc.edges[0]), int(arc.edges[1])],
            "kinds": [r.kind for r in arc.refs],
            "t_range": [float(arc.t_range[0]), float(arc.t_range[1])],
            "points": [[float(z.real), float(z.imag)]
                       for z in arc.polyline],
            "density": [float(d) for d in arc.density],
            "mass": float(arc.mass),
        })
    junctions = []
    for node in skeleton.nodes:
        junctions.append({
            "point": [float(node.z.real), float(node.z.imag)],
            "t": float(node.t),
            "kind": node.kind,
            "arcs": [int(a) for a in node.arcs],
        })
    return {
        "polygon": polygon_to_dict(skeleton.polygon, name),
        "capacity": float(skeleton.capacity),
        "arcs": arcs,
        "junctions": junctions,
        "touch_points": [[float(z.real), float(z.imag), float(t)]
                         for z, t in skeleton.touch_points],
        "total_mass": float(skeleton.mass),
        "descent": skeleton.descent.to_dict() if skeleton.descent else None,
        "verification": verification.to_dict() if verification else None,
    }


def read_skeleton_file(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_json(payload: dict, path) -> None:
    Path(path).write_text(json.dumps(payload, indent=2) + "\n",
                          encoding="utf-8")


# -- solve ---------------------------------------------------------------------


def cmd_solve(args) -> int:
    try:
        polygon, name = read_polygon_file(args.input)
    except PolygonError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_PARSE
    try:
        emap = solve_exterior_map(polygon, tol=args.tol)
    except NoConvergence as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_NOCONV
    summary = {
        "name": name,
        "n": polygon.n,
        "capacity": float(emap.capacity),
        "translation": [float(emap.translation.real),
                        float(emap.translation.imag)],
        "prevertex_angles": [float(a) for a in emap.prevertex_angles],
        "residual": float(emap.residual),
    }
    if args.json:
        print(json.dumps(summary, indent=2))
    else:
        print("polygon%s: %d vertices" % (" %r" % name if name else "",
                                          polygon.n))
        print("capacity:  %.12g" % summary["capacity"])
        print("residual:  %.3e" % summary["residual"])
        print("prevertex angles: %s"
              % " ".join("%.9f" % a for a in summary["prevertex_angles"]))
    return EXIT_OK


# -- skeleton -------------------------------------------------------------------


def cmd_skeleton(args) -> int:
    try:
        polygon, name = read_polygon_file(args.input)
    except PolygonError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_PARSE
    try:
        skeleton = build_skeleton(polygon, quad_order=args.quad_order,
                                  force=args.force)
    except NoConvergence as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_NOCONV
    except DescentViolation as exc:
        payload = {"error": "descent violation", "detail": str(exc)}
        report = getattr(exc, "report", None)
        if report is not None:
            payload["descent"] = report.to_dict()
        if args.out:
            write_json(payload, args.out)
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_VIOLATION

    report = verify_skeleton(skeleton)
    payload = skeleton_to_dict(skeleton, report, name)
    if args.out:
        write_json(payload, args.out)
    if args.svg:
        from .plotting import save_svg, skeleton_figure

        save_svg(skeleton_figure(skeleton, levels=args.levels), args.svg)
    print("arcs: %d (bound %d)  mass: %.12f  verification: %s"
          % (skeleton.arc_count, 2 * polygon.n - 3, skeleton.mass,
             report.verdict))
    if report.notes:
        for note in report.notes:
            print("note: %s" % note)
    return EXIT_OK


# -- check-descent ---------------------------------------------------------------


def cmd_check_descent(args) -> int:
    try:
        polygon, _name = read_polygon_file(args.input)
    except PolygonError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_PARSE
    try:
        system = ZeroSetSystem(solve_exterior_map(polygon))
    except NoConvergence as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_NOCONV
    report = system.check_strict_descent(sampling_step=args.step)
    payload = report.to_dict()
    if args.out:
        write_json(payload, args.out)
    print(json.dumps(payload, indent=2))
    if report.verdict == "pass":
        return EXIT_OK
    if report.verdict == "fail":
        return EXIT_DESCENT_FAIL
    return EXIT_INCONCLUSIVE


# -- sweep -----------------------------------------------------------------------


def _sweep_one(task: tuple[int, int, float | None]) -> dict:
    n, seed, step = task
    t0 = time.perf_counter()
    try:
        polygon = random_convex_polygon(n, seed=seed)
        system = ZeroSetSystem(solve_exterior_map(polygon))
        report = system.check_strict_descent(sampling_step=step)
        row = {
            "seed": seed,
            "verdict": report.verdict,
            "min_margin": (None if not np.isfinite(report.margin)
                           else float(report.margin)),
            "report": report.to_dict(),
        }
    except SkeletalError as exc:
        row = {"seed": seed, "verdict": "error",
               "min_margin": None, "report": {"error": str(exc)}}
    row["runtime"] = time.perf_counter() - t0
    return row


def _sweep_workers() -> int:
    env = os.environ.get("SKELETAL_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def cmd_sweep(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(args.n, args.seed + k, args.step)
             for k in range(args.samples)]
    workers = _sweep_workers()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, tasks))
    else:
        rows = [_sweep_one(t) for t in tasks]

    csv_path = out_dir / "summary.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "verdict", "min_margin", "runtime"])
        for row in rows:
            writer.writerow([
                row["seed"], row["verdict"],
                "" if row["min_margin"] is None
                else "%.12g" % row["min_margin"],
                "%.3f" % row["runtime"],
            ])
    for row in rows:
        write_json(row["report"], out_dir / ("descent-%d.json" % row["seed"]))

    counts: dict[str, int] = {}
    for row in rows:
        counts[row["verdict"]] = counts.get(row["verdict"], 0) + 1
    print("sweep n=%d samples=%d -> %s  (%s)"
          % (args.n, args.samples,
             " ".join("%s:%d" % kv for kv in sorted(counts.items())),
             csv_path))
    return EXIT_OK


# -- entry ----------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="skeletal",
        description="Electrostatic skeletons of convex polygons.")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="exterior map summary")
    sp.add_argument("input", help="PolygonFile JSON path")
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("skeleton", help="build, verify, and export")
    sp.add_argument("input", help="PolygonFile JSON path")
    sp.add_argument("--out", help="SkeletonFile JSON output path")
    sp.add_argument("--svg", help="figure output path")
    sp.add_argument("--levels", type=int, default=4,
                    help="level sets per side of the boundary (0 disables)")
    sp.add_argument("--quad-order", type=int, default=12)
    sp.add_argument("--force", action="store_true",
                    help="attempt the build even if the descent check fails")
    sp.set_defaults(func=cmd_skeleton)

    sp = sub.add_parser("check-descent", help="strict-descent report")
    sp.add_argument("input", help="PolygonFile JSON path")
    sp.add_argument("--step", type=float, default=None,
                    help="sampling step along tie branches")
    sp.add_argument("--out", help="write the report JSON here too")
    sp.set_defaults(func=cmd_check_descent)

    sp = sub.add_parser("sweep", help="randomized descent batches")
    sp.add_argument("--n", type=int, required=True, choices=range(3, 13),
                    metavar="N", help="polygon vertex count (3..12)")
    sp.add_argument("--samples", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--step", type=float, default=None)
    sp.add_argument("--out", default="sweep-out")
    sp.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if getattr(args, "samples", 1) < 1:
        print("error: --samples must be at least 1", file=sys.stderr)
        return EXIT_PARSE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
