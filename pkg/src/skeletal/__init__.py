"""Electrostatic skeletons of convex polygons.

The package computes the exterior Green function of a convex polygon,
follows its descent structure through Schwarz reflections across the
sides, and assembles the skeleton: the union of curves where reflected
potentials tie, together with the measures they carry.
"""

from .errors import (
    AtomCollision,
    BranchAmbiguity,
    BranchExhausted,
    CrossingMatching,
    DescentViolation,
    DuplicateVertex,
    IllConditioned,
    IterationCap,
    LoopError,
    MapError,
    NearVertexGradient,
    NoConvergence,
    NonConvex,
    NotCritical,
    NoTangency,
    OutOfRange,
    PointInsideDomain,
    PolygonError,
    ReflectionInsideDomain,
    SkeletalError,
    SolveFailure,
    TooFewVertices,
    TraceError,
    TraceStall,
)
from .geometry import ConvexPolygon, Wedge, validate_polygon
from .conformal import ExteriorMap, solve_exterior_map
from .reflections import ReflectedGreen, reflected_family
from .zerosets import DescentReport, ZeroBranch, ZeroSetSystem
from .loops import (
    BranchRef,
    DiscreteMeasure,
    Junction,
    Loop,
    LoopArc,
    LoopCheck,
    advance_loop,
    arc_measure,
    boundary_loop,
    branch_ref,
    decompose_critical,
    evolve_to_critical,
    is_regular_loop,
    loop_measure,
)
from .oracle import BemSolution, bem_green, solve_bem
from .skeleton import (
    Skeleton,
    SkeletonArc,
    SkeletonNode,
    StepRecord,
    SymmetryStructure,
    VerificationReport,
    build_skeleton,
    equilibrium_potential,
    potential,
    symmetry_structure,
    verify_skeleton,
)

__all__ = [
    "AtomCollision",
    "BemSolution",
    "BranchAmbiguity",
    "BranchExhausted",
    "BranchRef",
    "ConvexPolygon",
    "CrossingMatching",
    "DescentReport",
    "DescentViolation",
    "DiscreteMeasure",
    "DuplicateVertex",
    "ExteriorMap",
    "IllConditioned",
    "IterationCap",
    "Junction",
    "Loop",
    "LoopArc",
    "LoopCheck",
    "LoopError",
    "MapError",
    "NearVertexGradient",
    "NoConvergence",
    "NonConvex",
    "NotCritical",
    "NoTangency",
    "OutOfRange",
    "PointInsideDomain",
    "PolygonError",
    "ReflectedGreen",
    "Skeleton",
    "SkeletonArc",
    "SkeletonNode",
    "StepRecord",
    "SymmetryStructure",
    "ReflectionInsideDomain",
    "SkeletalError",
    "SolveFailure",
    "TooFewVertices",
    "TraceError",
    "TraceStall",
    "VerificationReport",
    "Wedge",
    "ZeroBranch",
    "ZeroSetSystem",
    "advance_loop",
    "arc_measure",
    "bem_green",
    "boundary_loop",
    "build_skeleton",
    "branch_ref",
    "decompose_critical",
    "equilibrium_potential",
    "evolve_to_critical",
    "is_regular_loop",
    "loop_measure",
    "potential",
    "symmetry_structure",
    "reflected_family",
    "solve_bem",
    "validate_polygon",
    "verify_skeleton",
    "solve_exterior_map",
]

__version__ = "0.1.0"
