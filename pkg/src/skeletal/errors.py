"""Exception hierarchy shared across the package.

Every failure mode that callers are expected to branch on gets its own
class; everything derives from SkeletalError so CLI code can catch the
whole family in one place.
"""


class SkeletalError(Exception):
    """Base class for all package-specific failures."""


# ---- polygon validation -------------------------------------------------

class PolygonError(SkeletalError):
    pass


class TooFewVertices(PolygonError):
    pass


class DuplicateVertex(PolygonError):
    pass


class NonConvex(PolygonError):
    pass


# ---- conformal map ------------------------------------------------------

class MapError(SkeletalError):
    pass


class NoConvergence(MapError):
    """Parameter problem did not reach the requested residual."""


class IllConditioned(MapError):
    """Prevertices collided; the side-length system lost rank."""


class PointInsideDomain(MapError):
    """Evaluation requested strictly inside the polygon."""


class NearVertexGradient(MapError):
    """Gradient requested within the cutoff distance of a corner."""


class ReflectionInsideDomain(MapError):
    """Reflected evaluation point landed strictly inside the polygon."""


# ---- zero sets ----------------------------------------------------------

class TraceError(SkeletalError):
    pass


class TraceStall(TraceError):
    """Corrector failed below the minimum continuation step."""


class BranchAmbiguity(TraceError):
    """More than one local solution component near a seed point."""


class NoTangency(TraceError):
    """Level curves of the two reflections never touched."""


class OutOfRange(TraceError):
    """Level value outside the traced (and traceable) span of a branch."""


# ---- loops and skeleton -------------------------------------------------

class LoopError(SkeletalError):
    pass


class DescentViolation(LoopError):
    """Strict descent failed: an internal angle reached pi or a zero-set
    sweep found a non-repelling parallel point."""


class BranchExhausted(LoopError):
    """A loop vertex needed a branch segment that could not be traced."""


class NotCritical(LoopError):
    """decompose_critical called on a loop with no terminal event."""


class CrossingMatching(LoopError):
    """Contact matching produced crossing chords."""


class IterationCap(LoopError):
    """More decompositions than the combinatorial bound allows."""


class AtomCollision(SkeletalError):
    """Potential evaluation requested at (or on top of) a measure atom."""


# ---- boundary-integral oracle --------------------------------------------

class SolveFailure(SkeletalError):
    """The Nystrom system could not be solved to working precision."""
