"""Exception types shared across the package."""


class GcsError(Exception):
    """Base class for all package errors."""


class NonConvexSupport(GcsError):
    """Support-function curve has non-positive curvature radius somewhere."""


class RegularityError(GcsError):
    """Curve speed drops below the regularity tolerance."""


class SchemaError(GcsError):
    """Malformed curve or family specification."""


class BranchLinkFailure(GcsError):
    """Continuation could not assemble refined pair points into branches."""


class DegenerateLambda(GcsError):
    """Operation undefined at lambda in {0, 1}."""


class DegenerateContact(GcsError):
    """Chord/curve contact order exceeds the generic taxonomy (order > 3)."""


class NotBitangent(GcsError):
    """Operation requires a bitangent pair."""


class EnvelopeDegenerate(GcsError):
    """Chord family momentarily stationary; envelope point undefined."""


class NewtonDivergence(GcsError):
    """Newton/Gauss-Newton iteration failed to converge."""


class RatioUndefined(GcsError):
    """Curvature ratio undefined (zero curvature at the lower endpoint)."""


class UnrealizableAtDimension(GcsError):
    """Requested normal form needs more variables than the given m."""


class FitWindowTooSmall(GcsError):
    """Local graph condition fails inside the jet-fitting window."""


class A2ConditionFailed(GcsError):
    """Fold condition violated: the point is on the singular locus."""


class EmptyScene(GcsError):
    """Scene contains no geometry to draw."""
