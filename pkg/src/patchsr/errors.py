"""Exception hierarchy shared across the package."""


class PatchSrError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(PatchSrError, ValueError):
    """Shapes or sizes are inconsistent with what an operation requires."""


class ParameterError(PatchSrError, ValueError):
    """A scalar parameter is outside its admissible range."""


class ConvexityGateError(ParameterError):
    """gamma is too small for the prox subproblem to be strictly convex.

    Proximal points are only computed when uniqueness is guaranteed;
    refusing the computation beats silently returning one of several
    minimizers.
    """


class FormatError(PatchSrError, ValueError):
    """A file does not conform to its declared on-disk format."""


class CoverageError(PatchSrError, ValueError):
    """Patch aggregation found pixels not covered by any patch."""


class NumericError(PatchSrError, ArithmeticError):
    """A numeric computation produced non-finite values."""

    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration
