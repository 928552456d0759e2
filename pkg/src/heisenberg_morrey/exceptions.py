"""Error types raised by heisenberg-morrey."""


class HeisenbergMorreyError(Exception):
    """Base class for every error raised by the package."""


class DimensionMismatchError(HeisenbergMorreyError, ValueError):
    """Group elements or arrays live on Heisenberg groups of different n."""


class InvalidParameterError(HeisenbergMorreyError, ValueError):
    """A numeric parameter is outside its admissible range."""


class AdmissibilityError(InvalidParameterError):
    """Exponents violate the hypotheses of the theorem a sweep targets."""


class SeparationError(InvalidParameterError):
    """A smoothness triple violates |v^-1 u| <= |w^-1 u| / 2."""


class QuadratureError(HeisenbergMorreyError, RuntimeError):
    """A quadrature did not converge within its node budget."""


class TruncationError(QuadratureError):
    """Heat-kernel mass outside the truncation ball exceeds tolerance."""


class TailError(QuadratureError):
    """Subordination tail estimate exceeds tolerance."""


class DeltaApproximationError(QuadratureError):
    """Bump-width refinement of a point source did not converge."""


class GridResolutionError(HeisenbergMorreyError, RuntimeError):
    """Grid propagation lost too much mass through the box boundary."""


class BracketingError(HeisenbergMorreyError, RuntimeError):
    """The critical-radius functional never crosses 1 on the search grid."""


class FitInfeasibleError(HeisenbergMorreyError, RuntimeError):
    """No constant pair on the search grid satisfies the sampled inequalities."""
