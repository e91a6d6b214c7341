"""
Exception types raised by floatlab.

Every numerical failure is a FloatlabError subclass so callers (and the CLI)
can tell a computation that did not converge apart from a programming error.
"""

from typing import Optional


class FloatlabError(Exception):
    """Base class for floatlab failures."""


class CurvatureUnavailable(FloatlabError):
    """Boundary point is not a normal point (polytope vertex or edge)."""


class ToleranceNotMet(FloatlabError):
    """Adaptive quadrature ran out of refinement budget."""

    def __init__(self, message: str, estimate: float = float("nan"), error: float = float("nan")):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class RootNotBracketed(FloatlabError):
    """Cap-measure root search has no sign change (delta too large)."""


class EmptyIntersection(FloatlabError):
    """Halfspace system has no interior point."""


class Unbounded(FloatlabError):
    """Halfspace normals do not positively span the space."""


class EmptyFloatingBody(FloatlabError):
    """Floating body vanished for the requested delta."""


class EnvelopeExceeded(FloatlabError):
    """Rejection sampler saw a density value above its envelope."""


class OutOfChart(FloatlabError):
    """Point lies outside the domain of a gnomonic chart."""


class ImproperBody(FloatlabError):
    """Spherical body does not lie in an open hemisphere."""


class BudgetTooSmall(FloatlabError):
    """Vertex or facet budget below the minimum of 3."""


class ConfigError(FloatlabError, ValueError):
    """Invalid experiment configuration.

    Args:
        message: Human readable description
        field: Name of the offending config key, if known
    """

    def __init__(self, message: str, field: Optional[str] = None):
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field


class ExperimentError(FloatlabError):
    """Computation error raised while running an experiment.

    Carries the module the original error came from so the CLI can report
    where a run failed.
    """

    def __init__(self, module: str, cause: Exception):
        super().__init__(f"[{module}] {type(cause).__name__}: {cause}")
        self.module = module
        self.cause = cause
