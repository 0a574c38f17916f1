"""Exception taxonomy shared by all whlab modules.

Precondition violations map to CLI exit code 2, numerical convergence
failures to exit code 3.
"""

from __future__ import annotations

EXIT_OK = 0
EXIT_PRECONDITION = 2
EXIT_CONVERGENCE = 3


class WhlabError(Exception):
    """Base class for all package errors."""


class PreconditionError(WhlabError, ValueError):
    """An operation was called outside its contract."""


class DimensionMismatchError(PreconditionError):
    pass


class DegenerateShapeError(PreconditionError):
    """Zero radius, repeated vertices, empty interval, and the like."""


class UnsupportedShapeError(PreconditionError):
    """Shape/operation pairing that the artifact deliberately does not cover."""


class GrazingRayError(WhlabError):
    """A ray meets a boundary tangentially (or hits a corner) within tolerance.

    Callers that sample offsets should catch this and retry with a jittered
    offset rather than silently counting 0 or 2 crossings.
    """


class ResolutionError(PreconditionError):
    """Grid does not resolve the kernel oscillation (too few points per period)."""


class MemoryGuardError(PreconditionError):
    """Requested matrix exceeds the configured memory budget."""


class ConvergenceError(WhlabError):
    """An iterative numerical procedure failed to converge."""


class NonIntegrableError(ConvergenceError):
    """Endpoint behaviour of an integrand is too singular to integrate."""


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, PreconditionError):
        return EXIT_PRECONDITION
    if isinstance(exc, ConvergenceError):
        return EXIT_CONVERGENCE
    if isinstance(exc, WhlabError):
        return EXIT_PRECONDITION
    return 1
