"""Exception types shared across the package."""


class DRSMPCError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DRSMPCError, ValueError):
    """Inconsistent dimensions or unsupported settings."""


class ValidationError(DRSMPCError, ValueError):
    """A numeric input violates a documented precondition."""


class LICQError(DRSMPCError):
    """Active constraint normals are linearly dependent."""


class InfeasibleError(DRSMPCError):
    """The constraint set of a QP has no feasible point.

    ``certificate`` holds row indices whose constraints are jointly infeasible.
    """

    def __init__(self, message, certificate=()):
        super().__init__(message)
        self.certificate = tuple(certificate)


class IterationLimitError(DRSMPCError):
    """The active-set iteration cap was reached."""


class EmptySetError(DRSMPCError, ValueError):
    """An operation requires a nonempty polytope."""
