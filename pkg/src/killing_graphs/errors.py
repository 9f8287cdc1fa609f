"""Exception and warning types shared across the package."""


class KillingGraphError(Exception):
    """Base class for every error raised by this package."""


class InputError(KillingGraphError, ValueError):
    """Arguments violate a documented precondition."""


class ConfigError(InputError):
    """A run configuration is missing a key or contains an unknown one."""


class ProfileEvaluationError(KillingGraphError):
    """A radial profile produced a non-finite sample."""


class DomainError(InputError):
    """A tabulated profile was evaluated outside its table."""


class JacobiRangeError(KillingGraphError, OverflowError):
    """The Jacobi field left the representable range."""

    def __init__(self, radius):
        self.radius = float(radius)
        super().__init__(f"Jacobi field overflowed at r = {self.radius!r}")


class PoleSingularityError(InputError):
    """A quantity with a coordinate singularity was requested at r = 0."""


class FluxAdmissibilityViolated(KillingGraphError):
    """The flux integral reached the isoperimetric limit."""

    def __init__(self, radius):
        self.radius = float(radius)
        super().__init__(f"flux denominator vanished at r = {self.radius!r}")


class IntegrabilityError(KillingGraphError):
    """An improper integral did not pass the tail test."""

    def __init__(self, message, partial_values=()):
        self.partial_values = tuple(float(v) for v in partial_values)
        super().__init__(message)


class AdmissibilityError(KillingGraphError):
    """A mean curvature bound needed by a construction fails."""

    def __init__(self, message, witness=None):
        self.witness = witness
        super().__init__(message)


class NumericalError(KillingGraphError, ArithmeticError):
    """A discrete operator produced a non-finite value."""

    def __init__(self, message, node=None):
        self.node = node
        super().__init__(message)


class NonConvergence(KillingGraphError):
    """Newton iteration stopped before reaching the tolerance."""

    def __init__(self, iterations, residual):
        self.iterations = int(iterations)
        self.residual = float(residual)
        super().__init__(
            f"Newton did not converge after {self.iterations} iterations "
            f"(max residual {self.residual!r})"
        )


class SingularLinearSystem(KillingGraphError):
    """The Newton linear system had a zero pivot."""

    def __init__(self, node):
        self.node = node
        super().__init__(f"singular Jacobian at node {node}")


class AdmissibilityWarning(UserWarning):
    """A sufficient admissibility condition failed; the solve goes ahead."""
