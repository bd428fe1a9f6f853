"""Exception types shared across the package."""


class FpwalkError(Exception):
    """Base class for all package-specific errors."""


class NonConvergence(FpwalkError):
    """An iterative solve (bisection, Newton, fixed point) failed to converge."""


class WindowOverflow(FpwalkError):
    """A lattice window would exceed the configured memory cap."""


class DefectTooLarge(FpwalkError):
    """Truncation left more unaccounted probability mass than the contract allows."""


class AtomTooLarge(FpwalkError):
    """A renewal recursion is ill-conditioned because an atom is too close to 1."""


class QuadratureFailure(FpwalkError):
    """Numerical integration did not reach the requested accuracy."""

    def __init__(self, message, achieved_error=None):
        super().__init__(message)
        self.achieved_error = achieved_error


class NormalizationUnavailable(FpwalkError):
    """A density needs an independent total-mass oracle that was not supplied."""


class SingularIntegrand(FpwalkError):
    """An integrand is numerically non-integrable near an endpoint."""


class ResolutionTooCoarse(FpwalkError):
    """The lattice scale is too coarse to resolve a continuum density."""


class PreconditionViolated(FpwalkError):
    """An operation was invoked outside its stated domain of validity."""


class ConfigError(FpwalkError):
    """A run configuration is malformed; the message names the offending key."""
