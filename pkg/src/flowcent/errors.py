"""Exception hierarchy shared across the package."""


class FlowcentError(Exception):
    """Base class for all package-specific failures."""


class ConvergenceError(FlowcentError):
    """A numerical kernel (eigensolver, SVD, matrix exponential) failed to converge
    or overflowed. Never silently returns garbage."""


class IntegrationError(FlowcentError):
    """ODE integration failed (step-size underflow / stiff blowup).

    ``last_t`` records the last time the integrator reached before giving up.
    """

    def __init__(self, message, last_t=None):
        super().__init__(message)
        self.last_t = last_t


class MatchError(FlowcentError):
    """Orbit matching failed: the candidate flow is not a reparameterization of
    the reference flow at the probed point, or the matching window is too large."""


class HypothesisError(FlowcentError):
    """A procedure was invoked outside the hypotheses under which its conclusion
    is guaranteed (e.g. non-hyperbolic or resonant spectrum)."""


class EnumerationCapError(FlowcentError):
    """A finite-but-exhaustive enumeration exceeded its configured budget."""


class ConfigError(FlowcentError):
    """Invalid experiment configuration (strict schema violation)."""
