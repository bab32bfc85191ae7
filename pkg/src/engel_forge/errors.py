"""Exception hierarchy for engel_forge."""


class EngelForgeError(Exception):
    """Base class for all engel_forge errors."""


class InvalidInputError(EngelForgeError):
    """Arguments outside an operation's documented domain."""


class OutOfDomainError(EngelForgeError):
    """Point or curve leaves the domain of a chart or window."""


class DegenerateVelocityError(EngelForgeError):
    """Curve speed fell below the regularity threshold."""

    def __init__(self, t, speed):
        super().__init__(f"degenerate velocity |g'({t})| = {speed:.3e}")
        self.t = t
        self.speed = speed


class NotLocallyConvexError(EngelForgeError):
    """Plane curvature vanishes or changes sign."""


class NoPathError(EngelForgeError):
    """Inputs lie in different components of the space of convex curves."""


class ShrinkEpsilonError(EngelForgeError):
    """Deformation window too large for a chart-graphical representation."""


class GlueFailureError(EngelForgeError):
    """Junction jets fail to match within tolerance."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class NotAShellError(EngelForgeError):
    """Boundary collar fails the Engel condition."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class InsufficientRotationError(EngelForgeError):
    """Boundary rotation too small for the requested radial reduction."""

    def __init__(self, message, boundary_min=None):
        super().__init__(message)
        self.boundary_min = boundary_min


class NeedsPredeformationError(EngelForgeError):
    """Angle function not monotone where an embedding endpoint must be solved."""


class InvalidProfileError(EngelForgeError):
    """Radial profile violates monotonicity or collar positivity."""


class InvalidPumpError(EngelForgeError):
    """Target derivative nonpositive inside the active cutoff region."""


class InvalidFlagError(EngelForgeError):
    """Formal flag containments violated beyond tolerance."""


class InvalidFormError(EngelForgeError):
    """Defining 1-form vanishes at the evaluation point."""


class InvalidConeError(EngelForgeError):
    """Cone curve of a Lorentzian prolongation is not convex."""


class ObstructedFillError(EngelForgeError):
    """Monotone extension obstructed (endpoint angles cross)."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class UnsupportedKError(EngelForgeError):
    """Filling requested for a band rotation the pipeline does not support."""


class ConfigError(EngelForgeError):
    """Malformed run configuration or shell specification."""
