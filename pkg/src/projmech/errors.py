"""Exception types raised by projmech.

Every error that reflects a geometric or numerical failure mode has its
own class so callers (and the CLI exit-code mapping) can distinguish
them without parsing messages.
"""


class ProjmechError(Exception):
    """Base class for all projmech errors."""


class SingularMetric(ProjmechError):
    """Metric matrix is singular or too ill-conditioned to invert.

    Raised when the estimated condition number exceeds 1e12.
    """


class DifferentiationFailure(ProjmechError):
    """A finite-difference stencil evaluated the field to a non-finite value."""


class DegenerateConstraints(ProjmechError):
    """Constraint covectors are linearly dependent at the queried point."""


class IllPosedDynamics(ProjmechError):
    """The stacked projected-dynamics system has no acceptable solution.

    Raised when the least-squares residual of the combined projected
    Euler-Lagrange block and differentiated-constraint block exceeds
    1e-10 (relative to the right-hand side scale).
    """


class IntegrationFailure(ProjmechError):
    """A time step produced a non-finite state.

    Carries the partial trajectory up to the last good sample in the
    ``trajectory`` attribute (``None`` if the failure happened before
    the first step completed).
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class FirstClassConstraint(ProjmechError):
    """The constraint bracket matrix is (numerically) singular.

    The Dirac construction requires a second-class set: the matrix of
    pairwise brackets must be invertible (condition number below 1e10).
    """


class NotSymplecticOnLeaf(ProjmechError):
    """The leaf block of a Poisson tensor is singular where it must invert."""
