"""Exception hierarchy shared by every module."""


class NdopoError(Exception):
    """Base class for all errors raised by this package."""


class InvalidConfiguration(NdopoError, ValueError):
    """A parameter set or configuration value violates its invariants."""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if key is not None:
            prefix += f"{key}: "
        super().__init__(prefix + message)


class NoConvergence(NdopoError):
    pass


class NonphysicalState(NdopoError):
    pass


class SingularMatrix(NdopoError):
    pass


class ImaginaryResidue(NdopoError):
    """Output covariances picked up an imaginary part larger than roundoff."""


class DegenerateConditioning(NdopoError):
    pass


class InconsistentCovariance(NdopoError):
    """An inferred variance came out negative; only an upstream bug can do that."""


class NoUniqueSolution(NdopoError):
    pass


class NoRealRoot(NdopoError):
    pass


class UnstableDynamics(NdopoError):
    pass


class ExcessiveDivergence(NdopoError):
    """More than the tolerated fraction of positive-P trajectories escaped.

    The estimate computed from the surviving trajectories is attached as
    ``estimate`` so callers can still inspect it.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate
