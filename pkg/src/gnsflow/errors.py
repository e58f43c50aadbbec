"""Exception hierarchy shared by all modules."""


class DomainError(ValueError):
    """An input lies outside the admissible parameter range."""


class CriticalCaseError(DomainError):
    """The Sobolev endpoint p = d/(d-2) was requested."""


class NonIntegrableError(ArithmeticError):
    """A weighted radial integral diverges given the fitted tail."""

    def __init__(self, message, tail_exponent=None):
        super().__init__(message)
        self.tail_exponent = tail_exponent


class VacuumError(DomainError):
    """A profile vanishes inside its support, so u^(m-1) is not representable."""


class QuadratureError(ArithmeticError):
    """An adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class ResolutionError(DomainError):
    """A rescaled profile is narrower than the grid can resolve."""


class StiffnessError(RuntimeError):
    """The flow controller kept rejecting steps below dt_min."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class TruncationWarning(UserWarning):
    """The grid radius leaves a noticeable fraction of a profile outside [0, R]."""

    def __init__(self, message, deficit=None):
        super().__init__(message)
        self.deficit = deficit
