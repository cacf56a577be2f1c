"""Exception types shared across the package."""


class DimensionMismatchError(ValueError):
    """Input vector length does not match the network's input dimension."""


class DegenerateDomainError(ValueError):
    """Ellipse parameters collapse to a circle (A == B)."""


class NotApplicableError(ValueError):
    """Operation requested on a domain/variant it is not defined for."""


class SingularPointError(ValueError):
    """Evaluation requested at a singular point of the transformed operator."""


class OutOfDomainError(ValueError):
    """Point lies outside the admissible coordinate ranges."""


class NonFiniteResidualError(RuntimeError):
    """A residual evaluated to NaN/inf; carries the offending point."""

    def __init__(self, index, point):
        self.index = index
        self.point = point
        super().__init__(f"non-finite residual at sample {index}: {point}")


class NumericalAbort(RuntimeError):
    """Training hit a non-finite loss; carries the last finite parameters."""

    def __init__(self, message, last_good_params, history):
        self.last_good_params = last_good_params
        self.history = history
        super().__init__(message)


class ConfigError(ValueError):
    """Invalid or unknown experiment configuration entry."""
