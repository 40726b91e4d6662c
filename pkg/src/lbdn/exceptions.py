"""Exception hierarchy shared by every lbdn module."""


class LBDNError(Exception):
    """Base class for all errors raised by lbdn."""


class DimensionError(LBDNError, ValueError):
    """Array shapes are inconsistent with the operation."""


class DomainError(LBDNError, ValueError):
    """An input lies outside the domain of the operation."""


class SingularMatrixError(LBDNError, ArithmeticError):
    """A linear solve hit a (numerically) singular matrix."""


class NonInvertibleTransformError(SingularMatrixError):
    """The inverse Cayley transform is undefined (eigenvalue at -1)."""


class ConvergenceError(LBDNError, ArithmeticError):
    """An iterative method failed to converge.

    Attributes:
        last_value: the final iterate's estimate when iteration stopped.
    """

    def __init__(self, message, last_value=None):
        super().__init__(message)
        self.last_value = last_value


class SeedingError(LBDNError, RuntimeError):
    """Bounded random redraws were exhausted."""


class InfeasibleError(LBDNError, ValueError):
    """Weights and multipliers do not satisfy the LMI certificate."""


class InternalConsistencyError(LBDNError, RuntimeError):
    """A numerical invariant that should hold by construction was violated."""


class GradientError(LBDNError, FloatingPointError):
    """A non-finite adjoint was produced during backpropagation."""


class FormatVersionError(LBDNError, ValueError):
    """A serialized document carries an unsupported format version."""


class DivergenceError(LBDNError, FloatingPointError):
    """Training produced a non-finite loss.

    Attributes:
        epoch: the epoch at which divergence was detected.
    """

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch
