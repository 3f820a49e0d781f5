"""Exception hierarchy for spindepth."""


class SpinDepthError(Exception):
    """Base class for all library errors."""


class ConvergenceFailure(SpinDepthError, ArithmeticError):
    pass


class DimensionMismatch(SpinDepthError, ValueError):
    pass


class NonIntegerSpin(SpinDepthError, ValueError):
    pass


class SpinMismatch(SpinDepthError, ValueError):
    pass


class ConstraintInfeasible(SpinDepthError, ValueError):
    pass


class OutOfRange(SpinDepthError, ValueError):
    pass


class UnphysicalRecord(SpinDepthError, ValueError):
    pass


class NotApplicable(SpinDepthError, ValueError):
    pass


class NotQubit(SpinDepthError, ValueError):
    pass


class MissingFields(SpinDepthError, ValueError):
    pass


class NotSymmetric(SpinDepthError, ValueError):
    pass


class SizeLimitExceeded(SpinDepthError, ValueError):
    pass


class BinUnderflow(SpinDepthError, ValueError):
    pass
