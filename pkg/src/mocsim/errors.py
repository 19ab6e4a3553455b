"""Exception hierarchy shared by every module."""


class MocError(Exception):
    """Base class for all simulator errors."""


class InvalidOrderError(MocError, ValueError):
    pass


class LabelLengthError(MocError, ValueError):
    pass


class AlphabetError(MocError, ValueError):
    """A symbol does not belong to the expected alphabet."""


class ShapeError(MocError, ValueError):
    pass


class SingularChannelError(MocError, ZeroDivisionError):
    pass


class UnsupportedPairError(MocError, ValueError):
    pass


class InfeasibleError(MocError):
    """An optimisation or feasibility problem has no solution.

    ``detail`` carries the quantity that made it infeasible (the minimum
    achievable BER bound, the worst antenna, ...).
    """

    def __init__(self, message, detail=None):
        super().__init__(message)
        self.detail = detail


class RestrictedInfeasibleError(InfeasibleError):
    """The real-part restriction is infeasible although the modulus form may not be."""


class FrameLengthError(MocError, ValueError):
    pass


class DecodeFailureError(MocError):
    pass


class ProtocolError(MocError, ValueError):
    pass


class DurationError(MocError, ValueError):
    pass


class DivergenceError(MocError, ValueError):
    """Series evaluated outside its convergence disc."""


class DegenerateFunctionError(MocError, ValueError):
    pass


class BoundUnavailableError(MocError, ValueError):
    pass


class CoverageError(MocError, ValueError):
    def __init__(self, message, gaps=()):
        super().__init__(message)
        self.gaps = tuple(gaps)


class SampleSizeError(MocError, ValueError):
    pass


class ConfigError(MocError, ValueError):
    pass
