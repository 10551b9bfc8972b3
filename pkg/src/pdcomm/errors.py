"""Exception hierarchy for pdcomm."""


class PdcommError(Exception):
    """Base class for all library errors."""


class NumericalError(PdcommError):
    """A numerical routine could not produce a trustworthy value."""


class CutoffTooSmallError(NumericalError, ValueError):
    pass


class QuadratureNotConvergedError(NumericalError):
    pass


class NumericalPositivityError(NumericalError):
    pass


class ThresholdSearchError(NumericalError):
    pass


class OptimizerNotConvergedError(NumericalError):
    pass


class DimensionMismatchError(PdcommError, ValueError):
    pass


class EmptyHypothesisError(PdcommError, ValueError):
    pass


class CalibrationError(PdcommError, ValueError):
    pass


class OutOfRangeError(CalibrationError):
    pass


class InsufficientBinsError(CalibrationError):
    pass


class DegenerateVoltagesError(CalibrationError):
    pass


class ConfigError(PdcommError, ValueError):
    pass


class SchemaMismatchError(PdcommError, ValueError):
    pass
