"""Exception hierarchy shared across the package."""


class UnpromptError(Exception):
    """Base class for all package errors."""


# numerics
class DimensionMismatch(UnpromptError, ValueError):
    pass


class NotSPD(UnpromptError, ValueError):
    pass


class LeverageSingular(UnpromptError, ValueError):
    """Removing the row is undefined: its leverage is numerically 1."""


class DegenerateEdit(UnpromptError, ValueError):
    pass


class NonScalarOutput(UnpromptError, ValueError):
    pass


class NonFiniteLoss(UnpromptError, FloatingPointError):
    pass


class NonFiniteGradient(UnpromptError, FloatingPointError):
    pass


class NumericalFailure(UnpromptError, FloatingPointError):
    """A training or unlearning loop produced a non-finite value.

    ``snapshot`` holds the last finite parameter state when available.
    """

    def __init__(self, message, snapshot=None):
        super().__init__(message)
        self.snapshot = snapshot


class CovarianceFailure(UnpromptError, ArithmeticError):
    pass


# diffusion / model
class InvalidRange(UnpromptError, ValueError):
    pass


class TimestepOutOfRange(UnpromptError, ValueError):
    pass


class InvalidArch(UnpromptError, ValueError):
    pass


class ArchMismatch(UnpromptError, ValueError):
    pass


class StrategyDatasetMismatch(UnpromptError, ValueError):
    pass


# harness
class ConfigInvalid(UnpromptError, ValueError):
    pass


class MissingCheckpoint(UnpromptError, FileNotFoundError):
    pass


class IoFailure(UnpromptError, OSError):
    """Read or write failure; ``offset`` is the byte position reached."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class VersionMismatch(UnpromptError, ValueError):
    pass


class ScheduleMismatch(UnpromptError, ValueError):
    pass
