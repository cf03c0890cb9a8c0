"""Exception hierarchy shared by every module."""


class ObjawareError(Exception):
    """Base class for all library errors."""

    kind = "error"


class ParameterError(ObjawareError, ValueError):
    kind = "parameter"


class RangeError(ObjawareError, IndexError):
    kind = "range"


class ShapeError(ObjawareError, ValueError):
    kind = "shape"


class FormatError(ObjawareError, ValueError):
    kind = "format"


class LengthError(FormatError):
    kind = "length"


class TrainingError(ObjawareError, RuntimeError):
    """Raised when the loss becomes non-finite during training."""

    kind = "training"

    def __init__(self, step: int, message: str = "non-finite loss"):
        super().__init__(f"{message} at step {step}")
        self.step = step
