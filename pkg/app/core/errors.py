from __future__ import annotations

from typing import Optional

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class SlicingError(RuntimeError):
    """Base class for every failure raised by the testbed."""

    exit_code: int = EXIT_RUNTIME


class ConfigurationError(SlicingError):
    exit_code = EXIT_CONFIG


class CapacityError(SlicingError):
    """Raised when a materialisation would exceed its memory guard."""


class InvalidActionError(SlicingError):
    """Raised when an allocation is not a point of the grid lattice."""


class ArgumentError(SlicingError, ValueError):
    pass


class ShapeError(SlicingError, ValueError):
    pass


class NumericError(SlicingError, ArithmeticError):
    """Raised instead of letting NaN/Inf propagate through parameters."""


class CheckpointFormatError(SlicingError):
    pass


class TrainingError(SlicingError):
    def __init__(self, message: str, *, episode: int, cause: Optional[BaseException] = None) -> None:
        super().__init__(f"episode {episode}: {message}")
        self.episode = episode
        self.cause = cause
        if cause is not None and isinstance(cause, SlicingError):
            self.exit_code = cause.exit_code
