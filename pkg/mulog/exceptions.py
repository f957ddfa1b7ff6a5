"""Exceptions raised by the mulog package."""

from typing import Optional


class MulogError(Exception):
    """Base class for every error raised by mulog."""


class PixelError(MulogError):
    """Error tied to one pixel of a stack; ``pixel`` is its flat index or None."""

    def __init__(self, message: str, pixel: Optional[int] = None) -> None:
        self.reason = message
        self.pixel = pixel
        if pixel is not None:
            message = f"{message} (pixel {pixel})"
        super().__init__(message)


class InvalidInputError(MulogError, ValueError):
    """Input array has the wrong shape, size or contains non-finite values."""


class DomainError(InvalidInputError):
    """Argument outside the domain of a special function or distribution."""


class NotPositiveDefiniteError(PixelError, ValueError):
    pass


class MatrixOverflowError(PixelError, OverflowError):
    """A matrix exponential would overflow double precision."""


class DegenerateCalibrationError(MulogError):
    """Channel statistics cannot be estimated from the image."""


class SolverError(PixelError):
    pass


class DenoiserContractError(MulogError):
    """A denoiser returned an output that breaks the plug-in contract."""


class ContainerFormatError(MulogError, ValueError):
    """A covariance container file is malformed."""
