"""Exception hierarchy shared by all simulator modules."""


class SwarmStageError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(SwarmStageError, ValueError):
    """Non-finite or out-of-contract numeric input."""


class WrongClassError(SwarmStageError):
    """Operation applied to an incompatible robot class."""


class EncodeError(SwarmStageError):
    """Message cannot be serialized (oversize payload, bad field range)."""


class DecodeError(SwarmStageError):
    """Base class for wire parse failures."""


class ShortBufferError(DecodeError):
    """Buffer ends before the declared structure is complete."""


class VersionError(DecodeError):
    """Unsupported protocol version byte."""


class MessageTypeError(DecodeError):
    """Unknown message type or command kind byte."""


class LengthMismatchError(DecodeError):
    """Declared payload length disagrees with the buffer."""


class IdConflictError(SwarmStageError):
    """A node id is already registered on the bus."""


class NoFixError(SwarmStageError):
    """Position solver diverged or geometry too ill-conditioned.

    Carries a ``diagnostics`` dict (iterations, condition number, last
    residual norm) for postmortem inspection.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CalibrationError(SwarmStageError):
    """Anchor self-calibration failed (rank deficiency or bad residuals)."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CovarianceError(SwarmStageError):
    """A covariance matrix violated its symmetric-PSD contract."""


class ScriptError(SwarmStageError):
    """Performance script failed validation; message names the field path."""
