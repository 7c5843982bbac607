"""Exception hierarchy for the qphi toolkit."""


class QphiError(Exception):
    """Base class for all toolkit errors."""


class TraceFormatError(QphiError):
    """Raised when a trace file cannot be parsed.

    Carries the 1-based line number of the offending row when known.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TraceValidationError(QphiError):
    """Raised when a trace violates a structural invariant."""


class NoPlateauError(QphiError):
    """Raised when no plateau is found (the device never reset in this sweep)."""

    def __init__(self, message="no plateau"):
        super().__init__(message)


class NoIntersectionError(QphiError):
    """Raised when the rise and plateau lines are parallel within tolerance."""

    def __init__(self, message="no intersection: fitted lines are parallel"):
        super().__init__(message)


class ImplausibleResetError(QphiError):
    """Raised when the line intersection falls outside the observed curve."""

    def __init__(self, message="implausible reset point"):
        super().__init__(message)


class FitQualityError(QphiError):
    """Raised when a line fit's residual exceeds the configured bound."""


class FlatFluxError(QphiError):
    """Raised when flux is locally constant at an inversion query (no unique inverse)."""

    def __init__(self, segment_index, message=None):
        self.segment_index = segment_index
        if message is None:
            message = f"flux is constant over segment {segment_index}: no unique inverse"
        super().__init__(message)


class SamplingError(QphiError):
    """Raised when Monte-Carlo parameter sampling cannot proceed."""
