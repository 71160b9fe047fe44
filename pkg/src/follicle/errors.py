"""Exception hierarchy shared across the pipeline."""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class DecodeError(PipelineError):
    """Image byte stream could not be decoded."""


class UnsupportedFormatError(DecodeError):
    """Byte stream is not a PNG or JPEG."""


class ParamError(PipelineError, ValueError):
    """A parameter violates its documented constraints."""


class ShapeError(PipelineError, ValueError):
    """Array shapes are inconsistent with the operation's contract."""


class SizeError(PipelineError, ValueError):
    """Image too small for the requested operation."""


class IngestError(PipelineError):
    """Dataset directory missing or unusable."""


class SplitError(PipelineError):
    """Train/test split cannot be performed."""


class ModelFormatError(PipelineError):
    """Model file is malformed, truncated, or inconsistent."""


class TrainingDiverged(PipelineError):
    """A non-finite loss or gradient was encountered during training."""


class ConfigError(PipelineError, ValueError):
    """Configuration file or flags are invalid."""
