"""Exception taxonomy shared across the pipeline."""


class FitroomError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(FitroomError):
    """Caller-supplied data violates an operation's preconditions."""


class ContractViolationError(FitroomError):
    """A pluggable component returned data that breaks its contract."""


class BackendError(FitroomError):
    """A perception backend failed; carries the backend name."""

    def __init__(self, backend: str, message: str):
        super().__init__(f"backend '{backend}': {message}")
        self.backend = backend


class PoseIncompleteError(FitroomError):
    """Required keypoints are missing for the requested operation."""


class NumericError(FitroomError):
    """Non-finite values appeared inside a numeric computation."""


class ConfigurationError(FitroomError):
    """A config file or backend binding is unusable."""


class InsufficientSamplesError(FitroomError):
    """Too few samples to estimate the requested statistic."""


class NotFoundError(FitroomError):
    """A referenced file or directory does not exist."""


class ValidationError(FitroomError):
    """An on-disk artifact exists but fails its schema checks."""


class StageFailure(FitroomError):
    """Wraps an error raised inside a named pipeline stage."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}': {cause}")
        self.stage = stage
        self.cause = cause
