"""Exception types shared across the platform."""


class PlatformError(Exception):
    """Base class for all domain errors raised by annoloop modules."""


class PreconditionError(PlatformError):
    """An operation was called with arguments violating its contract."""


class DuplicateIdError(PlatformError):
    def __init__(self, record_id: str):
        super().__init__(f"duplicate passage id: {record_id!r}")
        self.record_id = record_id


class MalformedRecordError(PlatformError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"malformed record at line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class StoreExhaustedError(PlatformError):
    """No unseen passage remains for a worker."""


class TransportError(PlatformError):
    """A backend could not be reached.  Carries retry metadata."""

    def __init__(self, message: str, url: str = "", attempts: int = 1):
        super().__init__(message)
        self.url = url
        self.attempts = attempts


class ProtocolViolationError(PlatformError):
    """A backend answered with data violating the wire contract."""


class PromptUnavailableError(PlatformError):
    """Neither the cache nor live generation could produce a prompt."""


class InvalidSettingError(PlatformError):
    """An experiment setting outside the valid matrix."""


class SessionError(PlatformError):
    """Session lifecycle violation (unknown id, full session, bad span...)."""


class ValidationError(PlatformError):
    """Validation workflow violation (double vote, unassigned voter...)."""


class StarvationError(ValidationError):
    """No eligible validator remains for a task."""


class ConfigError(PlatformError):
    """Service configuration rejected at startup."""
