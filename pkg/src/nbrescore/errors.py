"""Exception types shared across the toolkit.

Two families matter for exit codes: ValidationError (bad inputs or config,
exit 2) and BackendError (a scoring backend failed, exit 3).
"""


class ToolkitError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(ToolkitError):
    """Invalid input data, file, or configuration."""


class ParseError(ValidationError):
    """A line of an input file could not be parsed."""

    def __init__(self, path, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = str(path)
        self.line_no = line_no
        self.reason = reason


class DuplicateUtterance(ValidationError):
    """The same utterance key appeared more than once."""


class NonContiguousIndex(ValidationError):
    """Session indices are not 0..n-1 without gaps."""


class EmptyCorpus(ValidationError):
    """A corpus with no usable content was supplied."""


class InvalidOrder(ValidationError):
    """An n-gram order outside the supported range."""


class MalformedArpa(ValidationError):
    """An ARPA model file violates the format."""


class MissingReference(ValidationError):
    """An operation needing reference transcripts found none."""


class ZeroReferenceLength(ValidationError):
    """Pooled reference length is zero, WER undefined."""


class UtteranceIdMismatch(ValidationError):
    """Two inputs that must cover the same utterance ids do not."""


class BackendError(ToolkitError):
    """A scoring backend reported or caused a failure."""


class ProtocolError(BackendError):
    """The external-scorer wire protocol was violated."""


class ScorerTimeout(BackendError):
    """An external scorer did not answer within the configured timeout."""
