"""Exception hierarchy shared across the workbench.

The CLI maps these onto exit codes: validation/configuration problems exit 1,
stage failures exit 2, adapter transport failures exit 3.
"""


class TrialMatchError(Exception):
    """Base class for all workbench errors."""


class ValidationError(TrialMatchError):
    """Input data violates an invariant (bad record, bad field, bad id)."""


class ConfigError(TrialMatchError):
    """Invalid configuration (weights, paths, field selections)."""


class ParseError(TrialMatchError):
    """Boolean query text could not be parsed.

    ``offset`` is the byte offset into the UTF-8 encoding of the query where
    parsing failed.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class AdapterError(TrialMatchError):
    """The inference or embedding service failed or was unreachable."""


class ReplyFormatError(TrialMatchError):
    """An adapter reply did not match the expected structured format."""

    def __init__(self, message: str, raw_reply: str):
        super().__init__(message)
        self.raw_reply = raw_reply


class StageError(TrialMatchError):
    """A pipeline stage failed; carries the stage name for the CLI."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}': {message}")
        self.stage = stage
