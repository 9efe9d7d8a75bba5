"""Exception hierarchy shared by every stage.

The CLI maps these onto exit codes: input/format problems exit 2, config
problems exit 3, anything else exits 4.
"""


class VidsumError(Exception):
    """Base class for all errors raised by this package."""


class InputError(VidsumError, ValueError):
    """Caller supplied data that violates an operation's preconditions."""


class FormatError(InputError):
    """A file on disk is missing, truncated or malformed."""


class UnsupportedFormatError(FormatError):
    """A well-formed file uses a feature we do not decode (e.g. Y4M 4:2:2)."""


class DegenerateInputError(InputError):
    """Input is too small or too short for the requested computation."""


class ConfigError(VidsumError, ValueError):
    """Unknown key or out-of-range value in a pipeline configuration."""


class StageError(VidsumError):
    """Wraps a failure inside a pipeline stage, naming the stage."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
