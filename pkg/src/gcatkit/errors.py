"""Exception hierarchy shared by all gcatkit modules."""


class GcatkitError(Exception):
    """Base class for all errors raised by this package."""


class EmptyDatasetError(GcatkitError):
    """An operation received a dataset with no triples."""


class InvalidConfigError(GcatkitError):
    """A configuration value violates its documented constraints."""


class ParseError(GcatkitError):
    """A text input (triple file or config file) is malformed.

    Carries the offending line number when one is known.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
            if line is not None:
                prefix += f"{line}:"
            prefix += " "
        super().__init__(prefix + message)


class IoError(GcatkitError):
    """A file could not be read or written."""


class FormatError(GcatkitError):
    """A checkpoint file does not start with the expected magic/header."""


class ShapeError(GcatkitError):
    """Matrix shapes are inconsistent with an operation's contract."""


class ChecksumError(GcatkitError):
    """A checkpoint's trailing CRC-32 does not match its payload."""


class ContractError(GcatkitError):
    """An API precondition was violated (e.g. backward on a non-scalar)."""


class DivergenceError(GcatkitError):
    """Training produced a non-finite loss."""


class RetryableKinkError(GcatkitError):
    """Gradient checking landed too close to a non-differentiable point.

    The caller should resample inputs and retry.
    """
