"""Exception taxonomy shared across the package.

The split mirrors the CLI exit codes: bad files or mismatched shapes are
data errors, while singular matrices, degenerate distributions and
diverging optimizations are numeric failures. Invalid arguments and
configurations raise plain ValueError.
"""


class BigsetError(Exception):
    """Base class for library-specific failures."""


class DataFormatError(BigsetError):
    """A file could not be parsed, or array shapes do not line up."""


class NumericError(BigsetError):
    """A computation failed numerically (singular matrix, non-finite
    values, degenerate distribution).

    May carry a ``trace`` attribute with partial per-epoch losses when
    raised from inside a training loop.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
