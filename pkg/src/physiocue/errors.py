"""Exception hierarchy shared by every analysis module."""


class PhysiocueError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(PhysiocueError, ValueError):
    """Arguments violate an operation's preconditions."""


class DegenerateSignalError(PhysiocueError, ValueError):
    """A signal carries no usable variation (constant, colinear, ...).

    ``window_index`` is set when the failure is localised to one internal
    analysis window.
    """

    def __init__(self, message, window_index=None):
        super().__init__(message)
        self.window_index = window_index


class NoEdgesError(PhysiocueError, ValueError):
    """An intensity trace contains no detectable on/off transitions."""


class InsufficientEvidenceError(PhysiocueError, ValueError):
    """Too few observations to support an estimate."""


class ParseError(PhysiocueError):
    """Malformed input file.  ``row`` and ``column`` locate the offence."""

    def __init__(self, message, path=None, row=None, column=None):
        loc = []
        if path is not None:
            loc.append(str(path))
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        super().__init__(f"{', '.join(loc)}: {message}" if loc else message)
        self.path = path
        self.row = row
        self.column = column


class ConfigError(PhysiocueError):
    """Unknown key or badly typed value in a configuration document."""
