"""Exception hierarchy shared by every pipeline stage."""


class EegError(Exception):
    """Base class for all pipeline errors."""


class ValidationError(EegError, ValueError):
    """Input data or configuration violates a documented constraint."""


class ParseError(ValidationError):
    """A recording or manifest file could not be parsed.

    ``row`` is the 1-based data row (header excluded) and ``column`` the
    channel name, when the problem can be pinned to a cell.
    """

    def __init__(self, message, row=None, column=None, source=None):
        self.row = row
        self.column = column
        self.source = source
        where = []
        if source is not None:
            where.append(str(source))
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class ConvergenceError(EegError, RuntimeError):
    """The SMO solver hit its pass cap before satisfying the KKT tolerance."""

    def __init__(self, message, max_violation):
        self.max_violation = max_violation
        super().__init__(f"{message} (max KKT violation {max_violation:.3g})")


class DataIOError(EegError, OSError):
    """A file or directory could not be read or written."""
