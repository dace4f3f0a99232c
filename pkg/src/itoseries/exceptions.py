"""Exception hierarchy shared by the library and the CLI."""


class ItoSeriesError(Exception):
    """Base class for all errors raised by itoseries."""


class ConfigurationError(ItoSeriesError, ValueError):
    """Invalid pattern, degree, order, or missing coefficient callable."""


class InfeasibleTruncationError(ItoSeriesError):
    """No truncation level within the search cap meets the error budget."""

    def __init__(self, pattern, q_cap, message=None):
        self.pattern = pattern
        self.q_cap = q_cap
        super().__init__(
            message
            or f"pattern ({pattern}): error budget not met for any q <= {q_cap}"
        )


class TableFormatError(ItoSeriesError, ValueError):
    """Malformed coefficient table file."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class TableCompatibilityError(ItoSeriesError):
    """Table file has an unsupported version or an unexpected pattern."""


class DivergenceError(ItoSeriesError, FloatingPointError):
    """A numerical path produced a non-finite state."""

    def __init__(self, step):
        self.step = step
        super().__init__(f"non-finite state encountered at step {step}")
