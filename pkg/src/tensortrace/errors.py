"""Exception hierarchy shared by every module."""


class TensorTraceError(Exception):
    """Base class for all library errors."""


class ParseError(TensorTraceError, ValueError):
    """Malformed expression text; ``position`` is a 0-based character offset."""

    def __init__(self, message, text=None, position=None):
        self.message = message
        self.text = text
        self.position = position
        super().__init__(self._render())

    def _render(self):
        if self.text is None or self.position is None:
            return self.message
        return f"{self.message} at position {self.position}\n  {self.text}\n  {' ' * self.position}^"


class DomainError(TensorTraceError, ValueError):
    """A point or eigenvalue lies outside the function's domain, or evaluation is undefined."""


class EigenError(TensorTraceError, ArithmeticError):
    """The symmetric eigensolver failed to converge."""


class CapExceededError(TensorTraceError, ValueError):
    """A dense construction would exceed the configured size cap."""


class InfeasibleError(TensorTraceError, ValueError):
    """The constraint set is empty."""


class PreconditionError(TensorTraceError, ValueError):
    """An operation was called outside its documented preconditions."""


class FormatError(TensorTraceError, ValueError):
    """Malformed graph, matrix or config file; carries the offending line number."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
