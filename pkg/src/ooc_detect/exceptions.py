"""Exception hierarchy shared by every module."""


class OOCError(Exception):
    """Base class for all package errors."""


class ValidationError(OOCError, ValueError):
    """Input violates a documented precondition."""


class ParseError(OOCError, ValueError):
    """Malformed file syntax.

    ``line`` and ``column`` are 1-based, ``pos`` is a byte/char offset.
    """

    def __init__(self, message, *, line=None, column=None, pos=None, source=None):
        where = []
        if source:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if pos is not None:
            where.append(f"pos {pos}")
        text = f"{message} ({', '.join(where)})" if where else message
        super().__init__(text)
        self.line = line
        self.column = column
        self.pos = pos
        self.source = source


class MappingError(OOCError, ValueError):
    """A vendor response does not have the shape the mapping expects."""

    def __init__(self, message, path):
        super().__init__(f"{message}: {path}")
        self.path = path


class RemoteError(OOCError):
    """Transport failure or non-2xx answer from a detection endpoint."""

    def __init__(self, message, *, status=None, retryable=False):
        super().__init__(message)
        self.status = status
        self.retryable = retryable


class CompatibilityError(OOCError, ValueError):
    """File version or vocabulary identity mismatch."""


class FitError(OOCError, ValueError):
    """The one-shot model cannot be fitted with the requested rule."""


class NumericError(OOCError, ArithmeticError):
    """Non-finite values during GAN training.

    ``metrics`` holds whatever was recorded before the failure.
    """

    def __init__(self, message, *, iteration=None, metrics=None):
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration
        self.metrics = metrics
