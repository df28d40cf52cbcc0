"""Error types with spans and field paths."""

from dataclasses import dataclass
from typing import Optional, Sequence


@dataclass(frozen=True)
class Span:
    """Location of a value inside an experiment file."""
    offset: int
    line: int
    column: int

    @staticmethod
    def start() -> 'Span':
        return Span(offset=0, line=1, column=1)

    def __str__(self) -> str:
        return f"line {self.line}, column {self.column}"


class DopcbfError(Exception):
    """Base class for every error raised by the package."""


class ContractViolation(DopcbfError, ValueError):
    """A precondition of an operation does not hold (usually dimensions)."""


class ConfigurationError(DopcbfError):
    """A parameter or configuration field breaks an invariant.

    `path` is the dotted field path (`acc.M`); loaders prefix it with the
    section they are reading so the message names the full path.
    """

    def __init__(self, path: str, message: str, span: Optional[Span] = None):
        self.path = path
        self.message = message
        self.span = span
        where = f" ({span})" if span is not None else ""
        super().__init__(f"{path}: {message}{where}" if path else f"{message}{where}")

    def prefixed(self, prefix: str) -> 'ConfigurationError':
        path = f"{prefix}.{self.path}" if self.path else prefix
        return ConfigurationError(path, self.message, self.span)

    def at(self, span: Optional[Span]) -> 'ConfigurationError':
        if span is None or self.span is not None:
            return self
        return ConfigurationError(self.path, self.message, span)


class IntegrationError(DopcbfError):
    """The integrator met a non-finite derivative or state."""

    def __init__(self, t: float, x: Sequence[float], msg: str = "non-finite derivative"):
        self.t = t
        self.x = list(x)
        super().__init__(f"{msg} at t={t:.6g}, x={self.x}")


class ControlFailure(DopcbfError):
    """A controller tick could not produce an admissible control."""


class QpError(ControlFailure):
    """Base class for QP solver failures."""


class Infeasible(QpError):
    """No point satisfies G z <= e."""

    def __init__(self, msg: str = "QP constraints are infeasible"):
        super().__init__(msg)


class IllConditioned(QpError):
    """Every candidate KKT system failed to solve."""

    def __init__(self, msg: str = "no candidate KKT system could be solved"):
        super().__init__(msg)


class DegenerateGrade(ControlFailure):
    """The estimated grade is as steep as the tire adhesion allows."""

    def __init__(self, theta_hat: float, margin: float):
        self.theta_hat = theta_hat
        self.margin = margin
        super().__init__(
            f"mu + sin(theta_hat) = {margin:.4g} below guard at theta_hat={theta_hat:.4g} rad"
        )


class InsufficientSamples(DopcbfError):
    """A metric needs more samples than the series provides."""

    def __init__(self, needed: int, found: int):
        self.needed = needed
        self.found = found
        super().__init__(f"need at least {needed} samples after skip, found {found}")


class ErrorKind(Exception):
    """Base class for notation lexer/parser errors."""
    pass


class Eof(ErrorKind):
    """Unexpected end of input."""
    def __init__(self):
        super().__init__("unexpected end of input")


class InvalidToken(ErrorKind):
    """Invalid token."""
    def __init__(self, msg: str):
        super().__init__(f"invalid token: {msg}")


class Expected(ErrorKind):
    """Expected something, found something else."""
    def __init__(self, expected: str, found: str):
        super().__init__(f"expected {expected}, found {found}")
        self.expected = expected
        self.found = found


class InvalidEscape(ErrorKind):
    """Invalid escape sequence."""
    def __init__(self):
        super().__init__("invalid escape sequence")


class InvalidNumber(ErrorKind):
    """Invalid number literal."""
    def __init__(self):
        super().__init__("invalid number literal")


class DuplicateKey(ErrorKind):
    """The same key appears twice in one object."""
    def __init__(self, key: str):
        super().__init__(f"duplicate key '{key}'")
        self.key = key


class Message(ErrorKind):
    """Generic error message."""
    def __init__(self, msg: str):
        super().__init__(msg)


class NotationError(DopcbfError):
    """A lexer/parser error with its position in the experiment file."""

    def __init__(self, kind: ErrorKind, span: Span, context: Optional[str] = None):
        self.kind = kind
        self.span = span
        self.context = context
        tail = f" ({context})" if context else ""
        super().__init__(f"{kind} at {span}{tail}")

    @staticmethod
    def new(kind: ErrorKind, span: Span) -> 'NotationError':
        return NotationError(kind, span)

    @staticmethod
    def with_ctx(kind: ErrorKind, span: Span, ctx: str) -> 'NotationError':
        return NotationError(kind, span, ctx)
