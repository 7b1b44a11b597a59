"""Exception types shared across the package."""

from __future__ import annotations


class TracecheckError(Exception):
    """Base class for every error raised by this package."""


class PathError(TracecheckError):
    """An update path does not resolve inside the target value."""


class OpTypeError(TracecheckError):
    """An update operator was applied to a value of the wrong shape."""


class BagUnderflow(TracecheckError):
    """RemoveFromBag would drive an element count below zero."""


class UnknownOp(TracecheckError):
    """An update names an operator this package does not define."""


class ParseError(TracecheckError):
    """Malformed JSON or an unsupported JSON construct.

    ``line`` is 1-based when the error comes from an NDJSON file, else 0.
    """

    def __init__(self, message: str, line: int = 0):
        super().__init__(message)
        self.line = line


class SchemaError(TracecheckError):
    """A JSON object is well-formed but violates the trace entry schema."""

    def __init__(self, message: str, line: int = 0, field: str = ""):
        super().__init__(message)
        self.line = line
        self.field = field


class MissingClock(TracecheckError):
    """log() was called without a clock value on an explicit-clock tracer."""


class GuardFailed(TracecheckError):
    """An action was stepped in a state where its guard is false."""

    def __init__(self, action: str, description: str):
        super().__init__(f"{action}: guard failed: {description}")
        self.action = action
        self.description = description


class UnknownInvariant(TracecheckError):
    """check_invariant was asked for an invariant name the spec lacks."""


class UnknownEvent(TracecheckError):
    """A trace event names neither an action nor a composition entry."""

    def __init__(self, event: str):
        super().__init__(
            f"event {event!r} names no action and no composed action"
        )
        self.event = event


class SimDeadlock(TracecheckError):
    """A simulated run stopped making progress before completing."""
