"""Exception hierarchy shared across the package."""


class TrstlError(Exception):
    """Base class for all errors raised by this package."""


class FormulaSyntaxError(TrstlError, SyntaxError):
    """Formula text does not match the grammar.

    Carries the character ``position`` and the tokens that would have been
    accepted there.
    """

    def __init__(self, message, position=None, expected=()):
        self.position = position
        self.expected = tuple(expected)
        detail = message
        if position is not None:
            detail = f"{message} at position {position}"
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(detail)


class NnfViolation(FormulaSyntaxError):
    """Negation applied to something other than an atom."""


class NegativeInterval(TrstlError, ValueError):
    """Interval with a < 0 or b < a."""


class DegenerateRegion(TrstlError, ValueError):
    """Region whose convex hull has zero area."""


class OutOfHorizon(TrstlError, ValueError):
    """Time query outside the trajectory's time span."""


class UnboundAtom(TrstlError, KeyError):
    """Formula refers to a region name that was not supplied."""


class UnresolvedInterval(TrstlError, ValueError):
    """Temporal operator still carries the implicit full-horizon interval."""


class BigMTooSmall(TrstlError, ValueError):
    """Bound analysis shows an expression can exceed the big-M constant."""


class InfeasibleEndpoints(TrstlError, ValueError):
    """Start and goal cannot be connected within the horizon at bounded speed."""


class ModelError(TrstlError, ValueError):
    """Malformed MILP model (unregistered variable, bad bounds, ...)."""


class ModelUnbounded(TrstlError, RuntimeError):
    """LP relaxation is unbounded; never expected for encoder output."""


class NumericalInstability(TrstlError, ArithmeticError):
    """Simplex pivot too small to trust."""


class UnknownVariableName(TrstlError, KeyError):
    """Solution file names a variable the model does not have."""


class MalformedLine(TrstlError, ValueError):
    """Unparseable line in a solution file."""

    def __init__(self, lineno, line):
        self.lineno = lineno
        self.line = line
        super().__init__(f"line {lineno}: cannot parse {line!r}")


class MissionError(TrstlError, ValueError):
    """Mission or trajectory file fails validation."""
