"""Exception types shared across the package.

Parsing problems carry a character offset into the source text; numerical
problems carry enough context to identify the failing state or option.
"""


class FilippovError(Exception):
    """Base class for all package-specific errors."""


# ---------------------------------------------------------------- expressions


class ExpressionError(FilippovError, ValueError):
    """Base class for expression parsing and evaluation errors."""


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class UnknownSymbolError(ExpressionError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown symbol '{name}' (offset {offset})")
        self.name = name
        self.offset = offset


class VariableIndexError(ExpressionError):
    def __init__(self, name: str, dimension: int, offset: int):
        super().__init__(
            f"variable '{name}' out of range for dimension {dimension} (offset {offset})"
        )
        self.name = name
        self.offset = offset


class DomainError(ExpressionError):
    """Evaluation hit a value outside a function's domain.

    The message names the failing subexpression so a bad field definition
    can be traced back to its source text.
    """

    def __init__(self, reason: str, subexpression: str):
        super().__init__(f"{reason} in '{subexpression}'")
        self.subexpression = subexpression


# -------------------------------------------------------------------- systems


class DimensionError(FilippovError, ValueError):
    """State or field dimension does not match the system."""


class NotOnSurfaceError(FilippovError, ValueError):
    """Point handed to a boundary-only operation is off the surface."""


class TwoFoldError(FilippovError, ValueError):
    """Both pieces are tangent to the surface; sliding data is undefined."""


class CrossingError(FilippovError, ValueError):
    """Point lies in the crossing region where no sliding motion exists."""


class DegenerateError(FilippovError, ValueError):
    """First component of the constant piece vanishes; reduction formulas divide by it."""


# ----------------------------------------------------------------- integrator


class ConvergenceFailure(FilippovError, RuntimeError):
    """Step control or event localization failed to converge."""


class MaxEventsExceeded(FilippovError, RuntimeError):
    """Event budget exhausted before a terminal event occurred."""


class NonUniqueEvolutionError(FilippovError, RuntimeError):
    """Strict mode: forward evolution is not unique at the reached point."""


class ScalingHypothesisError(FilippovError, ValueError):
    """Time-scaling verification requires the right piece to enter the surface."""


# ------------------------------------------------------------------ reduction


class NotBoundaryEquilibrium(FilippovError, ValueError):
    """Left piece does not vanish at the origin."""


class InvalidDelta(FilippovError, ValueError):
    """Perturbation radius would allow the constant's first component to change sign."""


# --------------------------------------------------------------------- sphere


class ZeroStateError(FilippovError, ValueError):
    """Cannot project the zero state to the unit sphere."""


class NoReturnError(FilippovError, RuntimeError):
    """Orbit left the section without coming back to it."""
