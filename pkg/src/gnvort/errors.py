"""Exception types shared across the solver."""


class GnvortError(Exception):
    """Base class for all solver errors."""


class PositivityError(GnvortError):
    """Water depth fell at or below the dry-state guard."""


class GridMismatch(GnvortError):
    """A field does not live on the expected grid."""


class NonConvergence(GnvortError):
    """Iterative dispersive solve exhausted its budget."""


class MeanNotZero(GnvortError):
    """A shear profile that must have zero vertical mean does not."""


class NonMonotoneTime(GnvortError):
    """Conservation trace received a sample out of time order."""


class ParseError(GnvortError):
    """Syntax error in a scenario config file."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


class ValidationError(GnvortError):
    """A parsed config value violates a constraint."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


class DegenerateStudy(GnvortError):
    """Convergence study asked for with an unusable resolution list."""
