"""Exception types shared across the simulator."""


class FluxTemError(Exception):
    """Base class for all simulator-specific errors."""


class InvalidStateError(FluxTemError, ValueError):
    """A quantum state failed a normalization or structure check."""


class BoundaryEventError(FluxTemError, RuntimeError):
    """An electron landed on a detector pixel with unequal branch moduli."""

    def __init__(self, pixel: int, message: str | None = None):
        self.pixel = int(pixel)
        super().__init__(message or f"boundary pixel {self.pixel} drawn")


class PlaneMismatchError(FluxTemError, ValueError):
    """An optics operation was applied at the wrong kind of plane."""


class EmptyFieldError(FluxTemError, ValueError):
    """A wave field carries no power, so propagation is meaningless."""


class GeometryError(FluxTemError, ValueError):
    """Mask or ring geometry does not fit the simulation grid."""


class DivergentDoseError(FluxTemError, ValueError):
    """Electron-count formulas diverge (zero phase difference)."""


class AmbiguityError(FluxTemError, ValueError):
    """Accumulated phase leaves the invertible branch of the estimator."""


class BudgetError(FluxTemError, ValueError):
    """Electron budget is too small for the requested experiment."""


class ConfigError(FluxTemError, ValueError):
    """Bad configuration file, key, or value."""

    def __init__(self, message: str, *, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        prefix = ""
        if line is not None:
            prefix = f"line {line}: "
        super().__init__(prefix + message)
