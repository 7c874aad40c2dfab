"""Exception types shared across the package."""


class TwoSpeciesError(Exception):
    """Base class for all package errors."""


class InvalidMeasureError(TwoSpeciesError, ValueError):
    """A density profile does not describe a probability measure."""


class ConeViolationError(TwoSpeciesError, ValueError):
    """Values are not non-decreasing (or not finite)."""


class DimensionError(TwoSpeciesError, ValueError):
    """Two objects that must share a grid size do not."""


class DomainError(TwoSpeciesError, ValueError):
    """A parameter lies outside the range where an operation is defined."""


class CFLError(TwoSpeciesError, ValueError):
    """Explicit time step violates the stability bound."""


class ConfigError(TwoSpeciesError, ValueError):
    """Invalid or malformed scenario configuration."""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = []
        if key is not None:
            where.append(f"key={key!r}")
        if line is not None:
            where.append(f"line={line}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"{message}{suffix}")


class ConvergenceError(TwoSpeciesError, RuntimeError):
    """An inner solver stopped before reaching its tolerance."""

    def __init__(self, message, residual, iterations):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
