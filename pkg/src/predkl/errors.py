"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Raised when vector lengths disagree with the model dimension."""


class QuadratureError(RuntimeError):
    """Adaptive radial quadrature did not reach its tolerance.

    Carries the best estimate reached and an error bound so callers can
    decide whether the partial answer is usable.
    """

    def __init__(self, message, partial=None, bound=None):
        super().__init__(message)
        self.partial = partial
        self.bound = bound


class ConfigError(ValueError):
    """Malformed experiment configuration (carries line/field diagnostics)."""

    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field
