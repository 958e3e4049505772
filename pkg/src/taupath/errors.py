"""Exception types shared across the package."""


class TaupathError(Exception):
    pass


class ModelSyntaxError(TaupathError):
    """Malformed model file or expression; carries 1-based line and column."""

    def __init__(self, msg: str, line: int = 0, col: int = 0):
        self.msg = msg
        self.line = line
        self.col = col
        where = f"line {line}, col {col}: " if line else (f"col {col}: " if col else "")
        super().__init__(where + msg)


class ModelError(TaupathError):
    """Semantically invalid network (undeclared names, duplicates, ...)."""


class EvaluationError(TaupathError, ArithmeticError):
    """A propensity or observable could not be evaluated to a valid value."""


class ConfigError(TaupathError):
    """Invalid estimator or scenario configuration."""
