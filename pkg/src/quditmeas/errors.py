"""Exception types raised by quditmeas."""


class InvalidDimensionError(ValueError):
    """Raised for a Hilbert-space dimension that is too small or mismatched."""


class SchemeError(ValueError):
    """Raised when an operation is called with the wrong amplification scheme."""


class UnsupportedMethodError(ValueError):
    """Raised when an integration path cannot handle the requested configuration."""


class SingularDetuningError(ZeroDivisionError):
    """Raised when a qudit transition is resonant with the cavity."""

    def __init__(self, level):
        self.level = level
        super().__init__(f"detuning of transition {level}<->{level + 1} is zero")


class StepperDivergenceError(RuntimeError):
    """Raised when a stepped state leaves the state space beyond tolerance."""

    def __init__(self, message, step=None):
        self.step = step
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)


class ConfigError(ValueError):
    """Raised for malformed or invalid experiment configuration files."""

    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
