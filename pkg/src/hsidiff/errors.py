"""Exception types shared across the package."""


class CubeLoadError(ValueError):
    """Raised when a cube file cannot be parsed or fails validation."""


class ConfigError(ValueError):
    """Raised for malformed configs or config/checkpoint mismatches (CLI exit 2)."""


class NumericalAbort(RuntimeError):
    """Raised when training hits a non-finite loss (CLI exit 3)."""

    def __init__(self, step: int, message: str = "non-finite loss"):
        self.step = step
        super().__init__(f"{message} at step {step}")
