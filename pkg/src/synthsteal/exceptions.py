"""Exception hierarchy shared across the package."""


class SynthStealError(Exception):
    """Base class for every error raised by this package."""


class InputError(SynthStealError, ValueError):
    """Invalid argument value or empty input."""


class ShapeError(InputError):
    """Array dimensions do not agree."""


class NumericError(SynthStealError, FloatingPointError):
    """NaN or Inf encountered where finite values are required."""


class ConfigError(SynthStealError, ValueError):
    """Invalid or inconsistent configuration."""


class ParseError(SynthStealError, ValueError):
    """Malformed file contents. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CapabilityError(SynthStealError):
    """The target does not expose the requested output (e.g. label-only mode)."""


class TransportError(SynthStealError):
    """A remote endpoint failed or returned a non-2xx status."""

    def __init__(self, message, retries=0, status=None):
        super().__init__(f"{message} (after {retries} retries)")
        self.retries = retries
        self.status = status


class ClassStarvationError(SynthStealError):
    """No generated sample of a class survived validation against the target."""

    def __init__(self, class_id, attempts):
        super().__init__(
            f"class {class_id}: 0 of {attempts} generated samples were "
            "classified as that class by the target"
        )
        self.class_id = class_id
        self.attempts = attempts
