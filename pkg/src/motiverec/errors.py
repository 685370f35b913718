"""Exception hierarchy shared by every pipeline stage."""


class MotiveRecError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(MotiveRecError, ValueError):
    """One or more configuration fields are out of bounds.

    ``violations`` lists ``(field, message)`` pairs, one per violated bound.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = [f"{name}: {msg}" for name, msg in self.violations]
        super().__init__("invalid config:\n  " + "\n  ".join(lines))

    @property
    def fields(self):
        return [name for name, _ in self.violations]


class DatasetError(MotiveRecError):
    pass


class EmptyDatasetError(DatasetError):
    """Filtering removed every interaction."""


class DimensionMismatchError(MotiveRecError, ValueError):
    pass


class UnknownNamespaceError(MotiveRecError, KeyError):
    pass


class GatewayError(MotiveRecError):
    """A backend call failed after all retries."""


class TransportError(GatewayError):
    """Retryable transport-level failure."""


class RateLimitError(TransportError):
    pass


class ParseFailure(GatewayError):
    """The backend answered, but never in the expected wire format."""

    def __init__(self, message, raw_text=""):
        super().__init__(message)
        self.raw_text = raw_text


class NoSignalError(MotiveRecError):
    """A user has neither motives nor an explicit query."""


class PlanError(MotiveRecError):
    """Every query of a search plan failed to embed."""


class MissingArtifactError(MotiveRecError):
    """A CLI stage ran before the stage that produces its input."""

    def __init__(self, stage, path):
        self.stage = stage
        self.path = path
        super().__init__(f"missing artifact {path}; run the `{stage}` stage first")
