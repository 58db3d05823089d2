"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration: unknown objective, short LD table, bad fleet spec."""


class NumericalFailure(RuntimeError):
    """A matrix factorization failed even after jitter escalation.

    Carries the final jitter value that was tried in ``jitter``.
    """

    def __init__(self, message, jitter=None):
        super().__init__(message)
        self.jitter = jitter


class ProtocolViolation(RuntimeError):
    """Two broadcast records share an identity key but disagree on payload.

    Carries the offending ``(node_id, seq)`` key in ``key``.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class UnsupportedMetric(RuntimeError):
    """The requested metric is undefined for this objective (no known minimum)."""
