"""Exception types shared across the simulator and the harness."""


class ArenaError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ArenaError):
    """Invalid or inconsistent experiment configuration (CLI exit code 2)."""


class UnsupportedQueryError(ArenaError):
    """A query that is not well-defined for the given compute model.

    Example: asking for a pointwise task duration under the time-varying
    power model, where only gradient counts over intervals are defined.
    """


class BudgetExceededError(ArenaError):
    """The run hit its hard event cap before the stop rule fired.

    Carries the partial metric record so callers can inspect how far the
    run got (CLI exit code 3).
    """

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


class VerificationError(ArenaError):
    """A `verify` suite check failed (CLI exit code 4)."""
