"""Virtual-clock simulator and theory calculators for asynchronous SGD
scheduling under heterogeneous worker speeds, plus an adaptive task
allocation (bandit) stack."""

from .errors import (ArenaError, BudgetExceededError, ConfigError,
                     UnsupportedQueryError, VerificationError)

__all__ = ["ArenaError", "BudgetExceededError", "ConfigError",
           "UnsupportedQueryError", "VerificationError"]

__version__ = "0.1.0"
