"""Exception hierarchy shared by all modules."""


class ShotLimitError(Exception):
    """Base class; ``reason`` is a short machine-parsable tag used by the CLI."""

    reason = "error"


class DomainError(ShotLimitError, ValueError):
    reason = "domain"


class NumericalError(ShotLimitError, ArithmeticError):
    reason = "numerical"


class BudgetError(ShotLimitError):
    reason = "budget"


class AssumptionError(ShotLimitError):
    """A response function or model violates a hypothesis of the limit theorem."""

    reason = "assumption"


class UnsupportedModelError(ShotLimitError):
    reason = "unsupported"


class ConfigError(ShotLimitError, ValueError):
    """Bad configuration; ``key`` names the offending key path, e.g. ``response.beta``."""

    reason = "config"

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")
