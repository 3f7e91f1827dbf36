"""Exception types shared across the toolkit."""


class InvalidParameterError(ValueError):
    """A numeric parameter is outside its valid range."""


class ValidationError(ValueError):
    """An input value or structure fails a domain constraint."""


class DegenerateCohortError(ValueError):
    """A hypothesis statistic is undefined (e.g. mean of an empty cohort)."""


class EmptySketchError(ValueError):
    """A quantile query was issued against a sketch with no data."""


class UndefinedCorrelationError(ValueError):
    """Rank correlation is undefined because one side has zero rank variance."""


class NumericalDegeneracyError(ValueError):
    """All candidate likelihoods vanished; the posterior is undefined."""


class GlobalFallbackError(ValueError):
    """No cohort anywhere satisfies the minimum-size requirement."""


class ConfigError(ValueError):
    """An experiment configuration file is malformed or inconsistent."""
