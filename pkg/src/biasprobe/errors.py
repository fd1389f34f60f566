"""Exception types shared across the package."""


class BiasProbeError(Exception):
    """Base class for all biasprobe errors."""


class ConfigError(BiasProbeError):
    """Invalid or degenerate configuration."""


class InputError(BiasProbeError):
    """An operation was called with inputs that violate its contract."""


class DegenerateVariableError(InputError):
    """A categorical variable has fewer than two observed levels."""


class DegenerateSeriesError(BiasProbeError):
    """A series has zero variance, so a correlation is undefined."""


class UndefinedPosteriorError(BiasProbeError):
    """Both access probabilities are zero, so the posterior does not exist."""


class TemplateError(BiasProbeError):
    """A probe template or rendered probe violates the placeholder rules."""


class UnknownAxisValueError(InputError):
    """A probe's axis value is not part of the scorer's training axis."""


class FitError(BiasProbeError):
    """A fit cannot be computed (too few points or rank-deficient design)."""


class ScorerError(BiasProbeError):
    """A scoring backend failed.

    ``retriable`` distinguishes transient failures (rate limits, 5xx,
    timeouts) from permanent ones.
    """

    def __init__(self, message: str, retriable: bool = False):
        super().__init__(message)
        self.retriable = retriable


class ProtocolError(ScorerError):
    """A remote scorer returned a response that does not match the wire format."""

    def __init__(self, message: str):
        super().__init__(message, retriable=False)
