"""Exception types shared across the toolkit."""


class RegimeVarError(Exception):
    """Base class for analysis failures the CLI maps to exit code 1."""


class DataError(RegimeVarError):
    """Invalid or unusable input data (parse failures, violated preconditions)."""


class EstimationError(RegimeVarError):
    """Numerical failure while estimating or testing (singularity, underflow)."""


class DivergenceWarning(UserWarning):
    """Unstable dynamics: the result is reported but will grow without bound."""
