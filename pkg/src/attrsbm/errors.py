"""Exception hierarchy shared by the library and the command line."""


class AttrSBMError(Exception):
    """Base class for all errors raised by attrsbm."""


class ConfigError(AttrSBMError, ValueError):
    """Invalid user-supplied configuration (bad K, infeasible spec, ...)."""


class DataError(AttrSBMError, ValueError):
    """Input data that violates a schema or an alignment requirement."""


class ParseError(DataError):
    """A text input line could not be parsed."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class NumericalError(AttrSBMError, ArithmeticError):
    """A numerical routine failed (non-PD covariance, undefined statistic)."""


class NotPositiveDefiniteError(NumericalError):
    def __init__(self, min_eigenvalue):
        super().__init__(
            f"covariance is not positive definite after ridge "
            f"(smallest eigenvalue {min_eigenvalue:.6g})"
        )
        self.min_eigenvalue = min_eigenvalue
