"""Exception types shared across the package."""


class PrivoutError(Exception):
    """Base class for all errors raised by this package."""


class InputError(PrivoutError):
    """Malformed caller input: wrong dimensions, bad enum value, invalid range."""


class NumericError(PrivoutError):
    """A computation produced non-finite values or otherwise went numerically bad."""


class DataFormatError(PrivoutError):
    """A data file could not be parsed.  Carries the offending line when known."""

    def __init__(self, message, line_number=None):
        super().__init__(message)
        self.line_number = line_number


class DegenerateModelError(PrivoutError):
    """Sensitivity analysis rejected the model (e.g. zero Lipschitz bound)."""


class InsufficientPoolError(PrivoutError):
    """The data pool is too small for the requested shadow-model splits."""

    def __init__(self, message, required, available):
        super().__init__(message)
        self.required = required
        self.available = available


class BudgetExhaustedError(PrivoutError):
    """The privacy-budget ledger refused a query."""

    def __init__(self, queries_allowed, queries_answered):
        super().__init__(
            f"privacy budget exhausted: {queries_answered} of "
            f"{queries_allowed} allowed queries already answered"
        )
        self.queries_allowed = queries_allowed
        self.queries_answered = queries_answered
