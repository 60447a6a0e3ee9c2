"""Exception types shared across the package."""


class SupremixError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(SupremixError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateEmbeddingError(SupremixError, ValueError):
    """An embedding row has (near-)zero norm and cannot be normalized."""


class DegenerateRangeError(SupremixError, ValueError):
    """A label range collapses to a single value."""


class NumericalError(SupremixError, ArithmeticError):
    """A computation produced a non-finite intermediate value."""


class ContractViolationError(SupremixError, RuntimeError):
    """Internal state handed between operations is inconsistent."""


class ValidationError(SupremixError, ValueError):
    """A configuration file or CLI input failed validation."""


class CsvFormatError(SupremixError, ValueError):
    """A CSV file does not match the expected schema."""


class CheckpointFormatError(SupremixError, ValueError):
    """A checkpoint file has an unknown version or wrong shape."""
