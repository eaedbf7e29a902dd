"""Exception types shared across the package."""


class ContractViolationError(ValueError):
    """An operation was called with inputs violating its preconditions."""


class DegenerateStateError(ContractViolationError):
    """A state vector is unusable (zero norm or numerically degenerate)."""


class ParameterError(ValueError):
    """A configuration or model parameter is out of its valid range."""
