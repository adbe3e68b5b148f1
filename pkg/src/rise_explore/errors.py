"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class UnsupportedError(ValueError):
    """Input is well-formed but outside what the routine handles."""


class ContractViolation(RuntimeError):
    """API used out of order (e.g. stepping a finished episode)."""


class DivergenceError(ArithmeticError):
    """A quantity that would be infinite was requested."""
