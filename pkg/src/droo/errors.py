class DomainError(ValueError):
    """An argument lies outside the domain of the requested quantity."""


class ConvergenceError(RuntimeError):
    """An iterative solve exhausted its iteration budget."""
