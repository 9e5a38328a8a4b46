class ArgumentError(ValueError):
    """Invalid argument or violated precondition."""


class ResourceBudgetError(RuntimeError):
    """A sampler or enumerator ran past its configured budget."""

    def __init__(self, message, attempts=None):
        super().__init__(message)
        self.attempts = attempts


class DisconnectedError(ArgumentError):
    """Two vertices lie in different components."""


class ShapeMismatchError(ArgumentError):
    """Two trees with different ordered shapes were compared edge by edge."""
