"""Exception hierarchy shared by all fracvar modules."""


class FracVarError(Exception):
    """Base class for library errors."""


class DomainError(FracVarError, ValueError):
    """Argument outside the mathematical domain of a function."""


class GridError(FracVarError, ValueError):
    """Invalid grid or a grid too coarse for the requested scheme."""


class ShapeError(FracVarError, ValueError):
    """Samples and grids (or operators) do not line up."""


class ConstraintError(FracVarError, ValueError):
    """A fixed end-point condition is violated."""


class EvaluationError(FracVarError, ArithmeticError):
    """The Lagrangian produced a non-finite value."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class RegistryError(FracVarError, KeyError):
    """Unknown built-in problem name."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ConfigError(FracVarError, ValueError):
    """Missing or malformed configuration parameters."""


class UsageError(FracVarError, ValueError):
    """A residual or check was requested where it does not apply."""


class PreconditionError(FracVarError, ValueError):
    """Inputs violate a documented precondition of an operation."""
