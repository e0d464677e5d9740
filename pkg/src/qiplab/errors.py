"""Exception hierarchy shared across the package."""


class QiplabError(Exception):
    """Base class for all package errors."""


class DimensionError(QiplabError):
    """Matrix dimensions exceed the configured cap or do not match."""


class ArgumentError(QiplabError):
    """An argument violates a documented precondition."""


class ValidationError(QiplabError):
    """A structural invariant (unitarity, Hermiticity, ...) fails."""


class ScopeError(QiplabError):
    """The operation is defined, but not for this kind of input."""


class CompatibilityError(QiplabError):
    """Two objects (verifier/prover, instance/circuit) do not fit together."""


class SizeError(QiplabError):
    """A register count, strategy space, or enumeration exceeds its cap."""


class ParameterError(QiplabError):
    """No admissible parameter value exists in the required range."""


class ConvergenceError(QiplabError):
    """An iterative method hit its iteration cap without converging."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class InfeasibleError(QiplabError):
    """An optimization problem was declared infeasible."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate
