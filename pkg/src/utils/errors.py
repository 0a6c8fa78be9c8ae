"""Exception hierarchy shared by all modules."""

from typing import Optional


class TgpssmError(Exception):
    """Base class for errors raised by this package."""


class ContractViolation(TgpssmError, ValueError):
    """Inputs violate a documented precondition (shapes, lengths, dimensions)."""


class ConfigurationError(TgpssmError, ValueError):
    """A configuration is inconsistent or names something that does not exist."""


class ParseError(TgpssmError, ValueError):
    """A data file could not be parsed."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class EmptyDatasetError(ParseError):
    """A data file parsed correctly but holds no rows."""


class FlowDomainError(TgpssmError, ValueError):
    """A flow layer was evaluated outside its domain."""

    def __init__(self, message: str, layer_index: Optional[int] = None, kind: Optional[str] = None):
        self.layer_index = layer_index
        self.kind = kind
        if layer_index is not None:
            message = f"flow layer {layer_index} ({kind}): {message}"
        super().__init__(message)


class NumericError(TgpssmError, ArithmeticError):
    """A computation produced NaN/Inf or otherwise failed numerically."""

    def __init__(self, message: str, node: Optional[str] = None):
        self.node = node
        if node is not None:
            message = f"[{node}] {message}"
        super().__init__(message)


class DecompositionError(NumericError):
    """A Cholesky factorisation failed (matrix not positive definite)."""


class ConditioningError(DecompositionError):
    """A kernel matrix stayed non positive definite after jitter."""


class FilterDivergenceError(NumericError):
    """A Kalman-type filter lost positive definiteness of its covariance."""


class InversionError(TgpssmError, ArithmeticError):
    """Numeric inversion of a monotone map did not converge."""

    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (residual={residual:.3e})")


class TermEvaluationError(NumericError):
    """A numeric failure inside one ELBO term."""

    def __init__(self, term: str, cause: Exception):
        self.term = term
        self.cause = cause
        super().__init__(f"ELBO term '{term}' failed: {cause}", node=getattr(cause, "node", None))


class TrainingAbortedError(NumericError):
    """Training stopped on a numeric failure; the log written so far is kept."""

    def __init__(self, epoch: int, term: Optional[str], cause: Exception, log_path: Optional[str] = None):
        self.epoch = epoch
        self.term = term
        self.log_path = log_path
        self.cause = cause
        where = f"term '{term}'" if term else "objective"
        message = f"training aborted at epoch {epoch} in {where}: {cause}"
        if log_path:
            message += f" (log: {log_path})"
        super().__init__(message)
