"""Utility modules for logging and error types."""

from .logger import setup_logger, get_logger, DEBUG_MODE
from .errors import (
    TgpssmError,
    ContractViolation,
    ConfigurationError,
    ParseError,
    EmptyDatasetError,
    FlowDomainError,
    NumericError,
    DecompositionError,
    ConditioningError,
    FilterDivergenceError,
    InversionError,
    TermEvaluationError,
    TrainingAbortedError,
)

__all__ = [
    'setup_logger', 'get_logger', 'DEBUG_MODE',
    'TgpssmError', 'ContractViolation', 'ConfigurationError', 'ParseError',
    'EmptyDatasetError', 'FlowDomainError', 'NumericError', 'DecompositionError',
    'ConditioningError', 'FilterDivergenceError', 'InversionError',
    'TermEvaluationError', 'TrainingAbortedError',
]
