"""Exception hierarchy shared across the package."""


class OdcalError(Exception):
    """Base class for all package errors."""


class ValidationError(OdcalError):
    """Structurally invalid input (dangling references, shape mismatch, ...)."""


class ConfigurationError(OdcalError):
    """Unknown enum value or inconsistent configuration."""


class DomainError(OdcalError):
    """Value outside the mathematical domain of an operation."""


class RoutingError(OdcalError):
    """No admissible route for a requested OD pair."""


class NumericalError(OdcalError):
    """Linear algebra failure that survived the jitter ladder."""


class InsufficientDataError(ValidationError):
    """Too few training points for model fitting."""


class StateError(OdcalError):
    """Operation requested on an object in the wrong state."""


class DiagnosticError(OdcalError):
    """Sensor cannot be located for a diagnostic computation."""


class EvaluationError(OdcalError):
    """Objective oracle failed; carries the evaluated point."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point
