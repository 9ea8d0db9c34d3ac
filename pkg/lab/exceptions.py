"""Error taxonomy for the lab."""

from typing import Optional


class LabError(Exception):
    """Base class for every error raised by the lab."""


class InvalidArgumentError(LabError, ValueError):
    """Argument outside its documented range or with mismatched dimensions."""


class NumericalOverflowError(LabError, ArithmeticError):
    """Non-finite value produced while evaluating an integrand or estimate."""


class ResourceLimitError(LabError):
    """Quadrature grid or sample budget exceeded."""


class UnsupportedOrderError(LabError):
    """Derivative order not available for the symbol family."""


class ConfigInvalidError(LabError):
    """Experiment configuration failed to parse or validate."""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        location = []
        if field:
            location.append(f"field={field}")
        if line is not None:
            location.append(f"line={line}")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(f"{message}{suffix}")
