"""Heat operator method and result models."""

from enum import Enum
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator


class HeatMethodKind(str, Enum):
    """How a Gaussian convolution is evaluated."""
    QUADRATURE = "quadrature"
    MONTE_CARLO = "monte-carlo"


class HeatMethod(BaseModel):
    """Evaluation method for H_t."""

    model_config = ConfigDict(frozen=True)

    kind: HeatMethodKind = Field(HeatMethodKind.QUADRATURE, description="Quadrature or Monte Carlo")
    quadrature_order: int = Field(40, ge=1, le=512, description="Gauss-Hermite nodes per profile dimension")
    mc_samples: int = Field(100_000, ge=1, description="Monte Carlo sample count")
    seed: int = Field(0, description="Monte Carlo seed")
    stream: int = Field(0, ge=0, description="Monte Carlo stream identifier")

    @property
    def is_quadrature(self) -> bool:
        return self.kind == HeatMethodKind.QUADRATURE


class HeatResult(BaseModel):
    """Value of a heat-operator evaluation with its error estimate."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    value: Any = Field(..., description="Real or complex scalar")
    error_estimate: float = Field(..., ge=0.0, description="Quadrature tail or MC standard error")
    method: HeatMethod = Field(..., description="Method echo")

    @field_validator("value", mode="before")
    @classmethod
    def _scalar(cls, value):
        value = complex(value)
        return value.real if value.imag == 0.0 else value

    @property
    def magnitude(self) -> float:
        return float(abs(self.value))
