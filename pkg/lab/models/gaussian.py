"""Gaussian measure data models."""

from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class GaussianMeasureSpec(BaseModel):
    """Centered Gaussian measure mu_{R^n, h} with covariance h * I."""

    model_config = ConfigDict(frozen=True)

    dim: int = Field(..., ge=1, description="Dimension n")
    variance: float = Field(..., gt=0.0, description="Variance parameter h")


class Pairing(BaseModel):
    """Pair partition of {1..2p} in canonical order."""

    model_config = ConfigDict(frozen=True)

    pairs: List[Tuple[int, int]] = Field(..., min_length=1, description="Pairs (i, j) with i < j")

    @model_validator(mode="after")
    def _check_partition(self) -> "Pairing":
        size = 2 * len(self.pairs)
        indices = sorted(i for pair in self.pairs for i in pair)
        if indices != list(range(1, size + 1)):
            raise ValueError(f"pairs do not partition 1..{size}")
        firsts = [i for i, _ in self.pairs]
        if any(i >= j for i, j in self.pairs):
            raise ValueError("each pair must satisfy i < j")
        if any(a >= b for a, b in zip(firsts, firsts[1:])):
            raise ValueError("pair first elements must be strictly increasing")
        return self

    @property
    def order(self) -> int:
        """Number of pairs p."""
        return len(self.pairs)


class SampleBatch(BaseModel):
    """Seeded i.i.d. draws from a GaussianMeasureSpec."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    spec: GaussianMeasureSpec
    seed: int = Field(..., description="Root seed of the stream")
    stream: int = Field(0, ge=0, description="Stream identifier under the root seed")
    count: int = Field(..., ge=1, description="Number of draws")
    samples: np.ndarray = Field(..., description="count x dim array of draws")

    @field_validator("samples", mode="before")
    @classmethod
    def _readonly(cls, value):
        arr = np.array(value, dtype=float, copy=True)
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _check_shape(self) -> "SampleBatch":
        if self.samples.shape != (self.count, self.spec.dim):
            raise ValueError(
                f"samples shape {self.samples.shape} does not match ({self.count}, {self.spec.dim})"
            )
        return self
