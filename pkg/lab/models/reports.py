"""Report models emitted by every check."""

import math
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, computed_field


class ReportRow(BaseModel):
    """One measured quantity compared against its bound."""

    label: str = Field(..., description="Row label, e.g. a grid point or chain step")
    params: Dict[str, float] = Field(default_factory=dict, description="Numeric row parameters")
    measured: float = Field(..., description="Measured quantity or residual")
    stderr: float = Field(0.0, ge=0.0, description="Monte Carlo standard error (0 for exact)")
    bound: Optional[float] = Field(None, description="Bound or tolerance the measurement must respect")
    tolerance: float = Field(0.0, ge=0.0, description="Absolute slack added to the bound")
    passed: bool = Field(..., description="measured <= bound + sigma * stderr + tolerance")
    note: Optional[str] = Field(None, description="Free-form annotation")

    @classmethod
    def compare(
        cls,
        label: str,
        measured: float,
        bound: Optional[float],
        stderr: float = 0.0,
        tolerance: float = 0.0,
        sigma: float = 3.0,
        params: Optional[Dict[str, float]] = None,
        note: Optional[str] = None,
    ) -> "ReportRow":
        """Build a row whose pass flag is measured <= bound + sigma*stderr + tolerance."""
        measured = float(measured)
        stderr = float(stderr) if math.isfinite(stderr) else float("inf")
        if math.isnan(measured):
            passed = False
        elif bound is None:
            passed = True
        else:
            passed = measured <= float(bound) + sigma * stderr + tolerance
        return cls(
            label=label,
            params=dict(params or {}),
            measured=measured,
            stderr=stderr,
            bound=None if bound is None else float(bound),
            tolerance=tolerance,
            passed=bool(passed),
            note=note,
        )


class ExperimentReport(BaseModel):
    """Per-check record of measurements, bounds, tolerances and seeds."""

    check_id: str = Field(..., description="Check identifier")
    operation: str = Field(..., description="Operation that produced the report")
    experiment_id: str = Field("", description="Owning experiment")
    rows: List[ReportRow] = Field(default_factory=list, description="Measured rows")
    metadata: Dict[str, Any] = Field(default_factory=dict, description="Seeds, sample counts, grids")
    error: Optional[str] = Field(None, description="Error text when the check aborted")

    @computed_field  # type: ignore[misc]
    @property
    def passed(self) -> bool:
        return self.error is None and all(row.passed for row in self.rows)

    @property
    def worst(self) -> Optional[ReportRow]:
        """Row with the largest measured/bound ratio."""
        scored = [r for r in self.rows if r.bound is not None]
        if not scored:
            return None

        def ratio(row: ReportRow) -> float:
            if row.bound and row.bound > 0:
                return row.measured / row.bound
            return float("inf") if row.measured > 0 else 0.0

        return max(scored, key=ratio)


class ConvergenceReport(ExperimentReport):
    """Chain-indexed report: one row per subspace in the chain."""

    @property
    def lhs(self) -> List[float]:
        return [row.measured for row in self.rows]

    @property
    def rhs(self) -> List[Optional[float]]:
        return [row.bound for row in self.rows]
