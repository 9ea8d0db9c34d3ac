"""Experiment configuration and run manifest models."""

import hashlib
import json
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, ValidationError, computed_field, field_validator, model_validator

from config.settings import settings
from lab.exceptions import ConfigInvalidError


class Operation(str, Enum):
    """Check groups selectable from the CLI or a config."""
    CONSTANTS = "constants"
    WICK = "wick"
    MOMENTS = "moments"
    TRANSLATION = "translation"
    HOLDER = "holder"
    SYMBOLS = "symbols"
    EXTEND = "extend"
    HEAT = "heat"
    EXPAND = "expand"
    VERIFY_ALL = "verify-all"


class DirectionKind(str, Enum):
    """How a direction vector is specified."""
    EXPLICIT = "explicit"
    BASIS = "basis"
    GEOMETRIC = "geometric"
    RANDOM = "random"


class OperatorKind(str, Enum):
    """How a trace-class operator is specified."""
    RANK_ONE = "rank_one"
    DIAGONAL = "diagonal"
    GEOMETRIC = "geometric"
    ZERO = "zero"


class SymbolFamily(str, Enum):
    """Stock symbol families."""
    CONSTANT = "constant"
    LINEAR = "linear"
    TRIG = "trig"
    EXP_I = "exp_i"
    GAUSSIAN_BELL = "gaussian_bell"
    POLY_SCALAR = "poly_scalar"
    PRODUCT = "product"
    COMBINATION = "combination"


class EpsilonDecay(str, Enum):
    """Default weight sequences attached to the frame."""
    GEOMETRIC = "geometric"
    INVERSE_SQUARE = "inverse_square"


class ChainKind(str, Enum):
    """Subspace chain layouts."""
    COORDINATE = "coordinate"
    ROTATED = "rotated"


class DirectionSpec(BaseModel):
    """A vector of the truncated Hilbert space."""

    kind: DirectionKind = Field(DirectionKind.EXPLICIT, description="Specification kind")
    coords: Optional[List[float]] = Field(None, description="Explicit coordinates (explicit kind)")
    index: int = Field(0, ge=0, description="Frame index (basis kind)")
    ratio: float = Field(0.5, gt=0.0, description="Geometric ratio (geometric kind)")
    scale: float = Field(1.0, description="Overall scale")
    seed: int = Field(0, ge=0, description="Seed of the random kind")

    @model_validator(mode="after")
    def _check_kind(self) -> "DirectionSpec":
        if self.kind == DirectionKind.EXPLICIT and not self.coords:
            raise ValueError("explicit directions need coords")
        return self


class OperatorSpec(BaseModel):
    """A trace-class operator."""

    kind: OperatorKind = Field(..., description="Specification kind")
    direction: Optional[DirectionSpec] = Field(None, description="Vector a of a rank-one operator a a^T")
    values: Optional[List[float]] = Field(None, description="Diagonal entries (diagonal kind)")
    ratio: float = Field(0.5, gt=0.0, lt=1.0, description="Eigenvalue ratio (geometric kind)")
    scale: float = Field(1.0, ge=0.0, description="Largest eigenvalue (geometric kind)")
    rank: Optional[int] = Field(None, ge=0, description="Truncation rank (geometric kind)")

    @model_validator(mode="after")
    def _check_kind(self) -> "OperatorSpec":
        if self.kind == OperatorKind.RANK_ONE and self.direction is None:
            raise ValueError("rank_one operators need a direction")
        if self.kind == OperatorKind.DIAGONAL and not self.values:
            raise ValueError("diagonal operators need values")
        return self


class SymbolSpec(BaseModel):
    """Symbol referenced by family and parameter block."""

    id: str = Field(..., min_length=1, description="Symbol identifier used in reports")
    family: SymbolFamily = Field(..., description="Stock family")
    value: float = Field(1.0, description="Constant value (constant family)")
    amplitude: float = Field(1.0, description="Amplitude (trig family)")
    phase: float = Field(0.0, description="Phase theta (trig family)")
    depth: int = Field(2, ge=0, le=8, description="Depth m of the S_m claim")
    directions: List[DirectionSpec] = Field(default_factory=list, description="Direction vectors")
    exponents: List[int] = Field(default_factory=list, description="Exponents (poly_scalar family)")
    operator: Optional[OperatorSpec] = Field(None, description="Operator C (gaussian_bell family)")
    factors: List["SymbolSpec"] = Field(default_factory=list, description="Operands (product/combination)")
    coefficients: List[float] = Field(default_factory=list, description="Coefficients (combination family)")

    @model_validator(mode="after")
    def _check_family(self) -> "SymbolSpec":
        family = self.family
        if family in (SymbolFamily.LINEAR, SymbolFamily.TRIG, SymbolFamily.EXP_I) and len(self.directions) != 1:
            raise ValueError(f"{family.value} symbols need exactly one direction")
        if family == SymbolFamily.POLY_SCALAR:
            if not self.directions or len(self.directions) != len(self.exponents):
                raise ValueError("poly_scalar symbols need one exponent per direction")
            if any(e < 1 for e in self.exponents):
                raise ValueError("poly_scalar exponents must be positive")
        if family == SymbolFamily.GAUSSIAN_BELL and self.operator is None:
            raise ValueError("gaussian_bell symbols need an operator")
        if family == SymbolFamily.PRODUCT and len(self.factors) != 2:
            raise ValueError("product symbols need exactly two factors")
        if family == SymbolFamily.COMBINATION and (
            not self.factors or len(self.factors) != len(self.coefficients)
        ):
            raise ValueError("combination symbols need one coefficient per factor")
        return self


SymbolSpec.model_rebuild()


class ChainSpec(BaseModel):
    """Subspace chain E_1 in ... in E_K."""

    kind: ChainKind = Field(ChainKind.COORDINATE, description="Coordinate or rotated chain")
    sizes: List[int] = Field(default_factory=lambda: [1, 2, 4, 8, 12, 16, 24, 32], description="dim E_n")
    seed: int = Field(0, ge=0, description="Seed of the rotation (rotated kind)")

    @field_validator("sizes")
    @classmethod
    def _check_sizes(cls, sizes: List[int]) -> List[int]:
        if not sizes:
            raise ValueError("chain must have at least one step")
        if any(b < a for a, b in zip(sizes, sizes[1:])) or sizes[0] < 0:
            raise ValueError("chain sizes must be nonnegative and nondecreasing")
        return sizes


class MethodSpec(BaseModel):
    """Numerical method block."""

    quadrature_order: int = Field(40, ge=1, le=512, description="Gauss-Hermite nodes per dimension")
    mc_samples: int = Field(100_000, ge=2, description="Monte Carlo samples per estimate")


def _walk_directions(spec: SymbolSpec):
    yield from spec.directions
    if spec.operator is not None and spec.operator.direction is not None:
        yield spec.operator.direction
    for factor in spec.factors:
        yield from _walk_directions(factor)


class ExperimentConfig(BaseModel):
    """One experiment: an operation selector plus everything its checks need."""

    experiment_id: str = Field(..., min_length=1, description="Experiment identifier, used in file names")
    operation: Operation = Field(..., description="Check group to run")
    seed: int = Field(..., ge=0, description="Master seed")
    dim: int = Field(default_factory=lambda: settings.ambient_dim, ge=1, description="Ambient truncation dimension D")
    eps_decay: EpsilonDecay = Field(EpsilonDecay.GEOMETRIC, description="Frame weight sequence")
    eps_ratio: float = Field(default_factory=lambda: settings.eps_ratio, gt=0.0, lt=1.0, description="Ratio of the geometric weights")
    lambda_ratio: float = Field(default_factory=lambda: settings.lambda_ratio, gt=0.0, lt=1.0, description="Ratio of the geometric operator")
    symbols: List[SymbolSpec] = Field(default_factory=list, description="Symbols under test")
    chain: ChainSpec = Field(default_factory=ChainSpec, description="Subspace chain")
    t_grid: List[float] = Field(default_factory=lambda: list(settings.t_grid), description="Heat times t")
    s_grid: List[float] = Field(default_factory=lambda: [0.1, 0.5], description="Heat times s")
    p_grid: List[float] = Field(default_factory=lambda: [1.0, 2.0, 4.0], description="Exponents p")
    q_grid: List[float] = Field(default_factory=lambda: [1.0, 2.0, 4.0], description="Exponents q")
    h_grid: List[float] = Field(default_factory=lambda: [settings.variance], description="Variances h")
    delta_grid: List[float] = Field(
        default_factory=lambda: [0.04, 0.02, 0.01, 0.005], description="Generator increments"
    )
    expansion_order: int = Field(3, ge=0, le=6, description="Order N of the t-power expansion")
    taylor_order: int = Field(2, ge=1, le=4, description="Order k of Taylor checks")
    trials: int = Field(200, ge=1, description="Random points per property check")
    method: MethodSpec = Field(default_factory=MethodSpec, description="Numerical method")
    checks: Optional[List[str]] = Field(None, description="Restrict the run to these check ids")
    output_dir: Optional[str] = Field(None, description="Output directory override")

    @field_validator("t_grid", "s_grid", "delta_grid")
    @classmethod
    def _check_times(cls, values: List[float]) -> List[float]:
        if not values:
            raise ValueError("grid must not be empty")
        if any(v < 0 for v in values):
            raise ValueError("times must be nonnegative")
        return values

    @field_validator("p_grid", "q_grid")
    @classmethod
    def _check_exponents(cls, values: List[float]) -> List[float]:
        if not values:
            raise ValueError("grid must not be empty")
        if any(v < 1 for v in values):
            raise ValueError("exponents must be at least 1")
        return values

    @field_validator("h_grid")
    @classmethod
    def _check_variances(cls, values: List[float]) -> List[float]:
        if not values:
            raise ValueError("grid must not be empty")
        if any(v <= 0 for v in values):
            raise ValueError("variances must be positive")
        return values

    @model_validator(mode="after")
    def _check_dimensions(self) -> "ExperimentConfig":
        if self.chain.sizes[-1] > self.dim:
            raise ValueError(f"chain size {self.chain.sizes[-1]} exceeds dim {self.dim}")
        ids = [s.id for s in self.symbols]
        if len(ids) != len(set(ids)):
            raise ValueError("symbol ids must be unique")
        for spec in self.symbols:
            for direction in _walk_directions(spec):
                if direction.coords is not None and len(direction.coords) != self.dim:
                    raise ValueError(f"symbol {spec.id} has a direction of length {len(direction.coords)}, not {self.dim}")
                if direction.kind == DirectionKind.BASIS and direction.index >= self.dim:
                    raise ValueError(f"symbol {spec.id} uses basis index {direction.index} outside dim {self.dim}")
        return self

    def config_hash(self) -> str:
        """sha256 over canonical JSON (sorted keys)."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """Validate a config tree, turning validation errors into diagnostics."""
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            first = e.errors()[0]
            field = ".".join(str(part) for part in first["loc"]) or None
            raise ConfigInvalidError(first["msg"], field=field) from e

    @classmethod
    def load(cls, path: Path, overrides: Optional[Dict[str, Any]] = None) -> "ExperimentConfig":
        """Parse a JSON config file and apply top-level overrides."""
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigInvalidError(f"cannot read config {path}: {e}") from e
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigInvalidError(f"invalid JSON: {e.msg}", line=e.lineno) from e
        if not isinstance(data, dict):
            raise ConfigInvalidError("config root must be an object")
        for key, value in (overrides or {}).items():
            if isinstance(value, dict) and isinstance(data.get(key), dict):
                data[key] = {**data[key], **value}
            else:
                data[key] = value
        return cls.from_dict(data)


class CheckSummary(BaseModel):
    """Manifest line for one emitted report."""

    experiment_id: str = Field(..., description="Owning experiment")
    check_id: str = Field(..., description="Check identifier")
    operation: str = Field(..., description="Operation that produced the report")
    passed: bool = Field(..., description="Check outcome")
    rows: int = Field(..., ge=0, description="Number of report rows")
    error: Optional[str] = Field(None, description="Error text when the check aborted")
    csv_path: Optional[str] = Field(None, description="Emitted CSV file")
    json_path: Optional[str] = Field(None, description="Emitted JSON file")


class RunManifest(BaseModel):
    """Summary of one run."""

    config_hash: str = Field(..., description="sha256 of the canonical config (or of all presets)")
    code_version: str = Field(..., description="Package version")
    timestamp: datetime = Field(default_factory=datetime.utcnow, description="Run start time (UTC)")
    seed: int = Field(..., description="Master seed")
    experiments: List[str] = Field(default_factory=list, description="Experiment ids in run order")
    checks: List[CheckSummary] = Field(default_factory=list, description="Per-check outcomes")

    @computed_field  # type: ignore[misc]
    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failed_checks(self) -> List[CheckSummary]:
        return [c for c in self.checks if not c.passed]
