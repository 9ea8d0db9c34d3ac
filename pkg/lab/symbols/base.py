"""Symbol interface, class-membership claims and the finite-difference fallback."""

from abc import ABC, abstractmethod
from typing import Callable, List, Mapping, Optional, Sequence, Union

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field

from lab.exceptions import InvalidArgumentError, UnsupportedOrderError
from lab.models.hilbert import EpsilonSequence, FloatArray, OrthonormalFrame, TraceClassOperator

logger = structlog.get_logger(__name__)

Scalar = Union[float, complex]
MultiIndexSpec = Union[Mapping[int, int], Sequence[int]]

FD_STEP = 1e-4


class SymbolClaim(BaseModel):
    """Claimed class memberships. Claims are verified by sampling, never inferred."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    smeps_norm: Optional[float] = Field(None, ge=0.0, description="Claimed ||F||_{m,eps}")
    eps: Optional[EpsilonSequence] = Field(None, description="Weights of the S_m(B, eps) claim")
    depth: Optional[int] = Field(None, ge=0, description="Depth m of the S_m(B, eps) claim")
    qa_norm: Optional[float] = Field(None, ge=0.0, description="Claimed ||f||_{Q_A}")
    qa_operator: Optional[TraceClassOperator] = Field(None, description="Operator A of the S(Q_A) claim")
    sup_bound: Optional[float] = Field(None, ge=0.0, description="Claimed bound on |F|")

    @property
    def has_smeps(self) -> bool:
        return self.smeps_norm is not None and self.eps is not None

    @property
    def has_qa(self) -> bool:
        return self.qa_norm is not None and self.qa_operator is not None

    @property
    def norm_bound(self) -> Optional[float]:
        """Smallest claimed bound on the sup norm."""
        bounds = [b for b in (self.smeps_norm, self.qa_norm, self.sup_bound) if b is not None]
        return min(bounds) if bounds else None


def expand_multi_index(multi_index: MultiIndexSpec) -> List[int]:
    """{j: alpha_j} or a list of indices -> list of frame indices with repetition."""
    if isinstance(multi_index, Mapping):
        indices: List[int] = []
        for j, count in sorted(multi_index.items()):
            if count < 0:
                raise InvalidArgumentError("multi-index entries must be nonnegative")
            indices.extend([int(j)] * int(count))
        return indices
    return [int(j) for j in multi_index]


class Symbol(ABC):
    """Evaluable function on the truncated Hilbert space with derivatives."""

    is_complex: bool = False
    certified: bool = True
    max_order: Optional[int] = None

    def __init__(self, dim: int, claim: Optional[SymbolClaim] = None, label: str = ""):
        if dim < 1:
            raise InvalidArgumentError("symbol dimension must be at least 1")
        self.dim = int(dim)
        self.claim = claim or SymbolClaim()
        self.label = label or type(self).__name__

    def __repr__(self) -> str:
        return f"{type(self).__name__}(label={self.label!r}, dim={self.dim})"

    @abstractmethod
    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Values at each row of an (n, D) array."""

    @abstractmethod
    def derivative_rows(self, points: np.ndarray, directions: Sequence[np.ndarray]) -> np.ndarray:
        """d^m F(x)(U_1..U_m) per row; each U is (D,) or one row per point."""

    @abstractmethod
    def directional_symbol(self, direction: Sequence[float]) -> "Symbol":
        """x -> dF(x) u."""

    @abstractmethod
    def laplacian_symbol(self) -> "Symbol":
        """x -> Delta F(x)."""

    @abstractmethod
    def compose_linear(self, matrix: FloatArray) -> "Symbol":
        """x -> F(M x)."""

    def with_claim(self, claim: SymbolClaim) -> "Symbol":
        """Same symbol carrying another claim."""
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.claim = claim
        return clone

    def _points(self, points: np.ndarray) -> FloatArray:
        arr = np.asarray(points, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2 or arr.shape[1] != self.dim:
            raise InvalidArgumentError(f"expected points with {self.dim} coordinates, got {arr.shape}")
        return arr

    def _scalar(self, value) -> Scalar:
        value = complex(np.asarray(value).reshape(-1)[0])
        return value if self.is_complex else value.real

    def __call__(self, x: Sequence[float]) -> Scalar:
        return self._scalar(self.evaluate(self._points(x)))

    def derivative(self, x: Sequence[float], directions: Sequence[Sequence[float]]) -> Scalar:
        """d^m F(x)(U_1..U_m) at a single point."""
        if self.max_order is not None and len(directions) > self.max_order:
            raise UnsupportedOrderError(f"order {len(directions)} exceeds available order {self.max_order}")
        dirs = [np.asarray(u, dtype=float).reshape(self.dim) for u in directions]
        return self._scalar(self.derivative_rows(self._points(x), dirs))

    def directional_derivative(self, m: int, x: Sequence[float], directions: Sequence[Sequence[float]]) -> Scalar:
        if len(directions) != m:
            raise InvalidArgumentError(f"expected {m} directions, got {len(directions)}")
        return self.derivative(x, directions)

    def partial(self, multi_index: MultiIndexSpec, frame: Optional[OrthonormalFrame] = None) -> "Symbol":
        """Symbol d^alpha F along frame vectors."""
        frame = frame or OrthonormalFrame.canonical(self.dim)
        symbol: Symbol = self
        for j in expand_multi_index(multi_index):
            symbol = symbol.directional_symbol(frame.vector(j))
        return symbol

    def partial_value(
        self, x: Sequence[float], multi_index: MultiIndexSpec, frame: Optional[OrthonormalFrame] = None
    ) -> Scalar:
        frame = frame or OrthonormalFrame.canonical(self.dim)
        return self.derivative(x, [frame.vector(j) for j in expand_multi_index(multi_index)])


def _step(points: FloatArray, direction: np.ndarray) -> FloatArray:
    scale = np.linalg.norm(direction, axis=-1)
    scale = np.where(scale > 0, scale, 1.0)
    return FD_STEP * (1.0 + np.linalg.norm(points, axis=1)) / scale


class CallableSymbol(Symbol):
    """User function with finite-difference derivatives; never certified."""

    certified = False
    max_order = 2

    def __init__(
        self,
        func: Callable[[np.ndarray], np.ndarray],
        dim: int,
        label: str = "",
        is_complex: bool = False,
        claim: Optional[SymbolClaim] = None,
        max_order: int = 2,
    ):
        super().__init__(dim, claim, label)
        self.func = func
        self.is_complex = is_complex
        self.max_order = max_order

    def evaluate(self, points):
        return np.asarray(self.func(self._points(points)))

    def derivative_rows(self, points, directions):
        x = self._points(points)
        dirs = [np.broadcast_to(np.asarray(u, dtype=float), x.shape) for u in directions]
        if len(dirs) > self.max_order:
            raise UnsupportedOrderError(f"finite differences support order <= {self.max_order}")
        if not dirs:
            return self.evaluate(x)
        if len(dirs) == 1:
            u = dirs[0]
            h = _step(x, u)[:, None]

            def central(step):
                return (self.evaluate(x + step * u) - self.evaluate(x - step * u)) / (2.0 * step[:, 0])

            return (4.0 * central(h / 2.0) - central(h)) / 3.0
        u, v = dirs
        h = np.minimum(_step(x, u), _step(x, v))[:, None]

        def mixed(step):
            return (
                self.evaluate(x + step * (u + v))
                - self.evaluate(x + step * (u - v))
                - self.evaluate(x - step * (u - v))
                + self.evaluate(x - step * (u + v))
            ) / (4.0 * step[:, 0] ** 2)

        return (4.0 * mixed(h / 2.0) - mixed(h)) / 3.0

    def directional_symbol(self, direction):
        u = np.asarray(direction, dtype=float).reshape(self.dim)
        return CallableSymbol(
            lambda pts: self.derivative_rows(pts, [u]),
            self.dim,
            label=f"d({self.label})",
            is_complex=self.is_complex,
            max_order=max(self.max_order - 1, 0),
        )

    def laplacian_symbol(self):
        return CallableSymbol(
            lambda pts: fd_laplacian_rows(self, pts),
            self.dim,
            label=f"lap({self.label})",
            is_complex=self.is_complex,
            max_order=0,
        )

    def compose_linear(self, matrix):
        mat = np.asarray(matrix, dtype=float)
        return CallableSymbol(
            lambda pts: self.evaluate(np.asarray(pts) @ mat.T),
            self.dim,
            label=f"{self.label}@M",
            is_complex=self.is_complex,
            max_order=self.max_order,
        )


def fd_laplacian_rows(f: Symbol, points: np.ndarray, frame: Optional[OrthonormalFrame] = None) -> np.ndarray:
    """Sum of second central differences along the frame, one Richardson level, step 1e-4 (1 + |x|)."""
    x = np.asarray(points, dtype=float).reshape(-1, f.dim)
    vectors = (frame or OrthonormalFrame.canonical(f.dim)).vectors().T
    n, d = x.shape[0], vectors.shape[0]
    h = FD_STEP * (1.0 + np.linalg.norm(x, axis=1))
    centre = f.evaluate(x)

    def second_difference(step: np.ndarray) -> np.ndarray:
        offsets = step[:, None, None] * vectors[None, :, :]
        plus = f.evaluate((x[:, None, :] + offsets).reshape(-1, f.dim)).reshape(n, d)
        minus = f.evaluate((x[:, None, :] - offsets).reshape(-1, f.dim)).reshape(n, d)
        return (plus + minus - 2.0 * centre[:, None]).sum(axis=1) / step ** 2

    return (4.0 * second_difference(h / 2.0) - second_difference(h)) / 3.0
