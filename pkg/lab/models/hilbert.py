"""Finite-dimensional Hilbert space models: frames, subspaces, operators."""

from typing import List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
from scipy import linalg
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config.settings import settings
from lab.exceptions import InvalidArgumentError

FloatArray = npt.NDArray[np.float64]

CONSTRUCTION_TOLERANCE = settings.construction_tolerance
ROUNDTRIP_TOLERANCE = settings.roundtrip_tolerance


def as_hvector(coords: Sequence[float], dim: Optional[int] = None) -> FloatArray:
    """Coerce coordinates into a finite 1-D float array of the expected length."""
    arr = np.asarray(coords, dtype=float)
    if arr.ndim != 1:
        raise InvalidArgumentError(f"expected a 1-D coordinate array, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise InvalidArgumentError(f"dimension mismatch: expected {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("coordinates must be finite")
    return arr


def _readonly(values, ndim: int) -> FloatArray:
    arr = np.array(values, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("array entries must be finite")
    arr.setflags(write=False)
    return arr


class _ArrayModel(BaseModel):
    """Immutable model holding numpy arrays."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class OrthonormalFrame(_ArrayModel):
    """Finite truncation of a Hilbert basis, optionally paired into phase space."""

    dim: int = Field(..., ge=1, description="Ambient truncation dimension D")
    phase_pairing: List[Tuple[int, int]] = Field(
        default_factory=list, description="Index pairs (j_u, j_v) marking position/momentum slots"
    )
    basis: Optional[np.ndarray] = Field(
        None, description="D x D matrix whose columns are the frame vectors (identity when omitted)"
    )

    @field_validator("basis", mode="before")
    @classmethod
    def _coerce_basis(cls, value):
        return None if value is None else _readonly(value, 2)

    @model_validator(mode="after")
    def _check_frame(self) -> "OrthonormalFrame":
        seen = set()
        for j_u, j_v in self.phase_pairing:
            if j_u == j_v:
                raise ValueError(f"phase pair ({j_u}, {j_v}) uses the same index twice")
            for j in (j_u, j_v):
                if not 0 <= j < self.dim:
                    raise ValueError(f"phase index {j} outside 0..{self.dim - 1}")
                if j in seen:
                    raise ValueError(f"index {j} appears in more than one phase pair")
                seen.add(j)
        if self.basis is not None:
            if self.basis.shape != (self.dim, self.dim):
                raise ValueError("frame basis must be a D x D matrix")
            gram = self.basis.T @ self.basis
            if np.max(np.abs(gram - np.eye(self.dim))) > ROUNDTRIP_TOLERANCE:
                raise ValueError("frame basis is not orthonormal")
        return self

    @classmethod
    def canonical(cls, dim: int) -> "OrthonormalFrame":
        """Standard basis of R^dim."""
        return cls(dim=dim)

    @classmethod
    def phase_space(cls, n: int) -> "OrthonormalFrame":
        """Doubled frame of dimension 2n with u_j = e_j and v_j = e_{n+j}."""
        return cls(dim=2 * n, phase_pairing=[(j, n + j) for j in range(n)])

    def vectors(self) -> FloatArray:
        """Frame vectors as matrix columns."""
        return np.eye(self.dim) if self.basis is None else self.basis

    def vector(self, j: int) -> FloatArray:
        """The j-th frame vector."""
        if not 0 <= j < self.dim:
            raise InvalidArgumentError(f"frame index {j} outside 0..{self.dim - 1}")
        return np.array(self.vectors()[:, j])

    def groups(self) -> List[Tuple[int, ...]]:
        """Index groups of the phase bookkeeping: each pair once, unpaired indices alone."""
        paired = {j: pair for pair in self.phase_pairing for j in pair}
        groups: List[Tuple[int, ...]] = []
        done = set()
        for j in range(self.dim):
            if j in done:
                continue
            group = tuple(sorted(paired[j])) if j in paired else (j,)
            groups.append(group)
            done.update(group)
        return groups

    def rotated(self, phi: "OrthogonalMap") -> "OrthonormalFrame":
        """Frame (phi e_j) with the same phase pairing."""
        if phi.dim != self.dim:
            raise InvalidArgumentError("orthogonal map dimension differs from frame dimension")
        return OrthonormalFrame(
            dim=self.dim, phase_pairing=list(self.phase_pairing), basis=phi.matrix @ self.vectors()
        )


class Subspace(_ArrayModel):
    """Finite-dimensional subspace given by an orthonormal basis (columns)."""

    basis: np.ndarray = Field(..., description="D x k isometry whose columns span the subspace")

    @field_validator("basis", mode="before")
    @classmethod
    def _coerce_basis(cls, value):
        return _readonly(value, 2)

    @model_validator(mode="after")
    def _check_orthonormal(self) -> "Subspace":
        k = self.basis.shape[1]
        if k > self.basis.shape[0]:
            raise ValueError("subspace rank exceeds ambient dimension")
        gram = self.basis.T @ self.basis
        if k and np.max(np.abs(gram - np.eye(k))) > CONSTRUCTION_TOLERANCE:
            raise ValueError("subspace basis Gram matrix differs from identity")
        return self

    @property
    def dim(self) -> int:
        return int(self.basis.shape[0])

    @property
    def rank(self) -> int:
        return int(self.basis.shape[1])

    @classmethod
    def from_vectors(cls, vectors: Sequence[Sequence[float]], dim: int) -> "Subspace":
        """Orthonormalize spanning vectors with a column-pivoted QR factorization."""
        if len(vectors) == 0:
            return cls.zero(dim)
        mat = np.column_stack([as_hvector(v, dim) for v in vectors])
        q, r, _ = linalg.qr(mat, mode="economic", pivoting=True)
        diag = np.abs(np.diag(r))
        rank = int(np.sum(diag > CONSTRUCTION_TOLERANCE * max(1.0, float(diag.max(initial=0.0)))))
        return cls(basis=q[:, :rank])

    @classmethod
    def coordinate(cls, dim: int, n: int) -> "Subspace":
        """span(e_0..e_{n-1})."""
        if not 0 <= n <= dim:
            raise InvalidArgumentError(f"coordinate subspace size {n} outside 0..{dim}")
        return cls(basis=np.eye(dim)[:, :n])

    @classmethod
    def zero(cls, dim: int) -> "Subspace":
        return cls(basis=np.zeros((dim, 0)))

    @classmethod
    def full(cls, dim: int) -> "Subspace":
        return cls(basis=np.eye(dim))


class TraceClassOperator(_ArrayModel):
    """Nonnegative self-adjoint operator stored by its nonzero spectrum."""

    dim: int = Field(..., ge=1, description="Ambient dimension")
    eigenvalues: np.ndarray = Field(..., description="Nonincreasing nonnegative eigenvalues")
    eigenvectors: np.ndarray = Field(..., description="D x r matrix of orthonormal eigenvectors")

    @field_validator("eigenvalues", mode="before")
    @classmethod
    def _coerce_values(cls, value):
        return _readonly(value, 1)

    @field_validator("eigenvectors", mode="before")
    @classmethod
    def _coerce_vectors(cls, value):
        arr = np.asarray(value, dtype=float)
        if arr.ndim == 1 and arr.size == 0:
            arr = arr.reshape(0, 0)
        return _readonly(arr, 2)

    @model_validator(mode="after")
    def _check_spectrum(self) -> "TraceClassOperator":
        lam, vecs = self.eigenvalues, self.eigenvectors
        r = lam.shape[0]
        if r == 0 and vecs.size == 0:
            object.__setattr__(self, "eigenvectors", _readonly(np.zeros((self.dim, 0)), 2))
            return self
        if vecs.shape != (self.dim, r):
            raise ValueError(f"eigenvectors must have shape ({self.dim}, {r})")
        if np.any(lam < 0):
            raise ValueError("eigenvalues must be nonnegative")
        if np.any(np.diff(lam) > CONSTRUCTION_TOLERANCE * max(1.0, float(lam[0]))):
            raise ValueError("eigenvalues must be sorted in nonincreasing order")
        gram = vecs.T @ vecs
        if np.max(np.abs(gram - np.eye(r))) > CONSTRUCTION_TOLERANCE:
            raise ValueError("eigenvectors are not orthonormal")
        return self

    @property
    def rank(self) -> int:
        return int(self.eigenvalues.shape[0])

    @property
    def trace(self) -> float:
        return float(np.sum(self.eigenvalues))

    @property
    def max_eigenvalue(self) -> float:
        return float(self.eigenvalues[0]) if self.rank else 0.0

    def matrix(self) -> FloatArray:
        """Dense D x D representation."""
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.T

    @classmethod
    def from_spectrum(
        cls, eigenvalues: Sequence[float], eigenvectors: FloatArray, dim: int
    ) -> "TraceClassOperator":
        """Sort the spectrum and drop zero eigenvalues."""
        lam = np.asarray(eigenvalues, dtype=float)
        vecs = np.asarray(eigenvectors, dtype=float).reshape(dim, lam.shape[0])
        if np.any(lam < 0):
            raise InvalidArgumentError("eigenvalues must be nonnegative")
        order = np.argsort(-lam, kind="stable")
        keep = [i for i in order if lam[i] > 0]
        return cls(dim=dim, eigenvalues=lam[keep], eigenvectors=vecs[:, keep])

    @classmethod
    def from_matrix(cls, matrix: FloatArray, rtol: float = 1e-14) -> "TraceClassOperator":
        """Spectral decomposition of a symmetric nonnegative matrix."""
        mat = np.asarray(matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise InvalidArgumentError("operator matrix must be square")
        sym = 0.5 * (mat + mat.T)
        lam, vecs = np.linalg.eigh(sym)
        scale = max(float(np.max(np.abs(lam), initial=0.0)), 0.0)
        if np.any(lam < -1e-10 * max(scale, 1.0)):
            raise InvalidArgumentError("operator matrix is not nonnegative")
        keep = lam > rtol * scale
        return cls.from_spectrum(lam[keep], vecs[:, keep], dim=mat.shape[0])

    @classmethod
    def rank_one(cls, a: Sequence[float]) -> "TraceClassOperator":
        """a a^T, i.e. lambda = |a|^2 with eigenvector a/|a|."""
        vec = as_hvector(a)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            return cls.zero(vec.shape[0])
        return cls(dim=vec.shape[0], eigenvalues=[norm ** 2], eigenvectors=(vec / norm)[:, None])

    @classmethod
    def diagonal(cls, values: Sequence[float]) -> "TraceClassOperator":
        """Operator diagonal in the canonical frame."""
        lam = np.asarray(values, dtype=float)
        return cls.from_spectrum(lam, np.eye(lam.shape[0]), dim=lam.shape[0])

    @classmethod
    def geometric(cls, dim: int, ratio: float = 0.5, scale: float = 1.0) -> "TraceClassOperator":
        """lambda_j = scale * ratio^j on the canonical frame."""
        return cls.diagonal(scale * ratio ** np.arange(dim))

    @classmethod
    def zero(cls, dim: int) -> "TraceClassOperator":
        return cls(dim=dim, eigenvalues=np.zeros(0), eigenvectors=np.zeros((dim, 0)))

    def conjugate(self, phi: "OrthogonalMap") -> "TraceClassOperator":
        """phi* A phi, whose eigenvectors are phi^T u_j."""
        if phi.dim != self.dim:
            raise InvalidArgumentError("orthogonal map dimension differs from operator dimension")
        return TraceClassOperator(
            dim=self.dim,
            eigenvalues=self.eigenvalues,
            eigenvectors=phi.matrix.T @ self.eigenvectors,
        )

    def scaled(self, factor: float) -> "TraceClassOperator":
        if factor < 0:
            raise InvalidArgumentError("operator scale factor must be nonnegative")
        if factor == 0:
            return TraceClassOperator.zero(self.dim)
        return TraceClassOperator(
            dim=self.dim, eigenvalues=factor * self.eigenvalues, eigenvectors=self.eigenvectors
        )

    def plus(self, other: "TraceClassOperator") -> "TraceClassOperator":
        if other.dim != self.dim:
            raise InvalidArgumentError("operator dimensions differ")
        return TraceClassOperator.from_matrix(self.matrix() + other.matrix())


class EpsilonSequence(_ArrayModel):
    """Nonnegative weights attached to frame indices, with cached sums."""

    values: np.ndarray = Field(..., description="epsilon_j >= 0 per frame index")
    total: float = Field(..., description="Cached sum of epsilon_j")
    total_sq: float = Field(..., description="Cached sum of epsilon_j^2")

    @field_validator("values", mode="before")
    @classmethod
    def _coerce_values(cls, value):
        return _readonly(value, 1)

    @model_validator(mode="after")
    def _check_sums(self) -> "EpsilonSequence":
        if np.any(self.values < 0):
            raise ValueError("epsilon values must be nonnegative")
        total, total_sq = float(np.sum(self.values)), float(np.sum(self.values ** 2))
        if abs(total - self.total) > CONSTRUCTION_TOLERANCE * max(1.0, total):
            raise ValueError("cached epsilon sum does not match values")
        if abs(total_sq - self.total_sq) > CONSTRUCTION_TOLERANCE * max(1.0, total_sq):
            raise ValueError("cached epsilon square sum does not match values")
        return self

    @classmethod
    def of(cls, values: Sequence[float]) -> "EpsilonSequence":
        arr = np.asarray(values, dtype=float)
        return cls(values=arr, total=float(np.sum(arr)), total_sq=float(np.sum(arr ** 2)))

    @classmethod
    def geometric(cls, dim: int, ratio: float = 0.5, scale: float = 1.0) -> "EpsilonSequence":
        """epsilon_j = scale * ratio^j."""
        return cls.of(scale * ratio ** np.arange(dim))

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def plus(self, other: "EpsilonSequence") -> "EpsilonSequence":
        if other.dim != self.dim:
            raise InvalidArgumentError("epsilon sequences have different lengths")
        return EpsilonSequence.of(self.values + other.values)

    def group_values(self, frame: OrthonormalFrame) -> FloatArray:
        """One weight per phase group: the larger epsilon of a pair."""
        if frame.dim != self.dim:
            raise InvalidArgumentError("epsilon length differs from frame dimension")
        return np.array([max(self.values[j] for j in group) for group in frame.groups()])

    def group_sum(self, frame: OrthonormalFrame) -> float:
        return float(np.sum(self.group_values(frame)))

    def group_sum_sq(self, frame: OrthonormalFrame) -> float:
        return float(np.sum(self.group_values(frame) ** 2))


class OrthogonalMap(_ArrayModel):
    """Orthogonal D x D matrix."""

    matrix: np.ndarray = Field(..., description="Orthogonal matrix")

    @field_validator("matrix", mode="before")
    @classmethod
    def _coerce_matrix(cls, value):
        return _readonly(value, 2)

    @model_validator(mode="after")
    def _check_orthogonal(self) -> "OrthogonalMap":
        m = self.matrix
        if m.shape[0] != m.shape[1]:
            raise ValueError("orthogonal map must be square")
        eye = np.eye(m.shape[0])
        if max(np.max(np.abs(m @ m.T - eye)), np.max(np.abs(m.T @ m - eye))) > ROUNDTRIP_TOLERANCE:
            raise ValueError("matrix is not orthogonal")
        return self

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    @classmethod
    def identity(cls, dim: int) -> "OrthogonalMap":
        return cls(matrix=np.eye(dim))

    def adjoint(self) -> "OrthogonalMap":
        return OrthogonalMap(matrix=self.matrix.T)

    def apply(self, x: Sequence[float]) -> FloatArray:
        return self.matrix @ as_hvector(x, self.dim)


class SubspaceChain(_ArrayModel):
    """Increasing chain E_1 in E_2 in ... in E_K inside the ambient truncation."""

    ambient_dim: int = Field(..., ge=1, description="Ambient dimension D")
    steps: List[Subspace] = Field(..., min_length=1, description="Nested subspaces in order")

    @model_validator(mode="after")
    def _check_nested(self) -> "SubspaceChain":
        previous: Optional[Subspace] = None
        for subspace in self.steps:
            if subspace.dim != self.ambient_dim:
                raise ValueError("chain subspace lives in a different ambient dimension")
            if previous is not None:
                k = previous.rank
                if subspace.rank < k:
                    raise ValueError("chain ranks must be nondecreasing")
                drift = np.max(np.abs(subspace.basis[:, :k] - previous.basis), initial=0.0)
                if drift > CONSTRUCTION_TOLERANCE:
                    raise ValueError("chain basis does not extend the previous step")
            previous = subspace
        return self

    @property
    def ranks(self) -> List[int]:
        return [s.rank for s in self.steps]

    @property
    def top(self) -> Subspace:
        return self.steps[-1]
