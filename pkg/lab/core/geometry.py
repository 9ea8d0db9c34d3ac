"""Projections, quadratic forms and orthogonal maps on the truncated Hilbert space."""

from typing import Sequence

import numpy as np

from lab.exceptions import InvalidArgumentError
from lab.models.hilbert import (
    EpsilonSequence,
    FloatArray,
    OrthogonalMap,
    OrthonormalFrame,
    Subspace,
    SubspaceChain,
    TraceClassOperator,
    as_hvector,
)


def project(E: Subspace, x: Sequence[float]) -> FloatArray:
    """pi_E(x) = sum_k <x, b_k> b_k."""
    vec = as_hvector(x, E.dim)
    return E.basis @ (E.basis.T @ vec)


def project_rows(E: Subspace, points: FloatArray) -> FloatArray:
    """Row-wise projection of an (n, D) sample matrix."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != E.dim:
        raise InvalidArgumentError(f"expected points of shape (n, {E.dim}), got {pts.shape}")
    return (pts @ E.basis) @ E.basis.T


def complement_norm(inner: Subspace, outer: Subspace, x: Sequence[float]) -> float:
    """|pi_S(x)| for S the orthogonal complement of `inner` inside `outer`."""
    vec = as_hvector(x, outer.dim)
    outer_sq = float(np.sum((outer.basis.T @ vec) ** 2))
    inner_sq = float(np.sum((inner.basis.T @ vec) ** 2))
    return float(np.sqrt(max(outer_sq - inner_sq, 0.0)))


def q_form(A: TraceClassOperator, x: Sequence[float]) -> float:
    """Q_A(x) = sum_j lambda_j <u_j, x>^2."""
    vec = as_hvector(x, A.dim)
    coeffs = A.eigenvectors.T @ vec
    return float(np.sum(A.eigenvalues * coeffs ** 2))


def q_form_rows(A: TraceClassOperator, points: FloatArray) -> FloatArray:
    """Q_A evaluated on each row of an (n, D) matrix."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != A.dim:
        raise InvalidArgumentError(f"expected points of shape (n, {A.dim}), got {pts.shape}")
    coeffs = pts @ A.eigenvectors
    return (coeffs ** 2) @ A.eigenvalues


def q_polar(A: TraceClassOperator, x: Sequence[float], y: Sequence[float]) -> float:
    """Symmetric bilinear form <Ax, y>."""
    cx = A.eigenvectors.T @ as_hvector(x, A.dim)
    cy = A.eigenvectors.T @ as_hvector(y, A.dim)
    return float(np.sum(A.eigenvalues * cx * cy))


def a_norm(A: TraceClassOperator, x: Sequence[float]) -> float:
    """||x||_A = Q_A(x)^{1/2}."""
    return float(np.sqrt(q_form(A, x)))


def trace_in_frame(A: TraceClassOperator, frame: OrthonormalFrame) -> float:
    """sum_j Q_A(e_j) over the frame vectors."""
    if frame.dim != A.dim:
        raise InvalidArgumentError("frame and operator dimensions differ")
    return float(np.sum(q_form_rows(A, frame.vectors().T)))


def random_orthogonal(dim: int, seed: int) -> OrthogonalMap:
    """Haar-distributed orthogonal matrix from a sign-corrected QR of a Gaussian matrix."""
    if dim < 1:
        raise InvalidArgumentError("dimension must be at least 1")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return OrthogonalMap(matrix=q * signs)


def coordinate_chain(dim: int, sizes: Sequence[int]) -> SubspaceChain:
    """E_n = span(e_0..e_{n-1}) for each requested size."""
    return SubspaceChain(ambient_dim=dim, steps=[Subspace.coordinate(dim, n) for n in sizes])


def rotated_chain(dim: int, sizes: Sequence[int], seed: int) -> SubspaceChain:
    """Coordinate chain transported by a random orthogonal map."""
    phi = random_orthogonal(dim, seed)
    for n in sizes:
        if not 0 <= n <= dim:
            raise InvalidArgumentError(f"chain size {n} outside 0..{dim}")
    return SubspaceChain(
        ambient_dim=dim, steps=[Subspace(basis=phi.matrix[:, :n]) for n in sizes]
    )


def ba_operator(eps: EpsilonSequence) -> TraceClassOperator:
    """A = diag(epsilon), defining the measurable norm attached to S_m(B, eps)."""
    return TraceClassOperator.diagonal(eps.values)


def injective_completion(A: TraceClassOperator) -> TraceClassOperator:
    """A + C with C = sum_n e^{-n} <x, e_n> e_n restricted to ker A."""
    dim = A.dim
    kernel = np.eye(dim) - A.eigenvectors @ A.eigenvectors.T
    weights = np.diag(np.exp(-np.arange(dim, dtype=float)))
    completion = kernel @ weights @ kernel
    return TraceClassOperator.from_matrix(A.matrix() + completion, rtol=1e-15)
