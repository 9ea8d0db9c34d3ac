"""Symbol algebra: orthogonal composition, coordinate multiplication, Laplacians, Taylor forms, heat smoothing."""

from typing import Optional, Sequence, Tuple

import numpy as np
import structlog

from config.settings import settings
from lab.exceptions import InvalidArgumentError, UnsupportedOrderError
from lab.models.hilbert import FloatArray, OrthogonalMap, OrthonormalFrame, as_hvector
from lab.symbols.base import CallableSymbol, Scalar, Symbol, SymbolClaim, fd_laplacian_rows
from lab.symbols.cylindrical import CylindricalSymbol
from lab.symbols.profiles import HeatedProfile, PolynomialProfile, ProductProfile

logger = structlog.get_logger(__name__)


def compose_orthogonal(f: Symbol, phi: OrthogonalMap) -> Symbol:
    """f o phi, carrying the conjugated S(Q_{phi* A phi}) claim."""
    if phi.dim != f.dim:
        raise InvalidArgumentError(f"orthogonal map of dimension {phi.dim} on a symbol of dimension {f.dim}")
    composed = f.compose_linear(phi.matrix)
    claim = f.claim
    qa_operator = claim.qa_operator.conjugate(phi) if claim.has_qa else None
    return composed.with_claim(
        SymbolClaim(
            smeps_norm=None,
            qa_norm=claim.qa_norm if qa_operator is not None else None,
            qa_operator=qa_operator,
            sup_bound=claim.norm_bound,
        )
    )


def multiply_coordinate(f: Symbol, z: Sequence[float]) -> Symbol:
    """x -> <z, x> f(x); unbounded, no claim."""
    vec = as_hvector(z, f.dim)
    if isinstance(f, CylindricalSymbol):
        return CylindricalSymbol(
            ProductProfile([PolynomialProfile.monomial((1,)), f.profile]),
            np.vstack([vec[None, :], f.directions]),
            label=f"M({f.label})",
            dim=f.dim,
        )
    return CallableSymbol(
        lambda pts: (np.asarray(pts) @ vec) * f.evaluate(pts),
        f.dim,
        label=f"M({f.label})",
        is_complex=f.is_complex,
        max_order=f.max_order or 0,
    )


def laplacian(f: Symbol, x: Sequence[float], frame: Optional[OrthonormalFrame] = None) -> Scalar:
    """Sum of d^2 f(x)(e_j, e_j) over the frame; frame-free closed form for cylindrical symbols."""
    point = as_hvector(x, f.dim)
    if frame is None and isinstance(f, CylindricalSymbol):
        return f.laplacian_symbol()(point)
    frame = frame or OrthonormalFrame.canonical(f.dim)
    if frame.dim != f.dim:
        raise InvalidArgumentError("frame dimension differs from symbol dimension")
    if not f.certified:
        logger.warning("Finite-difference Laplacian on an uncertified symbol", symbol=f.label)
        return f._scalar(fd_laplacian_rows(f, point, frame).sum())
    basis = frame.vectors().T
    points = np.repeat(point[None, :], basis.shape[0], axis=0)
    return f._scalar(f.derivative_rows(points, [basis, basis]).sum())


def iterated_laplacian(f: Symbol, x: Sequence[float], j: int) -> Scalar:
    """Delta^j f(x) by nested exact Laplacians of the profile."""
    if j < 0:
        raise InvalidArgumentError("Laplacian power must be nonnegative")
    if j == 0:
        return f(x)
    if not isinstance(f, CylindricalSymbol):
        raise UnsupportedOrderError(f"iterated Laplacian needs a cylindrical symbol, got {f.label}")
    if f.max_order is not None and 2 * j > f.max_order:
        raise UnsupportedOrderError(f"Delta^{j} needs order {2 * j}, available {f.max_order}")
    symbol: Symbol = f
    for _ in range(j):
        symbol = symbol.laplacian_symbol()
    return symbol(x)


def taylor_form(f: Symbol, x: Sequence[float], k: int, ys: Sequence[Sequence[float]]) -> Scalar:
    """Phi_k(x)(Y_1..Y_k), the symmetric k-linear form of the k-th differential."""
    if k < 0 or len(ys) != k:
        raise InvalidArgumentError(f"taylor form of order {k} needs {k} vectors, got {len(ys)}")
    if f.max_order is not None and k > f.max_order:
        raise UnsupportedOrderError(f"order {k} exceeds available order {f.max_order}")
    return f.derivative(x, ys)


def finite_difference(f: Symbol, x: Sequence[float], directions: Sequence[Sequence[float]], step: float = 1e-5) -> Scalar:
    """Central difference of order 1 or 2, used as an oracle for the chain rule."""
    point = as_hvector(x, f.dim)
    dirs = [as_hvector(u, f.dim) for u in directions]
    if len(dirs) == 1:
        u = dirs[0]
        return (f(point + step * u) - f(point - step * u)) / (2.0 * step)
    if len(dirs) == 2:
        u, v = dirs
        return (
            f(point + step * (u + v)) - f(point + step * (u - v)) - f(point - step * (u - v)) + f(point - step * (u + v))
        ) / (4.0 * step * step)
    raise UnsupportedOrderError("finite differences support orders 1 and 2")


def gram_factor(gram: FloatArray, condition_limit: Optional[float] = None) -> FloatArray:
    """L with L L^T = G; Cholesky when well conditioned, else eigen-pruned."""
    gram = 0.5 * (np.asarray(gram, dtype=float) + np.asarray(gram, dtype=float).T)
    k = gram.shape[0]
    if k == 0:
        return np.zeros((0, 0))
    limit = condition_limit or settings.gram_condition_limit
    lam, vecs = np.linalg.eigh(gram)
    top = float(lam[-1])
    if top <= 0.0:
        return np.zeros((k, 0))
    if float(lam[0]) > top / limit:
        return np.linalg.cholesky(gram)
    keep = lam > top / limit
    logger.warning(
        "Pruning ill-conditioned Gram directions",
        kept=int(keep.sum()),
        dropped=int(k - keep.sum()),
        condition=float(top / max(float(lam[0]), np.finfo(float).tiny)),
    )
    return vecs[:, keep] * np.sqrt(lam[keep])


def smooth_symbol(
    f: Symbol, t: float, order: Optional[int] = None, budget: Optional[int] = None
) -> Tuple[Symbol, bool]:
    """H_t f as a symbol and whether it is a closed form.

    H_t f(x) = E g(A x + A y), y ~ N(0, t I), and A y ~ N(0, t G) with G the
    Gram matrix of the directions. H_t-stable profiles smooth in closed form;
    anything else becomes a quadrature-smoothed profile.
    """
    if t < 0:
        raise InvalidArgumentError("heat time must be nonnegative")
    if not isinstance(f, CylindricalSymbol):
        raise InvalidArgumentError(f"closed-form smoothing needs a cylindrical symbol, got {f.label}")
    if t == 0:
        return f, True
    cov = t * f.gram
    label = f"H[{t:g}]({f.label})"
    result = f.profile.smoothed(cov)
    if result is not None:
        profile, transform = result
        directions = transform @ f.directions if profile.arity else np.zeros((0, f.dim))
        return CylindricalSymbol(profile, directions, claim=f.claim, label=label, dim=f.dim), True
    heated = HeatedProfile(
        f.profile,
        gram_factor(cov),
        order or settings.quad_order,
        budget or settings.quad_grid_budget,
    )
    heated.nested_grid_size()
    return CylindricalSymbol(heated, f.directions, claim=f.claim, label=label, dim=f.dim), False
