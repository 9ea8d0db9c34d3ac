"""Stock symbol families with their class claims."""

import math
from typing import Optional, Sequence

import numpy as np

from lab.exceptions import InvalidArgumentError
from lab.models.hilbert import EpsilonSequence, TraceClassOperator, as_hvector
from lab.symbols.base import Symbol, SymbolClaim
from lab.symbols.cylindrical import CylindricalSymbol
from lab.symbols.profiles import (
    ConstantProfile,
    CosineProfile,
    ExpIProfile,
    GaussianBellProfile,
    LinearCombinationProfile,
    PolynomialProfile,
    ProductProfile,
)


def trig_smeps_norm(a: Sequence[float], eps: EpsilonSequence, depth: int) -> float:
    """Smallest M with prod |a_j|^{alpha_j} <= M prod eps_j^{alpha_j} for every depth-m multi-index."""
    vec = as_hvector(a, eps.dim)
    log_norm = 0.0
    for a_j, e_j in zip(np.abs(vec), eps.values):
        if a_j == 0.0:
            continue
        if e_j == 0.0:
            return math.inf
        if a_j > e_j:
            log_norm += depth * math.log(a_j / e_j)
    return math.exp(log_norm)


def _trig_claim(a: np.ndarray, eps: Optional[EpsilonSequence], depth: int, amplitude: float) -> SymbolClaim:
    smeps = None if eps is None else amplitude * trig_smeps_norm(a, eps, depth)
    return SymbolClaim(
        smeps_norm=smeps,
        eps=eps,
        depth=depth if eps is not None else None,
        qa_norm=amplitude,
        qa_operator=TraceClassOperator.rank_one(a),
        sup_bound=amplitude,
    )


def constant_symbol(
    constant: float, dim: int, eps: Optional[EpsilonSequence] = None, depth: int = 2, label: str = "constant"
) -> CylindricalSymbol:
    """F = c; in every class with norm |c|."""
    magnitude = abs(constant)
    claim = SymbolClaim(
        smeps_norm=magnitude if eps is not None else None,
        eps=eps,
        depth=depth if eps is not None else None,
        qa_norm=magnitude,
        qa_operator=TraceClassOperator.zero(dim),
        sup_bound=magnitude,
    )
    return CylindricalSymbol(ConstantProfile(constant), np.zeros((0, dim)), claim=claim, label=label, dim=dim)


def linear_symbol(a: Sequence[float], label: str = "linear") -> CylindricalSymbol:
    """x -> <a, x>; unbounded, no claim."""
    vec = as_hvector(a)
    return CylindricalSymbol(PolynomialProfile.monomial((1,)), vec[None, :], label=label)


def trig_symbol(
    a: Sequence[float],
    phase: float = 0.0,
    eps: Optional[EpsilonSequence] = None,
    depth: int = 2,
    amplitude: float = 1.0,
    label: str = "trig",
) -> CylindricalSymbol:
    """x -> A cos(<a, x> + theta), in S(Q_{a a^T}) with norm A."""
    vec = as_hvector(a)
    return CylindricalSymbol(
        CosineProfile(amplitude, phase),
        vec[None, :],
        claim=_trig_claim(vec, eps, depth, abs(amplitude)),
        label=label,
    )


def exp_i_symbol(
    a: Sequence[float], eps: Optional[EpsilonSequence] = None, depth: int = 2, label: str = "exp_i"
) -> CylindricalSymbol:
    """x -> e^{i <a, x>}."""
    vec = as_hvector(a)
    return CylindricalSymbol(ExpIProfile(), vec[None, :], claim=_trig_claim(vec, eps, depth, 1.0), label=label)


def gaussian_bell_symbol(operator: TraceClassOperator, label: str = "bell") -> CylindricalSymbol:
    """x -> exp(-Q_C(x) / 2) with directions sqrt(lambda_j) u_j."""
    directions = (np.sqrt(operator.eigenvalues)[:, None] * operator.eigenvectors.T).reshape(
        operator.rank, operator.dim
    )
    return CylindricalSymbol(
        GaussianBellProfile(operator.rank),
        directions,
        claim=SymbolClaim(sup_bound=1.0),
        label=label,
        dim=operator.dim,
    )


def poly_scalar_symbol(
    a_list: Sequence[Sequence[float]], exponents: Sequence[int], label: str = "poly"
) -> CylindricalSymbol:
    """x -> prod <a_i, x>^{alpha_i}; unbounded, no claim."""
    if len(a_list) != len(exponents) or not a_list:
        raise InvalidArgumentError("one positive exponent per direction is required")
    if any(int(e) != e or e < 1 for e in exponents):
        raise InvalidArgumentError("exponents must be positive integers")
    dim = len(a_list[0])
    directions = np.stack([as_hvector(a, dim) for a in a_list])
    return CylindricalSymbol(PolynomialProfile.monomial([int(e) for e in exponents]), directions, label=label)


def _cylindrical(symbol: Symbol) -> CylindricalSymbol:
    if not isinstance(symbol, CylindricalSymbol):
        raise InvalidArgumentError(f"{symbol.label} is not cylindrical")
    return symbol


def product_symbol(f: Symbol, g: Symbol, label: str = "") -> CylindricalSymbol:
    """x -> f(x) g(x) with the product claims of both classes."""
    f, g = _cylindrical(f), _cylindrical(g)
    if f.dim != g.dim:
        raise InvalidArgumentError("factors live in different dimensions")
    cf, cg = f.claim, g.claim
    smeps = eps = depth = None
    if cf.has_smeps and cg.has_smeps and cf.depth is not None and cg.depth is not None:
        smeps, eps, depth = cf.smeps_norm * cg.smeps_norm, cf.eps.plus(cg.eps), min(cf.depth, cg.depth)
    qa_norm = qa_operator = None
    if cf.has_qa and cg.has_qa:
        qa_norm = cf.qa_norm * cg.qa_norm
        qa_operator = cf.qa_operator.plus(cg.qa_operator).scaled(2.0)
    sup = None
    if cf.norm_bound is not None and cg.norm_bound is not None:
        sup = cf.norm_bound * cg.norm_bound
    claim = SymbolClaim(
        smeps_norm=smeps, eps=eps, depth=depth, qa_norm=qa_norm, qa_operator=qa_operator, sup_bound=sup
    )
    return CylindricalSymbol(
        ProductProfile([f.profile, g.profile]),
        np.vstack([f.directions, g.directions]),
        claim=claim,
        label=label or f"{f.label}*{g.label}",
        dim=f.dim,
    )


def linear_combination(
    coefficients: Sequence[float], symbols: Sequence[Symbol], label: str = ""
) -> CylindricalSymbol:
    """x -> sum c_i f_i(x)."""
    if len(coefficients) != len(symbols) or not symbols:
        raise InvalidArgumentError("one coefficient per symbol is required")
    parts = [_cylindrical(s) for s in symbols]
    dim = parts[0].dim
    if any(p.dim != dim for p in parts):
        raise InvalidArgumentError("symbols live in different dimensions")
    bounds = [p.claim.norm_bound for p in parts]
    sup = None
    if all(b is not None for b in bounds):
        sup = float(sum(abs(c) * b for c, b in zip(coefficients, bounds)))
    return CylindricalSymbol(
        LinearCombinationProfile(list(coefficients), [p.profile for p in parts]),
        np.vstack([p.directions for p in parts]),
        claim=SymbolClaim(sup_bound=sup),
        label=label or "+".join(p.label for p in parts),
        dim=dim,
    )
