"""Build symbols and operators from experiment config specs."""

from typing import Dict, Optional, Sequence

import numpy as np
import structlog

from lab.exceptions import ConfigInvalidError
from lab.models.experiment import (
    DirectionKind,
    DirectionSpec,
    EpsilonDecay,
    OperatorKind,
    OperatorSpec,
    SymbolFamily,
    SymbolSpec,
)
from lab.models.hilbert import EpsilonSequence, FloatArray, TraceClassOperator
from lab.symbols.base import Symbol
from lab.symbols.stock import (
    constant_symbol,
    exp_i_symbol,
    gaussian_bell_symbol,
    linear_combination,
    linear_symbol,
    poly_scalar_symbol,
    product_symbol,
    trig_symbol,
)

logger = structlog.get_logger(__name__)


def build_epsilon(dim: int, decay: EpsilonDecay = EpsilonDecay.GEOMETRIC, ratio: float = 0.5) -> EpsilonSequence:
    """Frame weights: ratio^j, or 1/(j+1)^2 for a slowly decaying sequence."""
    if decay == EpsilonDecay.INVERSE_SQUARE:
        return EpsilonSequence.of(1.0 / (np.arange(dim) + 1.0) ** 2)
    return EpsilonSequence.geometric(dim, ratio)


def build_direction(spec: DirectionSpec, dim: int) -> FloatArray:
    if spec.kind == DirectionKind.EXPLICIT:
        vec = np.asarray(spec.coords, dtype=float)
        if vec.shape != (dim,):
            raise ConfigInvalidError(f"direction has {vec.shape[0]} coordinates, expected {dim}", field="coords")
        return spec.scale * vec
    if spec.kind == DirectionKind.BASIS:
        if spec.index >= dim:
            raise ConfigInvalidError(f"basis index {spec.index} outside dim {dim}", field="index")
        vec = np.zeros(dim)
        vec[spec.index] = spec.scale
        return vec
    if spec.kind == DirectionKind.GEOMETRIC:
        return spec.scale * spec.ratio ** np.arange(dim, dtype=float)
    rng = np.random.default_rng(spec.seed)
    vec = rng.standard_normal(dim)
    return spec.scale * vec / np.linalg.norm(vec)


def build_operator(spec: OperatorSpec, dim: int) -> TraceClassOperator:
    if spec.kind == OperatorKind.RANK_ONE:
        return TraceClassOperator.rank_one(build_direction(spec.direction, dim))
    if spec.kind == OperatorKind.DIAGONAL:
        if len(spec.values) != dim:
            raise ConfigInvalidError(f"diagonal operator has {len(spec.values)} values, expected {dim}", field="values")
        return TraceClassOperator.diagonal(spec.values)
    if spec.kind == OperatorKind.GEOMETRIC:
        values = spec.scale * spec.ratio ** np.arange(dim, dtype=float)
        if spec.rank is not None:
            values[spec.rank:] = 0.0
        return TraceClassOperator.diagonal(values)
    return TraceClassOperator.zero(dim)


def build_symbol(spec: SymbolSpec, dim: int, eps: Optional[EpsilonSequence] = None) -> Symbol:
    """Instantiate a stock symbol with its claims."""
    family = spec.family
    if family == SymbolFamily.CONSTANT:
        return constant_symbol(spec.value, dim, eps=eps, depth=spec.depth, label=spec.id)
    if family == SymbolFamily.LINEAR:
        return linear_symbol(build_direction(spec.directions[0], dim), label=spec.id)
    if family == SymbolFamily.TRIG:
        return trig_symbol(
            build_direction(spec.directions[0], dim),
            phase=spec.phase,
            eps=eps,
            depth=spec.depth,
            amplitude=spec.amplitude,
            label=spec.id,
        )
    if family == SymbolFamily.EXP_I:
        return exp_i_symbol(build_direction(spec.directions[0], dim), eps=eps, depth=spec.depth, label=spec.id)
    if family == SymbolFamily.GAUSSIAN_BELL:
        return gaussian_bell_symbol(build_operator(spec.operator, dim), label=spec.id)
    if family == SymbolFamily.POLY_SCALAR:
        return poly_scalar_symbol(
            [build_direction(d, dim) for d in spec.directions], spec.exponents, label=spec.id
        )
    operands = [build_symbol(f, dim, eps) for f in spec.factors]
    if family == SymbolFamily.PRODUCT:
        return product_symbol(operands[0], operands[1], label=spec.id)
    return linear_combination(spec.coefficients, operands, label=spec.id)


def build_symbols(
    specs: Sequence[SymbolSpec], dim: int, eps: Optional[EpsilonSequence] = None
) -> Dict[str, Symbol]:
    """Symbols keyed by id, in config order."""
    symbols = {spec.id: build_symbol(spec, dim, eps) for spec in specs}
    logger.debug("Symbols built", count=len(symbols), dim=dim)
    return symbols
