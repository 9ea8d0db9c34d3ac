"""Gauss-Hermite rules and adaptive one-dimensional Gaussian expectations."""

from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
import structlog
from scipy import integrate
from scipy.special import roots_hermitenorm

from config.settings import settings
from lab.exceptions import InvalidArgumentError, NumericalOverflowError, ResourceLimitError
from lab.models.hilbert import FloatArray

logger = structlog.get_logger(__name__)

MIN_ORDER = 8
MAX_ORDER = settings.quad_max_order
SQRT_2PI = float(np.sqrt(2.0 * np.pi))


@lru_cache(maxsize=64)
def _rule(order: int) -> Tuple[FloatArray, FloatArray]:
    nodes, weights = roots_hermitenorm(order)
    weights = weights / SQRT_2PI
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_hermite_rule(order: int) -> Tuple[FloatArray, FloatArray]:
    """Probabilists' nodes and weights normalized so that sum(w) = 1 against N(0, 1)."""
    if not 1 <= order <= MAX_ORDER:
        raise InvalidArgumentError(f"quadrature order {order} outside 1..{MAX_ORDER}")
    return _rule(order)


def tensor_grid(k: int, order: int, budget: int = 10_000_000) -> Tuple[FloatArray, FloatArray]:
    """Tensor-product rule for N(0, I_k): nodes of shape (order^k, k) and weights."""
    if k < 0:
        raise InvalidArgumentError("grid dimension must be nonnegative")
    if k == 0:
        return np.zeros((1, 0)), np.ones(1)
    size = order ** k
    if size > budget:
        raise ResourceLimitError(f"tensor grid of {size} nodes exceeds budget {budget}")
    nodes, weights = gauss_hermite_rule(order)
    mesh = np.stack(np.meshgrid(*([nodes] * k), indexing="ij"), axis=-1).reshape(-1, k)
    wmesh = np.ones(1)
    for _ in range(k):
        wmesh = np.multiply.outer(wmesh, weights).reshape(-1)
    return mesh, wmesh


def expect_standard_normal(
    func: Callable[[FloatArray], FloatArray],
    kink: Optional[float] = None,
    rtol: float = 1e-12,
    max_order: int = MAX_ORDER,
) -> Tuple[float, float]:
    """E[func(v)] for v ~ N(0, 1) with an error estimate.

    Smooth integrands use Gauss-Hermite order doubling until successive
    estimates agree to `rtol`. Integrands with a derivative jump at `kink`
    are split there and each half-line is integrated adaptively.
    """
    if kink is not None:
        return _split_expectation(func, float(kink), rtol)

    order = MIN_ORDER
    previous = None
    estimate, error = 0.0, float("inf")
    while order <= max_order:
        nodes, weights = gauss_hermite_rule(order)
        values = np.asarray(func(nodes))
        if not np.all(np.isfinite(values)):
            raise NumericalOverflowError("non-finite integrand value in Gauss-Hermite rule")
        estimate = float(np.dot(weights, values))
        if previous is not None:
            error = abs(estimate - previous)
            if error <= rtol * max(abs(estimate), np.finfo(float).tiny):
                return estimate, error
        previous = estimate
        order *= 2
    logger.warning("Gauss-Hermite doubling stopped at cap", order=max_order, error=error)
    return estimate, error


def _split_expectation(func: Callable, kink: float, rtol: float) -> Tuple[float, float]:
    def density_weighted(v: float) -> float:
        return float(func(np.asarray(v))) * np.exp(-0.5 * v * v) / SQRT_2PI

    left, left_err = integrate.quad(density_weighted, -np.inf, kink, epsabs=0.0, epsrel=rtol, limit=200)
    right, right_err = integrate.quad(density_weighted, kink, np.inf, epsabs=0.0, epsrel=rtol, limit=200)
    value = left + right
    if not np.isfinite(value):
        raise NumericalOverflowError("non-finite value in split Gaussian expectation")
    return float(value), float(left_err + right_err)
