"""Profiles g: R^k -> R or C with exact partial derivatives.

A cylindrical symbol is F(x) = g(<a_1,x>, ..., <a_k,x>). Every profile
knows its partial derivatives in closed form; H_t-stable profiles also know
their Gaussian smoothing E g(z + w), w ~ N(0, cov), as another profile
composed with a linear map.
"""

import itertools
import math
from abc import ABC, abstractmethod
from collections import Counter
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import hermite_e

from lab.core.gaussian import wick_integral
from lab.core.quadrature import tensor_grid
from lab.exceptions import InvalidArgumentError, ResourceLimitError, UnsupportedOrderError
from lab.models.hilbert import FloatArray

MultiIndex = Tuple[int, ...]
Smoothing = Tuple["Profile", FloatArray]

MAX_DIRECTIONAL_TUPLES = 200_000
BLOCK_TOLERANCE = 1e-14


def _rows(z: np.ndarray, arity: int) -> FloatArray:
    arr = np.asarray(z, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if arity else arr.reshape(-1, 0)
    if arr.shape[1] != arity:
        raise InvalidArgumentError(f"profile expects {arity} arguments, got {arr.shape[1]}")
    return arr


def _falling(n: int, k: int) -> int:
    return math.perm(n, k) if k <= n else 0


class Profile(ABC):
    """Smooth function of k real arguments."""

    arity: int = 0
    is_complex: bool = False
    max_order: Optional[int] = None

    @abstractmethod
    def partial(self, z: np.ndarray, beta: MultiIndex) -> np.ndarray:
        """d^beta g at each row of z."""

    def value(self, z: np.ndarray) -> np.ndarray:
        return self.partial(z, (0,) * self.arity)

    def directional(self, z: np.ndarray, ws: Sequence[np.ndarray]) -> np.ndarray:
        """d^m g(z)(w_1, ..., w_m); each w is (k,) or one row per z."""
        z = _rows(z, self.arity)
        m = len(ws)
        if self.max_order is not None and m > self.max_order:
            raise UnsupportedOrderError(f"order {m} exceeds available order {self.max_order}")
        if m == 0:
            return self.value(z)
        k = self.arity
        dtype = complex if self.is_complex else float
        total = np.zeros(z.shape[0], dtype=dtype)
        if k == 0:
            return total
        if k ** m > MAX_DIRECTIONAL_TUPLES:
            raise UnsupportedOrderError(f"directional derivative of order {m} in {k} slots is too large")
        slots = [np.broadcast_to(np.asarray(w, dtype=float), (z.shape[0], k)) for w in ws]
        cache: Dict[MultiIndex, np.ndarray] = {}
        for combo in itertools.product(range(k), repeat=m):
            counts = Counter(combo)
            beta = tuple(counts.get(r, 0) for r in range(k))
            coeff = np.ones(z.shape[0])
            for s, r in enumerate(combo):
                coeff = coeff * slots[s][:, r]
            if not np.any(coeff):
                continue
            if beta not in cache:
                cache[beta] = self.partial(z, beta)
            total = total + coeff * cache[beta]
        return total

    def smoothed(self, cov: FloatArray) -> Optional[Smoothing]:
        """Closed-form E g(z + w), w ~ N(0, cov), as (profile, M) with value profile(M z)."""
        return None

    def _check_beta(self, beta: MultiIndex) -> None:
        if len(beta) != self.arity or any(b < 0 for b in beta):
            raise InvalidArgumentError(f"invalid multi-index {beta} for arity {self.arity}")
        if self.max_order is not None and sum(beta) > self.max_order:
            raise UnsupportedOrderError(f"order {sum(beta)} exceeds available order {self.max_order}")


class ConstantProfile(Profile):
    """g = c with no arguments."""

    arity = 0

    def __init__(self, constant: complex):
        self.constant = complex(constant) if isinstance(constant, complex) else float(constant)
        self.is_complex = isinstance(self.constant, complex)

    def partial(self, z, beta):
        self._check_beta(beta)
        z = _rows(z, 0)
        dtype = complex if self.is_complex else float
        return np.full(z.shape[0], self.constant, dtype=dtype)

    def smoothed(self, cov):
        return self, np.zeros((0, 0))


class CosineProfile(Profile):
    """g(s) = A cos(s + theta)."""

    arity = 1

    def __init__(self, amplitude: float = 1.0, phase: float = 0.0):
        self.amplitude = float(amplitude)
        self.phase = float(phase)

    def partial(self, z, beta):
        self._check_beta(beta)
        s = _rows(z, 1)[:, 0] + self.phase
        order = beta[0] % 4
        if order == 0:
            values = np.cos(s)
        elif order == 1:
            values = -np.sin(s)
        elif order == 2:
            values = -np.cos(s)
        else:
            values = np.sin(s)
        return self.amplitude * values

    def smoothed(self, cov):
        damping = math.exp(-0.5 * float(np.asarray(cov).reshape(1, 1)[0, 0]))
        return CosineProfile(self.amplitude * damping, self.phase), np.eye(1)


class ExpIProfile(Profile):
    """g(s) = A e^{i s}."""

    arity = 1
    is_complex = True

    def __init__(self, amplitude: float = 1.0):
        self.amplitude = float(amplitude)

    def partial(self, z, beta):
        self._check_beta(beta)
        s = _rows(z, 1)[:, 0]
        return self.amplitude * (1j ** beta[0]) * np.exp(1j * s)

    def smoothed(self, cov):
        damping = math.exp(-0.5 * float(np.asarray(cov).reshape(1, 1)[0, 0]))
        return ExpIProfile(self.amplitude * damping), np.eye(1)


class PolynomialProfile(Profile):
    """g(z) = sum_gamma c_gamma z^gamma."""

    def __init__(self, terms: Dict[MultiIndex, float]):
        if not terms:
            raise InvalidArgumentError("polynomial profile needs at least one term")
        arities = {len(gamma) for gamma in terms}
        if len(arities) != 1:
            raise InvalidArgumentError("polynomial exponents must share one arity")
        self.arity = arities.pop()
        self.terms = {tuple(int(e) for e in gamma): float(c) for gamma, c in terms.items() if c != 0.0}
        if any(e < 0 for gamma in self.terms for e in gamma):
            raise InvalidArgumentError("polynomial exponents must be nonnegative")

    @classmethod
    def monomial(cls, exponents: Sequence[int], coefficient: float = 1.0) -> "PolynomialProfile":
        return cls({tuple(exponents): coefficient})

    @property
    def degree(self) -> int:
        return max((sum(gamma) for gamma in self.terms), default=0)

    def partial(self, z, beta):
        self._check_beta(beta)
        z = _rows(z, self.arity)
        out = np.zeros(z.shape[0])
        for gamma, coeff in self.terms.items():
            factor = coeff
            for g_i, b_i in zip(gamma, beta):
                factor *= _falling(g_i, b_i)
            if factor == 0:
                continue
            exps = np.array(gamma) - np.array(beta)
            out = out + factor * np.prod(z ** exps, axis=1)
        return out

    def smoothed(self, cov):
        cov = np.asarray(cov, dtype=float)
        if self.degree > 16:
            return None
        lam, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
        factor = vecs * np.sqrt(np.clip(lam, 0.0, None))
        new_terms: Dict[MultiIndex, float] = {}
        for gamma, coeff in self.terms.items():
            for delta in itertools.product(*(range(g + 1) for g in gamma)):
                vectors = [factor[i] for i, d in enumerate(delta) for _ in range(d)]
                moment = wick_integral(vectors, 1.0, allow_odd=True) if vectors else 1.0
                if moment == 0.0:
                    continue
                weight = coeff * moment
                for g_i, d_i in zip(gamma, delta):
                    weight *= math.comb(g_i, d_i)
                rest = tuple(g - d for g, d in zip(gamma, delta))
                new_terms[rest] = new_terms.get(rest, 0.0) + weight
        return PolynomialProfile(new_terms or {(0,) * self.arity: 0.0}), np.eye(self.arity)


class GaussianBellProfile(Profile):
    """g(z) = A exp(-|z|^2 / 2)."""

    def __init__(self, arity: int, amplitude: float = 1.0):
        self.arity = int(arity)
        self.amplitude = float(amplitude)

    def partial(self, z, beta):
        self._check_beta(beta)
        z = _rows(z, self.arity)
        out = self.amplitude * np.exp(-0.5 * np.sum(z * z, axis=1))
        for i, b in enumerate(beta):
            if b:
                out = out * ((-1) ** b) * hermite_e.hermeval(z[:, i], [0.0] * b + [1.0])
        return out

    def smoothed(self, cov):
        cov = 0.5 * (np.asarray(cov, dtype=float) + np.asarray(cov, dtype=float).T)
        k = self.arity
        widened = np.eye(k) + cov
        sign, logdet = np.linalg.slogdet(widened)
        if sign <= 0:
            return None
        lam, vecs = np.linalg.eigh(np.linalg.inv(widened))
        transform = np.sqrt(np.clip(lam, 0.0, None))[:, None] * vecs.T
        return GaussianBellProfile(k, self.amplitude * math.exp(-0.5 * logdet)), transform


def _split(beta: MultiIndex, sizes: Sequence[int]) -> List[MultiIndex]:
    parts, start = [], 0
    for size in sizes:
        parts.append(tuple(beta[start:start + size]))
        start += size
    return parts


def _block_diagonal(blocks: Sequence[FloatArray]) -> FloatArray:
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols))
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def _diagonal_blocks(cov: FloatArray, sizes: Sequence[int]) -> Optional[List[FloatArray]]:
    cov = np.asarray(cov, dtype=float)
    scale = max(float(np.max(np.abs(cov), initial=0.0)), 1.0)
    blocks, start = [], 0
    mask = np.ones_like(cov, dtype=bool)
    for size in sizes:
        blocks.append(cov[start:start + size, start:start + size])
        mask[start:start + size, start:start + size] = False
        start += size
    if np.any(np.abs(cov[mask]) > BLOCK_TOLERANCE * scale):
        return None
    return blocks


def _min_order(orders: Sequence[Optional[int]]) -> Optional[int]:
    finite = [o for o in orders if o is not None]
    return min(finite) if finite else None


class ProductProfile(Profile):
    """g(z_1, ..., z_n) = prod g_i(z_i) over disjoint argument blocks."""

    def __init__(self, factors: Sequence[Profile]):
        if not factors:
            raise InvalidArgumentError("product profile needs at least one factor")
        self.factors = list(factors)
        self.sizes = [f.arity for f in self.factors]
        self.arity = sum(self.sizes)
        self.is_complex = any(f.is_complex for f in self.factors)
        self.max_order = _min_order([f.max_order for f in self.factors])

    def partial(self, z, beta):
        self._check_beta(beta)
        z = _rows(z, self.arity)
        out = None
        start = 0
        for factor, part in zip(self.factors, _split(beta, self.sizes)):
            values = factor.partial(z[:, start:start + factor.arity], part)
            out = values if out is None else out * values
            start += factor.arity
        return out

    def smoothed(self, cov):
        blocks = _diagonal_blocks(cov, self.sizes)
        if blocks is None:
            return None
        results = [f.smoothed(b) for f, b in zip(self.factors, blocks)]
        if any(r is None for r in results):
            return None
        profiles = [r[0] for r in results]
        return ProductProfile(profiles), _block_diagonal([r[1] for r in results])


class LinearCombinationProfile(Profile):
    """g(z_1, ..., z_n) = sum c_i g_i(z_i) over disjoint argument blocks."""

    def __init__(self, coefficients: Sequence[complex], terms: Sequence[Profile]):
        if len(coefficients) != len(terms) or not terms:
            raise InvalidArgumentError("linear combination needs one coefficient per term")
        self.coefficients = list(coefficients)
        self.terms = list(terms)
        self.sizes = [t.arity for t in self.terms]
        self.arity = sum(self.sizes)
        self.is_complex = any(t.is_complex for t in self.terms) or any(
            isinstance(c, complex) for c in self.coefficients
        )
        self.max_order = _min_order([t.max_order for t in self.terms])

    def partial(self, z, beta):
        self._check_beta(beta)
        z = _rows(z, self.arity)
        dtype = complex if self.is_complex else float
        out = np.zeros(z.shape[0], dtype=dtype)
        start = 0
        parts = _split(beta, self.sizes)
        for i, (coeff, term) in enumerate(zip(self.coefficients, self.terms)):
            others = any(any(p) for j, p in enumerate(parts) if j != i)
            if not others:
                out = out + coeff * term.partial(z[:, start:start + term.arity], parts[i])
            start += term.arity
        return out

    def smoothed(self, cov):
        # each term only sees the marginal covariance of its own block
        cov = np.asarray(cov, dtype=float)
        blocks, start = [], 0
        for size in self.sizes:
            blocks.append(cov[start:start + size, start:start + size])
            start += size
        results = [t.smoothed(b) for t, b in zip(self.terms, blocks)]
        if any(r is None for r in results):
            return None
        return (
            LinearCombinationProfile(self.coefficients, [r[0] for r in results]),
            _block_diagonal([r[1] for r in results]),
        )


class DirectionalProfile(Profile):
    """z -> sum_r w_r d_r g(z) for a fixed w."""

    def __init__(self, base: Profile, direction: Sequence[float]):
        self.base = base
        self.direction = np.asarray(direction, dtype=float).reshape(base.arity)
        self.arity = base.arity
        self.is_complex = base.is_complex
        self.max_order = None if base.max_order is None else base.max_order - 1
        if self.max_order is not None and self.max_order < 0:
            raise UnsupportedOrderError("profile has no first derivative")

    def partial(self, z, beta):
        self._check_beta(beta)
        z = _rows(z, self.arity)
        dtype = complex if self.is_complex else float
        out = np.zeros(z.shape[0], dtype=dtype)
        for r, w_r in enumerate(self.direction):
            if w_r == 0.0:
                continue
            shifted = tuple(b + (1 if i == r else 0) for i, b in enumerate(beta))
            out = out + w_r * self.base.partial(z, shifted)
        return out

    def smoothed(self, cov):
        result = self.base.smoothed(cov)
        if result is None:
            return None
        profile, transform = result
        return DirectionalProfile(profile, transform @ self.direction), transform


class LaplacianProfile(Profile):
    """z -> sum_{r,s} G_rs d_r d_s g(z), the Laplacian pulled back through the Gram matrix."""

    def __init__(self, base: Profile, gram: FloatArray):
        self.base = base
        self.gram = np.asarray(gram, dtype=float).reshape(base.arity, base.arity)
        self.arity = base.arity
        self.is_complex = base.is_complex
        self.max_order = None if base.max_order is None else base.max_order - 2
        if self.max_order is not None and self.max_order < 0:
            raise UnsupportedOrderError("profile has no second derivative")

    def partial(self, z, beta):
        self._check_beta(beta)
        z = _rows(z, self.arity)
        dtype = complex if self.is_complex else float
        out = np.zeros(z.shape[0], dtype=dtype)
        for r in range(self.arity):
            for s in range(r, self.arity):
                weight = self.gram[r, s] if r == s else 2.0 * self.gram[r, s]
                if weight == 0.0:
                    continue
                shifted = list(beta)
                shifted[r] += 1
                shifted[s] += 1
                out = out + weight * self.base.partial(z, tuple(shifted))
        return out

    def smoothed(self, cov):
        result = self.base.smoothed(cov)
        if result is None:
            return None
        profile, transform = result
        return LaplacianProfile(profile, transform @ self.gram @ transform.T), transform


class HeatedProfile(Profile):
    """z -> E g(z + L xi), xi ~ N(0, I_r), by tensor Gauss-Hermite quadrature."""

    def __init__(self, base: Profile, factor: FloatArray, order: int, budget: int = 10_000_000):
        self.base = base
        self.factor = np.asarray(factor, dtype=float).reshape(base.arity, -1)
        self.arity = base.arity
        self.is_complex = base.is_complex
        self.max_order = base.max_order
        self.budget = budget
        nodes, self.weights = tensor_grid(self.factor.shape[1], order, budget)
        self.shifts = nodes @ self.factor.T
        self.grid_size = int(self.weights.shape[0])

    def partial(self, z, beta):
        self._check_beta(beta)
        z = _rows(z, self.arity)
        chunk = max(1, self.budget // self.grid_size)
        pieces = []
        for start in range(0, z.shape[0], chunk):
            block = z[start:start + chunk]
            points = (block[:, None, :] + self.shifts[None, :, :]).reshape(-1, self.arity)
            values = self.base.partial(points, beta).reshape(block.shape[0], self.grid_size)
            pieces.append(values @ self.weights)
        if not pieces:
            return np.zeros(0, dtype=complex if self.is_complex else float)
        return np.concatenate(pieces)

    def nested_grid_size(self) -> int:
        """Quadrature nodes touched per evaluation, including nested heated bases."""
        inner = self.base.nested_grid_size() if isinstance(self.base, HeatedProfile) else 1
        size = self.grid_size * inner
        if size > self.budget:
            raise ResourceLimitError(f"nested quadrature of {size} nodes exceeds budget {self.budget}")
        return size
