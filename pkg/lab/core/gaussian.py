"""Gaussian measure calculus: moments, Wick sums, sampling and translation."""

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from typing import TYPE_CHECKING, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from config.settings import settings
from lab.core.constants import k_constant
from lab.core.quadrature import expect_standard_normal
from lab.exceptions import InvalidArgumentError, NumericalOverflowError
from lab.models.gaussian import GaussianMeasureSpec, Pairing, SampleBatch
from lab.models.hilbert import FloatArray, as_hvector
from lab.models.reports import ExperimentReport, ReportRow

if TYPE_CHECKING:
    from lab.symbols.base import Symbol

MAX_WICK_ORDER = 16
Scalar = Union[float, complex]

__all__ = [
    "k_constant",
    "abs_moment",
    "exp_moment",
    "mixed_moment_rhs",
    "enumerate_pairings",
    "wick_integral",
    "central_moment_even",
    "gaussian_sample",
    "spawn_rng",
    "translation_identity_residual",
    "holder_telescoping_check",
    "mc_mean",
    "lq_estimate",
]


def abs_moment(norm_a: float, p: float, h: float) -> float:
    """E|l_a|^p = (2h)^{p/2} pi^{-1/2} Gamma((p+1)/2) |a|^p under mu_h."""
    if norm_a < 0 or not p >= 1 or not h > 0:
        raise InvalidArgumentError(f"abs_moment needs norm_a >= 0, p >= 1, h > 0; got {norm_a}, {p}, {h}")
    if norm_a == 0:
        return 0.0
    log_value = (p / 2.0) * math.log(2.0 * h) - 0.5 * math.log(math.pi)
    log_value += math.lgamma((p + 1.0) / 2.0) + p * math.log(norm_a)
    return math.exp(log_value)


def exp_moment(u: Sequence[float], v: Sequence[float], h: float) -> complex:
    """Integral of e^{l_u + i l_v} under mu_h, i.e. e^{h a^2 / 2} with a = u + iv."""
    if not h > 0:
        raise InvalidArgumentError("variance h must be positive")
    uu = as_hvector(u)
    vv = as_hvector(v, uu.shape[0])
    a_sq = complex(float(uu @ uu) - float(vv @ vv), 2.0 * float(uu @ vv))
    return cmath.exp(0.5 * h * a_sq)


def mixed_moment_rhs(norm_a: float, dot_ab: float, norm_b: float, p: float, h: float) -> float:
    """e^{h|b|^2/2} E|sqrt(h)|a| v + h<a,b>|^p for v ~ N(0, 1)."""
    if norm_a < 0 or norm_b < 0 or not p >= 1 or not h > 0:
        raise InvalidArgumentError("mixed_moment_rhs arguments out of range")
    if abs(dot_ab) > norm_a * norm_b * (1.0 + 1e-12) + 1e-15:
        raise InvalidArgumentError("|<a,b>| exceeds |a||b| (Cauchy-Schwarz)")
    prefactor = math.exp(0.5 * h * norm_b ** 2)
    shift = h * dot_ab
    if norm_a == 0:
        return prefactor * abs(shift) ** p
    scale = math.sqrt(h) * norm_a
    if float(p).is_integer() and int(p) % 2 == 0:
        value, _ = expect_standard_normal(lambda v: (scale * v + shift) ** int(p))
    else:
        value, _ = expect_standard_normal(lambda v: np.abs(scale * v + shift) ** p, kink=-shift / scale)
    return prefactor * value


def _pair_partitions(items: List[int]) -> Iterator[List[Tuple[int, int]]]:
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for i, partner in enumerate(rest):
        for tail in _pair_partitions(rest[:i] + rest[i + 1:]):
            yield [(first, partner)] + tail


def _check_even(two_p: int) -> None:
    if not isinstance(two_p, (int, np.integer)) or two_p % 2 or not 2 <= two_p <= MAX_WICK_ORDER:
        raise InvalidArgumentError(f"expected an even integer in 2..{MAX_WICK_ORDER}, got {two_p}")


def enumerate_pairings(two_p: int) -> List[Pairing]:
    """All pair partitions of {1..2p}, smallest free index paired first."""
    _check_even(two_p)
    return [Pairing(pairs=pairs) for pairs in _pair_partitions(list(range(1, int(two_p) + 1)))]


def wick_integral(vectors: Sequence[Sequence[float]], h: float, allow_odd: bool = False) -> float:
    """h^p sum over pairings of prod <u_phi(j), u_psi(j)>."""
    if not h > 0:
        raise InvalidArgumentError("variance h must be positive")
    count = len(vectors)
    if count % 2:
        if allow_odd:
            return 0.0
        raise InvalidArgumentError("Wick integral needs an even number of vectors")
    if count == 0:
        return 1.0
    _check_even(count)
    dim = len(vectors[0])
    mat = np.stack([as_hvector(v, dim) for v in vectors])
    gram = mat @ mat.T
    total = 0.0
    for pairs in _pair_partitions(list(range(count))):
        term = 1.0
        for i, j in pairs:
            term *= gram[i, j]
        total += term
    return h ** (count // 2) * total


def central_moment_even(p: int) -> float:
    """Integral of y^{2p} against N(0, 1): pi^{-1/2} 2^p Gamma(p + 1/2)."""
    if p < 0:
        raise InvalidArgumentError("moment index must be nonnegative")
    return math.exp(p * math.log(2.0) + math.lgamma(p + 0.5) - 0.5 * math.log(math.pi))


def spawn_rng(seed: int, *key: int) -> np.random.Generator:
    """PCG64 generator for an auxiliary stream keyed by (seed, key)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))


def _draw_shard(spec: GaussianMeasureSpec, seed: int, stream: int, shard: int, rows: int) -> FloatArray:
    rng = spawn_rng(seed, stream, shard)
    return math.sqrt(spec.variance) * rng.standard_normal((rows, spec.dim))


def gaussian_sample(
    spec: GaussianMeasureSpec,
    seed: int,
    count: int,
    stream: int = 0,
    shard_size: Optional[int] = None,
    threads: Optional[int] = None,
) -> SampleBatch:
    """Draw N(0, h I) samples.

    Rows are produced in shards of `shard_size`. Shard s of stream k uses
    PCG64 seeded by SeedSequence(entropy=seed, spawn_key=(k, s)); shards are
    concatenated in shard order, so the batch does not depend on `threads`.
    """
    if count < 1:
        raise InvalidArgumentError("sample count must be at least 1")
    if seed < 0 or stream < 0:
        raise InvalidArgumentError("seed and stream must be nonnegative")
    shard_size = shard_size or settings.mc_shard_size
    threads = threads or settings.threads
    sizes = [min(shard_size, count - start) for start in range(0, count, shard_size)]
    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            shards = list(pool.map(lambda item: _draw_shard(spec, seed, stream, *item), enumerate(sizes)))
    else:
        shards = [_draw_shard(spec, seed, stream, s, rows) for s, rows in enumerate(sizes)]
    return SampleBatch(spec=spec, seed=seed, stream=stream, count=count, samples=np.concatenate(shards))


def mc_mean(values: np.ndarray) -> Tuple[Scalar, float]:
    """Sample mean and standard error (sample std / sqrt(n)); complex values use the modulus."""
    arr = np.asarray(values)
    if not np.all(np.isfinite(arr)):
        raise NumericalOverflowError("non-finite Monte Carlo values")
    n = arr.shape[0]
    mean = arr.mean()
    if n < 2:
        return mean, float("inf")
    if np.iscomplexobj(arr):
        var = np.var(arr.real, ddof=1) + np.var(arr.imag, ddof=1)
    else:
        var = np.var(arr, ddof=1)
    mean = complex(mean) if np.iscomplexobj(arr) else float(mean)
    return mean, float(math.sqrt(var / n))


def lq_estimate(differences: np.ndarray, q: float) -> Tuple[float, float]:
    """(mean |d|^q)^{1/q} with its delete-one jackknife standard error."""
    if not q >= 1:
        raise InvalidArgumentError("q must be at least 1")
    powers = np.abs(np.asarray(differences)) ** q
    if not np.all(np.isfinite(powers)):
        raise NumericalOverflowError("non-finite values in L^q estimate")
    n = powers.shape[0]
    total = float(powers.sum())
    estimate = (total / n) ** (1.0 / q)
    if n < 2:
        return estimate, float("inf")
    leave_one_out = np.maximum((total - powers) / (n - 1), 0.0) ** (1.0 / q)
    spread = leave_one_out - leave_one_out.mean()
    stderr = math.sqrt((n - 1) / n * float(spread @ spread))
    return estimate, stderr


def translation_identity_residual(
    g: "Symbol", a: Sequence[float], h: float, batch: SampleBatch
) -> Tuple[float, float]:
    """|E g - e^{-|a|^2/(2h)} E[g(x+a) e^{-<a,x>/h}]| and the paired-difference standard error."""
    if not math.isclose(batch.spec.variance, h, rel_tol=1e-12):
        raise InvalidArgumentError("batch variance differs from h")
    shift = as_hvector(a, batch.spec.dim)
    x = batch.samples
    lhs = np.asarray(g.evaluate(x))
    weight = math.exp(-float(shift @ shift) / (2.0 * h)) * np.exp(-(x @ shift) / h)
    rhs = np.asarray(g.evaluate(x + shift)) * weight
    if not (np.all(np.isfinite(lhs)) and np.all(np.isfinite(rhs))):
        raise NumericalOverflowError("non-finite integrand in translation identity")
    mean, stderr = mc_mean(lhs - rhs)
    return float(abs(mean)), stderr


def holder_telescoping_check(
    f_list: Sequence[Sequence[float]],
    g_list: Sequence[Sequence[float]],
    p: float,
    weights: Sequence[float],
    slack: float = 1e-12,
) -> ExperimentReport:
    """Compare ||prod f - prod g||_p with the telescoped Hoelder bound on a discrete space."""
    f = np.asarray(f_list, dtype=float)
    g = np.asarray(g_list, dtype=float)
    w = np.asarray(weights, dtype=float)
    if f.ndim != 2 or f.shape != g.shape or f.shape[1] != w.shape[0]:
        raise InvalidArgumentError("f_list, g_list and weights must share one sample length")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise InvalidArgumentError("weights must be a probability vector")
    if not p >= 1:
        raise InvalidArgumentError("p must be at least 1")

    def norm(values: np.ndarray, r: float) -> float:
        return float(w @ np.abs(values) ** r) ** (1.0 / r)

    n_factors = f.shape[0]
    lhs = norm(np.prod(f, axis=0) - np.prod(g, axis=0), p)
    r = p * n_factors
    f_norms = [norm(row, r) for row in f]
    g_norms = [norm(row, r) for row in g]
    d_norms = [norm(f[k] - g[k], r) for k in range(n_factors)]
    precise = sum(
        math.prod(f_norms[:k]) * math.prod(g_norms[k + 1:]) * d_norms[k] for k in range(n_factors)
    )
    largest = max(f_norms + g_norms)
    coarse = largest ** (n_factors - 1) * sum(d_norms)
    params = {"p": float(p), "factors": float(n_factors)}
    return ExperimentReport(
        check_id="holder_telescoping",
        operation="holder_telescoping_check",
        rows=[
            ReportRow.compare("precise", lhs, precise, tolerance=slack, params=params),
            ReportRow.compare("coarse", lhs, coarse, tolerance=slack, params=params),
        ],
        metadata={"lhs": lhs, "slack_precise": precise - lhs, "slack_coarse": coarse - lhs},
    )
