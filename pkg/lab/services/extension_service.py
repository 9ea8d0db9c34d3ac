"""Stochastic-extension experiments along subspace chains."""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from numpy.polynomial.legendre import leggauss
from scipy.special import erf

from config.settings import settings
from lab.core.constants import (
    agree,
    alpha_exponent,
    c_constant,
    k_constant,
    tabulated_alpha,
    tabulated_c,
    tabulated_k,
)
from lab.core.gaussian import gaussian_sample, lq_estimate, mc_mean, wick_integral
from lab.core.geometry import complement_norm, project_rows, q_form_rows
from lab.core.quadrature import expect_standard_normal
from lab.exceptions import InvalidArgumentError, UnsupportedOrderError
from lab.models.gaussian import GaussianMeasureSpec, SampleBatch
from lab.models.hilbert import FloatArray, OrthonormalFrame, Subspace, SubspaceChain, TraceClassOperator, as_hvector
from lab.models.reports import ConvergenceReport, ExperimentReport, ReportRow
from lab.symbols.base import Symbol
from lab.symbols.stock import poly_scalar_symbol

logger = structlog.get_logger(__name__)

EXACT_TOLERANCE = 1e-12
IDENTITY_TOLERANCE = 1e-8
LEGENDRE_NODES = 32
IDENTITY_SAMPLES = 256

# sample streams under the experiment seed
SM_STREAM, CAUCHY_STREAM, QA_STREAM, MOMENT_STREAM = 1, 2, 3, 4
DERIVATIVE_STREAM, PRODSCAL_STREAM, NM_STREAM, TAYLOR_STREAM, CONTRACTION_STREAM = 5, 6, 7, 8, 9

DistanceFn = Callable[[SampleBatch], np.ndarray]


def residual_norms(E: Subspace, vectors: FloatArray) -> FloatArray:
    """|v - pi_E v| for each column of a D x r matrix."""
    vectors = np.asarray(vectors, dtype=float).reshape(E.dim, -1)
    return np.linalg.norm(vectors - E.basis @ (E.basis.T @ vectors), axis=0)


def sm_rate_bound(norm: float, q: float, h: float, E: Subspace, frame: OrthonormalFrame, eps_values: FloatArray, k_of=k_constant) -> float:
    """||F||_{1,eps} K(q) h^{1/2} sum_Gamma eps_Gamma sum_{i in Gamma} |e_i - pi_E e_i|."""
    gaps = residual_norms(E, frame.vectors())
    total = 0.0
    for group in frame.groups():
        total += max(eps_values[j] for j in group) * sum(gaps[j] for j in group)
    return norm * k_of(q) * math.sqrt(h) * total


def qa_rate_bound(norm: float, p: float, h: float, E: Subspace, operator: TraceClassOperator, tabulated: bool = False) -> float:
    """C(p) h^{1/2} ||f||_{Q_A} (sum lambda_j |pi_E u_j - u_j|^alpha(p))^{1/alpha(p)}."""
    if operator.rank == 0:
        return 0.0
    alpha = tabulated_alpha(p) if tabulated else alpha_exponent(p)
    c = tabulated_c(p, operator.trace) if tabulated else c_constant(p, operator.trace)
    gaps = residual_norms(E, operator.eigenvectors)
    return c * math.sqrt(h) * norm * float(operator.eigenvalues @ gaps ** alpha) ** (1.0 / alpha)


class ExtensionService:
    """Runs L^q extension-rate experiments with adaptive Monte Carlo batches."""

    def __init__(
        self,
        seed: int = 0,
        mc_samples: Optional[int] = None,
        max_samples: Optional[int] = None,
        sigma: Optional[float] = None,
    ):
        self.logger = logger.bind(service="extension")
        self.seed = seed
        self.mc_samples = mc_samples or settings.mc_samples
        self.max_samples = max(max_samples or settings.mc_max_samples, self.mc_samples)
        self.sigma = settings.sigma_gate if sigma is None else sigma

    def batch(self, dim: int, h: float, count: int, stream: int) -> SampleBatch:
        return gaussian_sample(GaussianMeasureSpec(dim=dim, variance=h), self.seed, count, stream=stream)

    def lq_distance(
        self,
        f: Symbol,
        E: Subspace,
        q: float,
        h: float,
        batch: SampleBatch,
        shift: Optional[Sequence[float]] = None,
    ) -> Tuple[float, float]:
        """MC estimate of ||F o pi_E - F||_{L^q(mu_h)} (optionally translated by `shift`) and its stderr."""
        if not math.isclose(batch.spec.variance, h, rel_tol=1e-12):
            raise InvalidArgumentError("batch variance differs from h")
        if E.dim != f.dim or batch.spec.dim != f.dim:
            raise InvalidArgumentError("symbol, subspace and batch dimensions differ")
        if E.rank == E.dim:
            return 0.0, 0.0
        return lq_estimate(self._projection_gap(f, E, batch.samples, shift), q)

    @staticmethod
    def _projection_gap(f: Symbol, E: Subspace, y: np.ndarray, shift: Optional[Sequence[float]] = None) -> np.ndarray:
        offset = 0.0 if shift is None else as_hvector(shift, f.dim)
        return np.asarray(f.evaluate(project_rows(E, y) + offset)) - np.asarray(f.evaluate(y + offset))

    def adaptive_lq(
        self, differences: DistanceFn, dim: int, h: float, q: float, rhs: Optional[float], stream: int
    ) -> Tuple[float, float, int]:
        """L^q estimate; the batch doubles while stderr >= 5% of the bound, up to the sample cap."""
        count = self.mc_samples
        while True:
            estimate, stderr = lq_estimate(differences(self.batch(dim, h, count, stream)), q)
            settled = rhs is None or rhs <= 0.0 or stderr < settings.stderr_target_fraction * rhs
            if settled:
                return estimate, stderr, count
            if count >= self.max_samples:
                self.logger.warning("Sample cap reached before stderr target", samples=count, stderr=stderr, rhs=rhs)
                return estimate, stderr, count
            count = min(2 * count, self.max_samples)
            self.logger.warning("Doubling Monte Carlo batch", samples=count, stderr=stderr, rhs=rhs)

    def _map_steps(self, func: Callable[[int, Subspace], List[ReportRow]], chain: SubspaceChain) -> List[ReportRow]:
        """Evaluate chain steps, in parallel when threads are configured; rows stay in chain order."""
        steps = list(enumerate(chain.steps))
        if settings.threads > 1 and len(steps) > 1:
            with ThreadPoolExecutor(max_workers=settings.threads) as pool:
                results = list(pool.map(lambda item: func(*item), steps))
        else:
            results = [func(i, E) for i, E in steps]
        return [row for rows in results for row in rows]

    def _rate_row(
        self,
        label: str,
        lhs: float,
        stderr: float,
        rhs: Optional[float],
        params: dict,
        rhs_tabulated: Optional[float] = None,
    ) -> ReportRow:
        row = ReportRow.compare(label, lhs, rhs, stderr=stderr, tolerance=EXACT_TOLERANCE, sigma=self.sigma, params=params)
        if rhs is not None and rhs_tabulated is not None and not agree(rhs, rhs_tabulated):
            self.logger.error("Inline and tabulated bounds disagree", label=label, inline=rhs, tabulated=rhs_tabulated)
            row = row.model_copy(update={"passed": False, "note": "inline and tabulated bounds disagree"})
        return row

    def _require_smeps(self, f: Symbol) -> None:
        if not f.claim.has_smeps or (f.claim.depth or 0) < 1:
            raise InvalidArgumentError(f"{f.label} carries no S_1(B, eps) claim")

    def sm_rate_check(
        self,
        f: Symbol,
        chain: SubspaceChain,
        q: float,
        h: float,
        frame: Optional[OrthonormalFrame] = None,
        stream: int = SM_STREAM,
    ) -> ConvergenceReport:
        """||F o pi_E - F||_q against ||F||_{1,eps} K(q) h^{1/2} sum eps |e - pi_E e| along the chain."""
        self._require_smeps(f)
        frame = frame or OrthonormalFrame.canonical(f.dim)
        claim = f.claim
        eps = claim.eps.values

        def step(i: int, E: Subspace) -> List[ReportRow]:
            rhs = sm_rate_bound(claim.smeps_norm, q, h, E, frame, eps)
            rhs_tab = sm_rate_bound(claim.smeps_norm, q, h, E, frame, eps, k_of=tabulated_k)
            if E.rank == E.dim:
                lhs, stderr, count = 0.0, 0.0, 0
            else:
                lhs, stderr, count = self.adaptive_lq(
                    lambda b: self._projection_gap(f, E, b.samples), f.dim, h, q, rhs, stream
                )
            self.logger.info("Chain step evaluated", check="sm_rate", step=i, lhs=lhs, rhs=rhs)
            params = {"step": float(i), "n": float(E.rank), "q": float(q), "h": float(h), "samples": float(count)}
            return [self._rate_row(f"E{i}", lhs, stderr, rhs, params, rhs_tab)]

        return ConvergenceReport(
            check_id="sm_rate",
            operation="sm_rate_check",
            rows=self._map_steps(step, chain),
            metadata={"symbol": f.label, "q": q, "h": h, "seed": self.seed, "stream": stream},
        )

    def sm_cauchy_check(
        self,
        f: Symbol,
        chain: SubspaceChain,
        q: float,
        h: float,
        frame: Optional[OrthonormalFrame] = None,
        stream: int = CAUCHY_STREAM,
    ) -> ConvergenceReport:
        """||F o pi_{E_n} - F o pi_{E_m}||_q between consecutive chain steps."""
        self._require_smeps(f)
        frame = frame or OrthonormalFrame.canonical(f.dim)
        claim = f.claim
        vectors = frame.vectors()
        rows: List[ReportRow] = []
        for i, (inner, outer) in enumerate(zip(chain.steps, chain.steps[1:]), start=1):
            gaps = [complement_norm(inner, outer, vectors[:, j]) for j in range(f.dim)]
            total = sum(max(claim.eps.values[j] for j in g) * sum(gaps[j] for j in g) for g in frame.groups())
            rhs = claim.smeps_norm * k_constant(q) * math.sqrt(h) * total
            rhs_tab = claim.smeps_norm * tabulated_k(q) * math.sqrt(h) * total

            def differences(b: SampleBatch, inner=inner, outer=outer) -> np.ndarray:
                return np.asarray(f.evaluate(project_rows(outer, b.samples))) - np.asarray(
                    f.evaluate(project_rows(inner, b.samples))
                )

            lhs, stderr, count = self.adaptive_lq(differences, f.dim, h, q, rhs, stream)
            params = {"step": float(i), "n": float(outer.rank), "q": float(q), "h": float(h), "samples": float(count)}
            rows.append(self._rate_row(f"E{i - 1}->E{i}", lhs, stderr, rhs, params, rhs_tab))
        return ConvergenceReport(
            check_id="sm_cauchy",
            operation="sm_rate_check",
            rows=rows,
            metadata={"symbol": f.label, "q": q, "h": h, "seed": self.seed, "stream": stream},
        )

    def qa_rate_check(
        self, f: Symbol, chain: SubspaceChain, p: float, h: float, stream: int = QA_STREAM
    ) -> ConvergenceReport:
        """||f o pi_E - f||_p against C(p) h^{1/2} ||f||_{Q_A} (sum lambda |pi_E u - u|^alpha)^{1/alpha}."""
        if not f.claim.has_qa:
            raise InvalidArgumentError(f"{f.label} carries no S(Q_A) claim")
        operator, norm = f.claim.qa_operator, f.claim.qa_norm

        def step(i: int, E: Subspace) -> List[ReportRow]:
            rhs = qa_rate_bound(norm, p, h, E, operator)
            rhs_tab = qa_rate_bound(norm, p, h, E, operator, tabulated=True)
            if E.rank == E.dim:
                lhs, stderr, count = 0.0, 0.0, 0
            else:
                lhs, stderr, count = self.adaptive_lq(
                    lambda b: self._projection_gap(f, E, b.samples), f.dim, h, p, rhs, stream
                )
            self.logger.info("Chain step evaluated", check="qa_rate", step=i, lhs=lhs, rhs=rhs)
            params = {"step": float(i), "n": float(E.rank), "p": float(p), "h": float(h), "samples": float(count)}
            return [self._rate_row(f"E{i}", lhs, stderr, rhs, params, rhs_tab)]

        return ConvergenceReport(
            check_id="qa_rate",
            operation="qa_rate_check",
            rows=self._map_steps(step, chain),
            metadata={"symbol": f.label, "p": p, "h": h, "trace": operator.trace, "seed": self.seed},
        )

    def qa_projection_moment_check(
        self, operator: TraceClassOperator, E: Subspace, p: float, h: float, stream: int = MOMENT_STREAM
    ) -> ExperimentReport:
        """||Q_A^{1/2} o pi_E||_p against C(p)(sum lambda |pi_E u|^alpha)^{1/alpha} h^{1/2} and the E-free bound."""
        if operator.dim != E.dim:
            raise InvalidArgumentError("operator and subspace dimensions differ")
        samples = self.batch(E.dim, h, self.mc_samples, stream).samples
        values = np.sqrt(q_form_rows(operator, project_rows(E, samples)))
        estimate, stderr = lq_estimate(values, p)
        params = {"p": float(p), "h": float(h), "rank": float(operator.rank)}
        if operator.rank == 0:
            bound = free = exact = 0.0
        else:
            alpha, c = alpha_exponent(p), c_constant(p, operator.trace)
            kept = np.linalg.norm(E.basis.T @ operator.eigenvectors, axis=0)
            bound = c * float(operator.eigenvalues @ kept ** alpha) ** (1.0 / alpha) * math.sqrt(h)
            free = c * operator.trace ** (1.0 / alpha) * math.sqrt(h)
            exact = math.sqrt(h * float(operator.eigenvalues @ kept ** 2))
        rows = [
            ReportRow.compare("bound", estimate, bound, stderr=stderr, tolerance=EXACT_TOLERANCE, sigma=self.sigma, params=params),
            ReportRow.compare("e_free_bound", estimate, free, stderr=stderr, tolerance=EXACT_TOLERANCE, sigma=self.sigma, params=params),
        ]
        if p == 2:
            rows.append(
                ReportRow.compare(
                    "exact", abs(estimate - exact), 0.0, stderr=stderr, tolerance=EXACT_TOLERANCE, sigma=self.sigma, params=params
                )
            )
        return ExperimentReport(
            check_id="qa_projection_moment",
            operation="qa_projection_moment_check",
            rows=rows,
            metadata={"subspace_rank": E.rank, "seed": self.seed, "samples": self.mc_samples},
        )

    def derivative_extension_rate(
        self,
        f: Symbol,
        x: Sequence[float],
        k: int,
        chain: SubspaceChain,
        p: float,
        h: float,
        stream: int = DERIVATIVE_STREAM,
    ) -> ConvergenceReport:
        """||d^k f(x)(pi_E y)^k - d^k f(x) y^k||_p against the k-th order S(Q_A) extension bound."""
        if k < 1:
            raise InvalidArgumentError("derivative order must be at least 1")
        if not f.claim.has_qa:
            raise InvalidArgumentError(f"{f.label} carries no S(Q_A) claim")
        if f.max_order is not None and k > f.max_order:
            raise UnsupportedOrderError(f"order {k} exceeds available order {f.max_order}")
        point = as_hvector(x, f.dim)
        operator, norm = f.claim.qa_operator, f.claim.qa_norm
        trace = operator.trace

        def form(ys: np.ndarray) -> np.ndarray:
            points = np.broadcast_to(point, ys.shape)
            return np.asarray(f.derivative_rows(points, [ys] * k))

        def bound(E: Subspace, tabulated: bool) -> float:
            if operator.rank == 0:
                return 0.0
            pk = p * k
            alpha = tabulated_alpha(pk) if tabulated else alpha_exponent(pk)
            c = tabulated_c(pk, trace) if tabulated else c_constant(pk, trace)
            gaps = residual_norms(E, operator.eigenvectors)
            tail = float(operator.eigenvalues @ gaps ** alpha) ** (1.0 / alpha)
            return k * norm * c ** k * trace ** ((k - 1) / alpha) * h ** (k / 2.0) * tail

        def step(i: int, E: Subspace) -> List[ReportRow]:
            rhs, rhs_tab = bound(E, False), bound(E, True)
            if E.rank == E.dim:
                lhs, stderr, count = 0.0, 0.0, 0
            else:
                lhs, stderr, count = self.adaptive_lq(
                    lambda b: form(project_rows(E, b.samples)) - form(b.samples), f.dim, h, p, rhs, stream
                )
            params = {"step": float(i), "n": float(E.rank), "p": float(p), "k": float(k), "h": float(h), "samples": float(count)}
            return [self._rate_row(f"E{i}", lhs, stderr, rhs, params, rhs_tab)]

        return ConvergenceReport(
            check_id=f"derivative_extension_k{k}",
            operation="derivative_extension_rate",
            rows=self._map_steps(step, chain),
            metadata={"symbol": f.label, "k": k, "p": p, "h": h, "seed": self.seed},
        )

    @staticmethod
    def prodscal_bound(a_list: FloatArray, exponents: Sequence[int], E: Subspace, p: float, h: float, k_of=k_constant) -> float:
        """K(p|alpha|)^{|alpha|} h^{|alpha|/2} (max |a_i|)^{|alpha|-1} sum alpha_i |pi_E a_i - a_i|."""
        order = int(sum(exponents))
        largest = float(np.max(np.linalg.norm(a_list, axis=1)))
        gaps = residual_norms(E, a_list.T)
        return k_of(p * order) ** order * h ** (order / 2.0) * largest ** (order - 1) * float(np.dot(exponents, gaps))

    def prodscal_rate_check(
        self,
        a_list: Sequence[Sequence[float]],
        exponents: Sequence[int],
        chain: SubspaceChain,
        p: float,
        h: float,
        stream: int = PRODSCAL_STREAM,
    ) -> ConvergenceReport:
        """||a^alpha o pi_E - prod l_{a_i}^{alpha_i}||_p along the chain."""
        if sum(exponents) < 1:
            raise InvalidArgumentError("products of scalar products need |alpha| >= 1")
        f = poly_scalar_symbol(a_list, exponents)
        vectors = np.asarray(f.directions)

        def step(i: int, E: Subspace) -> List[ReportRow]:
            rhs = self.prodscal_bound(vectors, exponents, E, p, h)
            rhs_tab = self.prodscal_bound(vectors, exponents, E, p, h, k_of=tabulated_k)
            lhs, stderr, count = (0.0, 0.0, 0) if E.rank == E.dim else self.adaptive_lq(
                lambda b: self._projection_gap(f, E, b.samples), f.dim, h, p, rhs, stream
            )
            params = {"step": float(i), "n": float(E.rank), "p": float(p), "h": float(h), "samples": float(count)}
            return [self._rate_row(f"E{i}", lhs, stderr, rhs, params, rhs_tab)]

        return ConvergenceReport(
            check_id="prodscal_rate",
            operation="prodscal_rate_check",
            rows=self._map_steps(step, chain),
            metadata={"exponents": list(exponents), "p": p, "h": h, "seed": self.seed},
        )

    def prodscal_oracle_check(
        self,
        a_list: Sequence[Sequence[float]],
        exponents: Sequence[int],
        chain: SubspaceChain,
        p: float,
        h: float,
        stream: int = PRODSCAL_STREAM,
    ) -> ExperimentReport:
        """MC distances against exact values: Wick sums at p = 2, K(p) h^{1/2}|pi_E a - a| for one linear factor."""
        f = poly_scalar_symbol(a_list, exponents)
        vectors = np.asarray(f.directions)
        order = int(sum(exponents))
        single = len(exponents) == 1 and order == 1
        if not single and (p != 2 or 2 * order > 16):
            raise InvalidArgumentError("no exact oracle for this product")
        batch = self.batch(f.dim, h, self.mc_samples, stream)
        rows = []
        for i, E in enumerate(chain.steps):
            lhs, stderr = self.lq_distance(f, E, p, h, batch)
            if single:
                exact = k_constant(p) * math.sqrt(h) * float(residual_norms(E, vectors.T)[0])
            else:
                exact = math.sqrt(max(self._wick_distance_sq(vectors, exponents, E, h), 0.0))
            params = {"step": float(i), "n": float(E.rank), "p": float(p), "h": float(h)}
            rows.append(
                ReportRow.compare(
                    f"E{i}", abs(lhs - exact), 0.0, stderr=stderr, tolerance=1e-9 * max(1.0, exact), sigma=self.sigma, params=params,
                    note="closed form" if single else "wick",
                )
            )
        return ExperimentReport(
            check_id="prodscal_oracle",
            operation="prodscal_rate_check",
            rows=rows,
            metadata={"exponents": list(exponents), "p": p, "h": h, "seed": self.seed},
        )

    @staticmethod
    def _wick_distance_sq(vectors: FloatArray, exponents: Sequence[int], E: Subspace, h: float) -> float:
        """E (prod l_{pi a}^alpha - prod l_a^alpha)^2 through three Wick sums."""
        full = [v for v, e in zip(vectors, exponents) for _ in range(e)]
        projected = [E.basis @ (E.basis.T @ v) for v in full]
        return (
            wick_integral(projected + projected, h)
            - 2.0 * wick_integral(projected + full, h)
            + wick_integral(full + full, h)
        )

    def nm_bound_check(
        self,
        a_list: Sequence[Sequence[float]],
        b_list: Sequence[Sequence[float]],
        alpha: Sequence[int],
        beta: Sequence[int],
        h: float,
        ys: Sequence[Sequence[float]],
        stream: int = NM_STREAM,
    ) -> ExperimentReport:
        """||F(. + Y)||_{L^1(mu_{h/2})} / (1 + |Y|)^{|alpha|+|beta|} against the product-of-moments bound.

        F(y, eta) = prod <a_j, y>^alpha_j prod <b_i, eta>^beta_i on the doubled space.
        """
        if len(a_list) != len(alpha) or len(b_list) != len(beta):
            raise InvalidArgumentError("one exponent per direction is required")
        order = int(sum(alpha) + sum(beta))
        if order < 1 or any(e < 0 for e in list(alpha) + list(beta)):
            raise InvalidArgumentError("N_m check needs nonnegative exponents with |alpha| + |beta| >= 1")
        dim = len(a_list[0]) if a_list else len(b_list[0])
        a = np.array([as_hvector(v, dim) for v in a_list]).reshape(len(a_list), dim)
        b = np.array([as_hvector(v, dim) for v in b_list]).reshape(len(b_list), dim)
        half = h / 2.0

        def factor_moments(exponents: Sequence[int]) -> float:
            n = len(exponents)
            value = 1.0
            for e in exponents:
                moment, _ = expect_standard_normal(lambda v, r=n * e: (1.0 + np.abs(v)) ** r, kink=0.0)
                value *= moment ** (1.0 / n)
            return value

        norms = float(np.prod(np.linalg.norm(a, axis=1) ** np.asarray(alpha, dtype=float)))
        norms *= float(np.prod(np.linalg.norm(b, axis=1) ** np.asarray(beta, dtype=float)))
        bound = max(1.0, math.sqrt(half)) ** order * norms * factor_moments(alpha) * factor_moments(beta)
        samples = self.batch(2 * dim, half, self.mc_samples, stream).samples
        rows = []
        for index, y in enumerate(ys):
            shift = as_hvector(y, 2 * dim)
            shifted = samples + shift
            values = np.ones(samples.shape[0])
            for vec, e in zip(a, alpha):
                values = values * (shifted[:, :dim] @ vec) ** e
            for vec, e in zip(b, beta):
                values = values * (shifted[:, dim:] @ vec) ** e
            weight = (1.0 + float(np.linalg.norm(shift))) ** order
            mean, stderr = mc_mean(np.abs(values))
            params = {"norm_y": float(np.linalg.norm(shift)), "order": float(order)}
            rows.append(
                ReportRow.compare(f"Y{index}", mean / weight, bound, stderr=stderr / weight, sigma=self.sigma, params=params)
            )
            if order == 1 and len(alpha) == 1:
                sigma_a = float(np.linalg.norm(a[0])) * math.sqrt(half)
                mu = float(a[0] @ shift[:dim])
                folded = sigma_a * math.sqrt(2.0 / math.pi) * math.exp(-mu * mu / (2.0 * sigma_a ** 2)) + mu * erf(
                    mu / (sigma_a * math.sqrt(2.0))
                )
                rows.append(
                    ReportRow.compare(
                        f"Y{index} closed form", abs(mean - folded), 0.0, stderr=stderr, sigma=self.sigma, params=params
                    )
                )
        return ExperimentReport(
            check_id="nm_bound",
            operation="nm_bound_check",
            rows=rows,
            metadata={"alpha": list(alpha), "beta": list(beta), "h": h, "bound": bound, "seed": self.seed},
        )

    def extended_taylor_residual(
        self,
        f: Symbol,
        x: Sequence[float],
        k: int,
        chain: SubspaceChain,
        p: float,
        h: float,
        frame: Optional[OrthonormalFrame] = None,
        stream: int = TAYLOR_STREAM,
    ) -> ConvergenceReport:
        """Taylor identity of order k at truncation, and L^p convergence of each projected term."""
        self._require_smeps(f)
        claim = f.claim
        if k < 1 or k > (claim.depth or 0) - 1:
            raise InvalidArgumentError(f"Taylor order {k} needs 1 <= k <= depth - 1 = {(claim.depth or 0) - 1}")
        frame = frame or OrthonormalFrame.canonical(f.dim)
        point = as_hvector(x, f.dim)
        samples = self.batch(f.dim, h, self.mc_samples, stream).samples

        def term(i: int, ys: np.ndarray) -> np.ndarray:
            return np.asarray(f.derivative_rows(np.broadcast_to(point, ys.shape), [ys] * i))

        def remainder(ys: np.ndarray) -> np.ndarray:
            direct = np.asarray(f.evaluate(point + ys))
            for i in range(k + 1):
                direct = direct - term(i, ys) / math.factorial(i)
            return direct

        head = samples[:IDENTITY_SAMPLES]
        nodes, weights = leggauss(LEGENDRE_NODES)
        s_values = 0.5 * (nodes + 1.0)
        integral = np.zeros(head.shape[0], dtype=complex if f.is_complex else float)
        for s, w in zip(s_values, 0.5 * weights):
            at = point + s * head
            integral = integral + w * (1.0 - s) ** k / math.factorial(k) * np.asarray(f.derivative_rows(at, [head] * (k + 1)))
        direct = remainder(head)
        identity = float(np.max(np.abs(direct - integral) / (1.0 + np.abs(direct))))
        rows = [ReportRow.compare("identity", identity, IDENTITY_TOLERANCE, params={"k": float(k)})]

        eps = claim.eps.values
        total = float(np.sum(eps))
        for step_index, E in enumerate(chain.steps):
            projected = project_rows(E, samples)
            gaps = residual_norms(E, frame.vectors())
            base = {"step": float(step_index), "n": float(E.rank), "p": float(p), "h": float(h)}
            gap_sum = float(eps @ gaps)
            lhs, stderr = lq_estimate(np.asarray(f.evaluate(point + projected)) - np.asarray(f.evaluate(point + samples)), p)
            rhs = sm_rate_bound(claim.smeps_norm, p, h, E, frame, eps)
            rows.append(self._rate_row(f"E{step_index} F", lhs, stderr, rhs, {**base, "term": 0.0}))
            # Minkowski over F and the projected terms bounds the remainder gap
            remainder_bound = rhs
            for i in range(1, k + 1):
                lhs, stderr = lq_estimate(term(i, projected) - term(i, samples), p)
                rhs = claim.smeps_norm * (k_constant(p * i) * math.sqrt(h)) ** i * i * total ** (i - 1) * gap_sum
                rows.append(self._rate_row(f"E{step_index} term{i}", lhs, stderr, rhs, {**base, "term": float(i)}))
                remainder_bound += rhs / math.factorial(i)
            lhs, stderr = lq_estimate(remainder(projected) - remainder(samples), p)
            rows.append(self._rate_row(f"E{step_index} remainder", lhs, stderr, remainder_bound, {**base, "term": float(k + 1)}))
        return ConvergenceReport(
            check_id=f"extended_taylor_k{k}",
            operation="extended_taylor_residual",
            rows=rows,
            metadata={"symbol": f.label, "k": k, "p": p, "h": h, "identity_residual": identity, "seed": self.seed},
        )

    def contraction_property_check(
        self, f: Symbol, ps: Sequence[float], h: float, stream: int = CONTRACTION_STREAM
    ) -> ExperimentReport:
        """||F||_{L^p(mu_h)} <= claimed ||F|| + 3 sigma for bounded symbols."""
        claimed = f.claim.norm_bound
        if claimed is None:
            raise InvalidArgumentError(f"{f.label} carries no bound to contract against")
        values = np.asarray(f.evaluate(self.batch(f.dim, h, self.mc_samples, stream).samples))
        rows = []
        for p in ps:
            estimate, stderr = lq_estimate(values, p)
            rows.append(
                ReportRow.compare(f"p={p:g}", estimate, claimed, stderr=stderr, tolerance=EXACT_TOLERANCE, sigma=self.sigma, params={"p": float(p), "h": float(h)})
            )
        return ExperimentReport(
            check_id="contraction_property",
            operation="contraction_property_check",
            rows=rows,
            metadata={"symbol": f.label, "claimed": claimed, "seed": self.seed},
        )

    def chain_monotonicity(self, report: ConvergenceReport) -> ExperimentReport:
        """LHS at E_{n+1} <= LHS at E_n + 3 combined stderr."""
        rows = []
        for before, after in zip(report.rows, report.rows[1:]):
            combined = math.sqrt(before.stderr ** 2 + after.stderr ** 2)
            rows.append(
                ReportRow.compare(
                    f"{before.label}->{after.label}",
                    after.measured - before.measured,
                    0.0,
                    stderr=combined,
                    tolerance=EXACT_TOLERANCE,
                    sigma=self.sigma,
                    params={"n": after.params.get("n", 0.0)},
                )
            )
        return ExperimentReport(
            check_id=f"{report.check_id}_monotone",
            operation=report.operation,
            rows=rows,
            metadata={"source": report.check_id},
        )
