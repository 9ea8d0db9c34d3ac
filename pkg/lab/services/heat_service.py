"""Heat operator H_t and the residual checks of its semigroup properties."""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog

from config.settings import settings
from lab.core.constants import alpha_exponent, c_constant
from lab.core.gaussian import gaussian_sample, mc_mean
from lab.core.geometry import q_form
from lab.core.quadrature import tensor_grid
from lab.exceptions import InvalidArgumentError, LabError, ResourceLimitError
from lab.models.gaussian import GaussianMeasureSpec
from lab.models.heat import HeatMethod, HeatMethodKind, HeatResult
from lab.models.hilbert import OrthogonalMap, OrthonormalFrame, as_hvector
from lab.models.reports import ExperimentReport, ReportRow
from lab.services.symbol_checks import SymbolCheckService
from lab.symbols.algebra import (
    compose_orthogonal,
    finite_difference,
    gram_factor,
    iterated_laplacian,
    laplacian,
    multiply_coordinate,
    smooth_symbol,
)
from lab.symbols.base import CallableSymbol, MultiIndexSpec, Scalar, Symbol, expand_multi_index, fd_laplacian_rows
from lab.symbols.cylindrical import CylindricalSymbol
from lab.symbols.stock import linear_combination

logger = structlog.get_logger(__name__)

MAX_QUADRATURE_ARITY = 6
SLOPE_FLOOR = 1e-13
SLOPE_WINDOW = 0.2
CONSTANT_TOLERANCE = 1e-12


def fit_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(np.asarray(xs, dtype=float)), np.log(np.asarray(ys, dtype=float)), 1)[0])


class HeatService:
    """Evaluates H_t f = E f(x + y), y ~ N(0, t I), by quadrature or Monte Carlo."""

    def __init__(self, seed: int = 0, method: Optional[HeatMethod] = None, sigma: Optional[float] = None):
        self.logger = logger.bind(service="heat")
        self.seed = seed
        self.method = method or HeatMethod(
            quadrature_order=settings.quad_order, mc_samples=settings.mc_samples, seed=seed
        )
        self.sigma = settings.sigma_gate if sigma is None else sigma

    def _monte_carlo(self, method: HeatMethod) -> HeatMethod:
        return method.model_copy(update={"kind": HeatMethodKind.MONTE_CARLO})

    def heat_apply(self, f: Symbol, x: Sequence[float], t: float, method: Optional[HeatMethod] = None) -> HeatResult:
        """H_t f(x); t = 0 is the identity."""
        method = method or self.method
        if t < 0:
            raise InvalidArgumentError("heat time must be nonnegative")
        point = as_hvector(x, f.dim)
        if t == 0:
            return HeatResult(value=f(point), error_estimate=0.0, method=method)
        try:
            if method.is_quadrature:
                value, error = self._quadrature(f, point, t, method.quadrature_order)
            else:
                value, error = self._sampled(f, point, t, method)
        except LabError as e:
            self.logger.error("Heat evaluation failed", symbol=f.label, t=t, error=str(e))
            raise
        return HeatResult(value=value, error_estimate=error, method=method)

    def _quadrature(self, f: Symbol, point: np.ndarray, t: float, order: int) -> Tuple[Scalar, float]:
        """Tensor Gauss-Hermite over span(a_i) with the factor of t G; error |Q_n - Q_{n/2}|."""
        if not isinstance(f, CylindricalSymbol):
            raise InvalidArgumentError(f"quadrature needs a cylindrical symbol, got {f.label}")
        if f.arity > MAX_QUADRATURE_ARITY:
            raise ResourceLimitError(f"profile dimension {f.arity} exceeds {MAX_QUADRATURE_ARITY}")
        factor = gram_factor(t * f.gram)
        z = f.coordinates(point)

        def rule(n: int) -> Scalar:
            nodes, weights = tensor_grid(factor.shape[1], n, settings.quad_grid_budget)
            return f._scalar(weights @ np.asarray(f.profile.value(z + nodes @ factor.T)))

        full = rule(order)
        half = rule(max(order // 2, 1))
        return full, float(abs(full - half))

    def _sampled(self, f: Symbol, point: np.ndarray, t: float, method: HeatMethod) -> Tuple[Scalar, float]:
        batch = gaussian_sample(GaussianMeasureSpec(dim=f.dim, variance=t), method.seed, method.mc_samples, method.stream)
        mean, stderr = mc_mean(np.asarray(f.evaluate(point + batch.samples)))
        return mean, stderr

    def closed_form_check(self, f: Symbol, grid: np.ndarray, ts: Sequence[float], tolerance: float = 1e-8) -> ExperimentReport:
        """Tensor quadrature of H_t f against its closed-form smoothing."""
        rows = []
        for t in ts:
            smoothed, exact = self.heat_symbol(f, t)
            if not exact:
                raise InvalidArgumentError(f"{f.label} has no closed-form smoothing")
            for j, x in enumerate(np.asarray(grid)):
                closed = smoothed(x)
                gap = abs(self.heat_apply(f, x, t).value - closed)
                rows.append(
                    ReportRow.compare(
                        f"t={t:g} x{j}", gap, tolerance * (1.0 + abs(closed)), params={"t": float(t), "point": float(j)}
                    )
                )
        return ExperimentReport(check_id="closed_form", operation="heat_apply", rows=rows, metadata={"symbol": f.label})

    def heat_symbol(self, f: Symbol, t: float) -> Tuple[Symbol, bool]:
        """H_t f as a symbol, and whether it is a closed form."""
        return smooth_symbol(f, t, order=self.method.quadrature_order, budget=settings.quad_grid_budget)

    def heat_value(self, f: Symbol, x: Sequence[float], t: float) -> Scalar:
        """H_t f(x) through the smoothed symbol."""
        if t == 0:
            return f(x)
        return self.heat_symbol(f, t)[0](x)

    def semigroup_residual(self, f: Symbol, x: Sequence[float], s: float, t: float) -> float:
        """|H_t(H_s f)(x) - H_{t+s} f(x)|; nested smoothing is closed form or joint quadrature."""
        if s < 0 or t < 0:
            raise InvalidArgumentError("heat times must be nonnegative")
        if s == 0 or t == 0:
            return 0.0
        inner, _ = self.heat_symbol(f, s)
        nested, exact = self.heat_symbol(inner, t)
        residual = float(abs(nested(x) - self.heat_value(f, x, s + t)))
        self.logger.debug("Semigroup residual", symbol=f.label, s=s, t=t, residual=residual, closed_form=exact)
        return residual

    def commutation_residual(self, f: Symbol, x: Sequence[float], t: float, finite_difference_lhs: bool = False) -> float:
        """|Delta(H_t f)(x) - H_t(Delta f)(x)|."""
        smoothed, _ = self.heat_symbol(f, t)
        if finite_difference_lhs:
            wrapped = CallableSymbol(smoothed.evaluate, f.dim, label=smoothed.label, is_complex=f.is_complex)
            lhs = wrapped._scalar(fd_laplacian_rows(wrapped, as_hvector(x, f.dim)))
        else:
            lhs = laplacian(smoothed, x)
        rhs = self.heat_value(f.laplacian_symbol(), x, t)
        return float(abs(lhs - rhs))

    def generator_residual(self, f: Symbol, x: Sequence[float], t: float, delta: float) -> float:
        """|(H_{t+delta} f(x) - H_t f(x)) / delta - (1/2) H_t(Delta f)(x)|."""
        if t < 0 or not delta > 0:
            raise InvalidArgumentError("generator residual needs t >= 0 and delta > 0")
        quotient = (self.heat_value(f, x, t + delta) - self.heat_value(f, x, t)) / delta
        return float(abs(quotient - 0.5 * self.heat_value(f.laplacian_symbol(), x, t)))

    def generator_check(self, f: Symbol, x: Sequence[float], deltas: Sequence[float], t: float = 0.0) -> ExperimentReport:
        """Generator residuals against the S(Q_A) and S_m bounds, with the observed order in delta."""
        claim = f.claim
        rows: List[ReportRow] = []
        residuals = []
        for delta in deltas:
            residual = self.generator_residual(f, x, t, delta)
            residuals.append(residual)
            params = {"t": float(t), "delta": float(delta)}
            rows.append(ReportRow.compare(f"delta={delta:g}", residual, None, params=params))
            if claim.has_qa:
                trace = claim.qa_operator.trace
                bound = c_constant(4, trace) ** 4 * trace ** (4 / alpha_exponent(4)) * delta * claim.qa_norm / 24.0
                rows.append(ReportRow.compare(f"residual_qa delta={delta:g}", residual, bound, tolerance=1e-12, params=params))
            if claim.has_smeps and (claim.depth or 0) >= 3:
                total = claim.eps.total
                increment = float(abs(self.heat_value(f, x, delta) - f(x)))
                c2 = 2.0 * total ** 2
                c3 = 2.0 ** 4.5 / (math.sqrt(math.pi) * 6.0) * total ** 3
                rows.append(
                    ReportRow.compare(f"increment delta={delta:g}", increment, c2 * claim.smeps_norm * delta, tolerance=1e-12, params=params)
                )
                rows.append(
                    ReportRow.compare(
                        f"residual_sm delta={delta:g}", residual, c3 * claim.smeps_norm * math.sqrt(delta), tolerance=1e-12, params=params
                    )
                )
        metadata = {"symbol": f.label, "t": t}
        if len(deltas) > 1 and min(residuals) > SLOPE_FLOOR:
            metadata["observed_order"] = fit_slope(deltas, residuals)
        return ExperimentReport(check_id="generator", operation="generator_residual", rows=rows, metadata=metadata)

    def expansion_check(self, f: Symbol, x: Sequence[float], ts: Sequence[float], order: int) -> ExperimentReport:
        """|H_t f(x) - sum_{k<=N} t^k/k! (Delta/2)^k f(x)| against the remainder bounds."""
        if order < 0:
            raise InvalidArgumentError("expansion order must be nonnegative")
        powers = [iterated_laplacian(f, x, j) for j in range(order + 1)]
        claim = f.claim
        n1 = order + 1
        k = 2 * order + 1
        rows: List[ReportRow] = []
        residuals = []
        for t in ts:
            series = sum(t ** j / math.factorial(j) * 0.5 ** j * powers[j] for j in range(order + 1))
            smoothed, exact = self.heat_symbol(f, t)
            value = smoothed(x)
            residual = float(abs(value - series))
            residuals.append(residual)
            params = {"t": float(t), "order": float(order)}
            note = None if exact else "quadrature-smoothed"
            rows.append(ReportRow.compare(f"t={t:g}", residual, None, params=params, note=note))
            if claim.has_qa:
                trace = claim.qa_operator.trace
                bound = t ** n1 / math.factorial(n1) * (trace / 2.0) ** n1 * claim.qa_norm
                rows.append(ReportRow.compare(f"qa t={t:g}", residual, bound, tolerance=1e-12, params=params))
                c = c_constant(k + 1, trace)
                integral = (
                    claim.qa_norm * c ** (k + 1) * trace ** ((k + 1) / alpha_exponent(k + 1)) * t ** ((k + 1) / 2.0)
                    / math.factorial(k + 1)
                )
                rows.append(ReportRow.compare(f"integral t={t:g}", residual, integral, tolerance=1e-12, params=params))
            if claim.has_smeps and (claim.depth or 0) >= k:
                sm = (
                    claim.smeps_norm * 2.0 ** (1.5 * k) * t ** (k / 2.0) * math.gamma((k + 1) / 2.0) * claim.eps.total ** k
                    / (math.sqrt(math.pi) * math.factorial(k))
                )
                rows.append(ReportRow.compare(f"sm t={t:g}", residual, sm, tolerance=1e-12, params=params))
        metadata = {"symbol": f.label, "order": order}
        if len(ts) > 1 and min(residuals) > SLOPE_FLOOR:
            slope = fit_slope(ts, residuals)
            metadata["observed_order"] = slope
            rows.append(
                ReportRow.compare("slope", abs(slope - n1), SLOPE_WINDOW, params={"order": float(order), "slope": slope})
            )
        return ExperimentReport(check_id="expansion", operation="expansion_check", rows=rows, metadata=metadata)

    def _commutator_terms(
        self, f: Symbol, x: Sequence[float], t: float, i: int, method: HeatMethod, frame: OrthonormalFrame
    ) -> Tuple[float, float]:
        if not t > 0:
            raise InvalidArgumentError("commutator needs t > 0")
        u = frame.vector(i)
        point = as_hvector(x, f.dim)
        if method.is_quadrature:
            lhs = (self.heat_value(multiply_coordinate(f, u), point, t) - float(u @ point) * self.heat_value(f, point, t)) / t
            return float(abs(lhs - self.heat_value(f.directional_symbol(u), point, t))), 0.0
        ys = gaussian_sample(GaussianMeasureSpec(dim=f.dim, variance=t), method.seed, method.mc_samples, method.stream).samples
        shifted = point + ys
        difference = (ys @ u) * np.asarray(f.evaluate(shifted)) / t - np.asarray(f.derivative_rows(shifted, [u]))
        mean, stderr = mc_mean(difference)
        return float(abs(mean)), stderr

    def multiplication_commutator_residual(
        self,
        f: Symbol,
        x: Sequence[float],
        t: float,
        i: int,
        method: Optional[HeatMethod] = None,
        frame: Optional[OrthonormalFrame] = None,
    ) -> float:
        """|(1/t)(H_t(M_u f) - <u, x> H_t f)(x) - H_t(d f / d u)(x)| for u the i-th frame vector."""
        frame = frame or OrthonormalFrame.canonical(f.dim)
        return self._commutator_terms(f, x, t, i, method or self.method, frame)[0]

    def covariance_residual(self, f: Symbol, phi: OrthogonalMap, x: Sequence[float], t: float) -> float:
        """|(H_t f)(phi x) - H_t(f o phi)(x)|."""
        point = as_hvector(x, f.dim)
        lhs = self.heat_value(f, phi.apply(point), t)
        return float(abs(lhs - self.heat_value(compose_orthogonal(f, phi), point, t)))

    def derivative_exchange_residual(
        self,
        f: Symbol,
        x: Sequence[float],
        t: float,
        multi_index: Optional[MultiIndexSpec] = None,
        directions: Optional[Sequence[Sequence[float]]] = None,
        frame: Optional[OrthonormalFrame] = None,
        finite_difference_lhs: bool = False,
    ) -> float:
        """|d^alpha(H_t f)(x) - H_t(d^alpha f)(x)|, along frame indices or explicit directions."""
        if (multi_index is None) == (directions is None):
            raise InvalidArgumentError("give exactly one of multi_index and directions")
        if directions is None:
            frame = frame or OrthonormalFrame.canonical(f.dim)
            directions = [frame.vector(j) for j in expand_multi_index(multi_index)]
        dirs = [as_hvector(u, f.dim) for u in directions]
        smoothed, _ = self.heat_symbol(f, t)
        lhs = finite_difference(smoothed, x, dirs, step=1e-3) if finite_difference_lhs else smoothed.derivative(x, dirs)
        inner: Symbol = f
        for u in dirs:
            inner = inner.directional_symbol(u)
        return float(abs(lhs - self.heat_value(inner, x, t)))

    def heat_taylor_remainder_check(
        self, f: Symbol, xs: np.ndarray, ys: np.ndarray, t: float
    ) -> ExperimentReport:
        """|H_t f(x+y) - H_t f(x) - H_t(df(.)y)(x)| <= (1/2) ||f||_{Q_A} Q_A(y)."""
        if not f.claim.has_qa:
            raise InvalidArgumentError(f"{f.label} carries no S(Q_A) claim")
        smoothed, _ = self.heat_symbol(f, t)
        operator, norm = f.claim.qa_operator, f.claim.qa_norm
        worst = 0.0
        for x, y in zip(np.asarray(xs), np.asarray(ys)):
            gap = abs(smoothed(x + y) - smoothed(x) - self.heat_value(f.directional_symbol(y), x, t))
            bound = 0.5 * norm * q_form(operator, y)
            ratio = gap / bound if bound > 0 else (math.inf if gap > 1e-14 else 0.0)
            worst = max(worst, ratio)
        return ExperimentReport(
            check_id="heat_taylor_remainder",
            operation="heat_taylor_remainder_check",
            rows=[ReportRow.compare("worst_ratio", worst, 1.0, tolerance=1e-9, params={"t": float(t)})],
            metadata={"symbol": f.label, "points": int(len(xs))},
        )

    def contraction_check(
        self, f: Symbol, grid: np.ndarray, t: float, method: Optional[HeatMethod] = None
    ) -> ExperimentReport:
        """|H_t f(x)| <= claimed norm at every grid point, within method error."""
        claimed = f.claim.norm_bound
        if claimed is None:
            raise InvalidArgumentError(f"{f.label} carries no class claim")
        method = method or self.method
        worst_excess = -math.inf
        violations = 0
        for x in np.asarray(grid):
            result = self.heat_apply(f, x, t, method)
            slack = self.sigma * result.error_estimate if not method.is_quadrature else result.error_estimate
            excess = result.magnitude - claimed - slack
            worst_excess = max(worst_excess, excess)
            violations += int(excess > CONSTANT_TOLERANCE)
        return ExperimentReport(
            check_id="contraction",
            operation="contraction_check",
            rows=[
                ReportRow.compare(
                    "violations", float(violations), 0.0, params={"t": float(t), "points": float(len(grid))},
                    note=f"worst excess {worst_excess:.3e}",
                )
            ],
            metadata={"symbol": f.label, "claimed": claimed, "method": method.kind.value},
        )

    def linearity_check(
        self, f: Symbol, g: Symbol, coefficients: Tuple[float, float], grid: np.ndarray, t: float
    ) -> ExperimentReport:
        """H_t(a f + b g) = a H_t f + b H_t g within quadrature error."""
        a, b = coefficients
        combined = linear_combination([a, b], [f, g])
        worst, tolerance = 0.0, 0.0
        for x in np.asarray(grid):
            left = self.heat_apply(combined, x, t)
            fx, gx = self.heat_apply(f, x, t), self.heat_apply(g, x, t)
            worst = max(worst, float(abs(left.value - a * fx.value - b * gx.value)))
            tolerance = max(tolerance, left.error_estimate + abs(a) * fx.error_estimate + abs(b) * gx.error_estimate)
        return ExperimentReport(
            check_id="linearity",
            operation="heat_apply",
            rows=[ReportRow.compare("linearity", worst, tolerance + CONSTANT_TOLERANCE, params={"t": float(t)})],
            metadata={"symbols": [f.label, g.label]},
        )

    def constants_check(self, constant: Symbol, x: Sequence[float], ts: Sequence[float]) -> ExperimentReport:
        """H_t c = c and normalized quadrature weights."""
        rows = []
        for t in ts:
            value = self.heat_apply(constant, x, t).value
            rows.append(
                ReportRow.compare(f"t={t:g}", abs(value - constant(x)), CONSTANT_TOLERANCE, params={"t": float(t)})
            )
        for k in (1, 2):
            _, weights = tensor_grid(k, self.method.quadrature_order)
            rows.append(ReportRow.compare(f"weights k={k}", abs(float(weights.sum()) - 1.0), CONSTANT_TOLERANCE))
        return ExperimentReport(check_id="heat_constants", operation="heat_apply", rows=rows, metadata={"symbol": constant.label})

    def quadrature_mc_agreement(self, f: Symbol, grid: np.ndarray, ts: Sequence[float]) -> ExperimentReport:
        """|quadrature - MC| <= 3 MC stderr."""
        sampled = self._monte_carlo(self.method)
        rows = []
        for t in ts:
            for j, x in enumerate(np.asarray(grid)):
                quad = self.heat_apply(f, x, t)
                mc = self.heat_apply(f, x, t, sampled.model_copy(update={"stream": j}))
                rows.append(
                    ReportRow.compare(
                        f"t={t:g} x{j}",
                        abs(quad.value - mc.value),
                        0.0,
                        stderr=mc.error_estimate,
                        tolerance=quad.error_estimate,
                        sigma=self.sigma,
                        params={"t": float(t), "point": float(j)},
                    )
                )
        return ExperimentReport(
            check_id="quadrature_mc_agreement", operation="heat_apply", rows=rows,
            metadata={"symbol": f.label, "mc_samples": sampled.mc_samples, "seed": sampled.seed},
        )

    def heat_norm_contraction(self, f: Symbol, t: float, m_max: int, trials: int) -> ExperimentReport:
        """The smoothed symbol keeps ||H_t f||_{Q_A} <= ||f||_{Q_A}."""
        if not f.claim.has_qa:
            raise InvalidArgumentError(f"{f.label} carries no S(Q_A) claim")
        smoothed, _ = self.heat_symbol(f, t)
        report = SymbolCheckService(self.seed).qa_membership_check(
            smoothed, f.claim.qa_operator, f.claim.qa_norm, m_max, trials
        )
        return report.model_copy(update={"check_id": "heat_norm_contraction", "operation": "heat_symbol"})

    def commutator_check(
        self, f: Symbol, grid: np.ndarray, t: float, indices: Sequence[int], method: Optional[HeatMethod] = None
    ) -> ExperimentReport:
        """Multiplication commutator residuals over grid points and frame indices."""
        method = method or self.method
        frame = OrthonormalFrame.canonical(f.dim)
        rows = []
        for j, x in enumerate(np.asarray(grid)):
            for i in indices:
                residual, stderr = self._commutator_terms(f, x, t, i, method, frame)
                tolerance = 1e-8 if method.is_quadrature else 1e-12
                rows.append(
                    ReportRow.compare(
                        f"x{j} u{i}", residual, 0.0, stderr=stderr, tolerance=tolerance, sigma=self.sigma,
                        params={"t": float(t), "i": float(i)},
                    )
                )
        return ExperimentReport(
            check_id=f"commutator_{method.kind.value}", operation="multiplication_commutator_residual", rows=rows,
            metadata={"symbol": f.label},
        )
