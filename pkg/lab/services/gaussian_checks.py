"""Checks of the Gaussian calculus: constants, Wick sums, moments, translation, telescoping."""

import math
from typing import Dict, List, Optional, Sequence

import numpy as np
import structlog

from config.settings import settings
from lab.core.constants import ConstantsTable, k_constant
from lab.core.gaussian import (
    abs_moment,
    central_moment_even,
    enumerate_pairings,
    exp_moment,
    gaussian_sample,
    holder_telescoping_check,
    mc_mean,
    mixed_moment_rhs,
    spawn_rng,
    translation_identity_residual,
    wick_integral,
)
from lab.core.quadrature import expect_standard_normal
from lab.models.gaussian import GaussianMeasureSpec
from lab.models.hilbert import TraceClassOperator
from lab.models.reports import ExperimentReport, ReportRow
from lab.symbols.base import Symbol
from lab.symbols.stock import exp_i_symbol, gaussian_bell_symbol, poly_scalar_symbol, trig_symbol

logger = structlog.get_logger(__name__)

CONSTANT_TOLERANCE = 1e-12
QUADRATURE_TOLERANCE = 1e-9
WICK_DIM = 6
MOMENT_DIM = 4

# auxiliary streams
_WICK, _MOMENTS, _TRANSLATION, _HOLDER = 201, 202, 203, 204


def double_factorial(n: int) -> int:
    """n!! for odd n >= -1."""
    return math.prod(range(n, 0, -2)) if n > 0 else 1


class GaussianCheckService:
    """Verifies the moment identities of mu_h against closed forms and Monte Carlo."""

    def __init__(self, seed: int = 0, mc_samples: Optional[int] = None, sigma: Optional[float] = None):
        self.logger = logger.bind(service="gaussian_checks")
        self.seed = seed
        self.mc_samples = mc_samples or settings.mc_samples
        self.sigma = settings.sigma_gate if sigma is None else sigma

    def _samples(self, dim: int, h: float, count: int, stream: int) -> np.ndarray:
        return gaussian_sample(GaussianMeasureSpec(dim=dim, variance=h), self.seed, count, stream=stream).samples

    def constants_table(self, ps: Sequence[float], trace: float = 1.0) -> ExperimentReport:
        """K(p), C(p), alpha(p) inline vs tabulated, K(2) = 1, and abs_moment vs 1-D quadrature."""
        table = ConstantsTable.build(ps, trace)
        rows = []
        for row in table.rows:
            entry = ReportRow.compare(
                f"p={row.p:g}",
                abs(k_constant(row.p) - row.k),
                CONSTANT_TOLERANCE * row.k,
                params={"p": row.p, "K": row.k, "C": row.c, "alpha": row.alpha},
            )
            if not row.agrees:
                self.logger.error("Inline and tabulated constants disagree", p=row.p)
                entry = entry.model_copy(update={"passed": False, "note": "inline and tabulated constants disagree"})
            rows.append(entry)
        rows.append(ReportRow.compare("K(2)=1", abs(k_constant(2.0) - 1.0), CONSTANT_TOLERANCE, params={"p": 2.0}))
        for p in ps:
            oracle, _ = expect_standard_normal(lambda v, p=p: np.abs(v) ** p, kink=0.0)
            rows.append(
                ReportRow.compare(
                    f"abs_moment p={p:g}", abs(abs_moment(1.0, p, 1.0) - oracle), QUADRATURE_TOLERANCE,
                    params={"p": float(p), "quadrature": oracle},
                )
            )
        return ExperimentReport(
            check_id="constants",
            operation="k_constant",
            rows=rows,
            metadata={"trace": trace, "table": [row.model_dump() for row in table.rows]},
        )

    def wick_check(self, ps: Sequence[int] = (1, 2, 3), h: float = 1.0, samples: Optional[int] = None) -> ExperimentReport:
        """Pairing counts, unit-vector copies, Monte Carlo agreement and odd moments."""
        samples = samples or settings.mc_max_samples
        rng = spawn_rng(self.seed, _WICK)
        x = self._samples(WICK_DIM, h, samples, _WICK)
        rows: List[ReportRow] = []
        for p in range(1, 5):
            count = len(enumerate_pairings(2 * p))
            rows.append(ReportRow.compare(f"pairings 2p={2 * p}", abs(count - double_factorial(2 * p - 1)), 0.0, params={"p": float(p)}))
            unit = np.zeros(WICK_DIM)
            unit[0] = 1.0
            exact = double_factorial(2 * p - 1) * h ** p
            rows.append(
                ReportRow.compare(
                    f"unit copies p={p}", abs(wick_integral([unit] * (2 * p), h) - exact), CONSTANT_TOLERANCE * exact, params={"p": float(p)}
                )
            )
            rows.append(
                ReportRow.compare(
                    f"central moment p={p}", abs(central_moment_even(p) - double_factorial(2 * p - 1)),
                    CONSTANT_TOLERANCE * double_factorial(2 * p - 1), params={"p": float(p)},
                )
            )
        for p in ps:
            vectors = rng.standard_normal((2 * p, WICK_DIM)) / math.sqrt(WICK_DIM)
            exact = wick_integral(list(vectors), h)
            mean, stderr = mc_mean(np.prod(x @ vectors.T, axis=1))
            rows.append(
                ReportRow.compare(
                    f"monte carlo p={p}", abs(mean - exact), 0.0, stderr=stderr, sigma=self.sigma,
                    params={"p": float(p), "exact": exact},
                )
            )
        odd = rng.standard_normal((3, WICK_DIM))
        mean, stderr = mc_mean(np.prod(x @ odd.T, axis=1))
        rows.append(
            ReportRow.compare(
                "odd moment", abs(mean - wick_integral(list(odd), h, allow_odd=True)), 0.0, stderr=stderr, sigma=self.sigma
            )
        )
        scaled = [2.0 * vectors[0]] + list(vectors[1:])
        rows.append(
            ReportRow.compare(
                "multilinear scaling", abs(wick_integral(scaled, h) - 2.0 * exact), CONSTANT_TOLERANCE * max(1.0, abs(exact))
            )
        )
        return ExperimentReport(
            check_id="wick", operation="wick_integral", rows=rows, metadata={"h": h, "samples": samples, "seed": self.seed}
        )

    def moments_check(self, draws: int = 20) -> ExperimentReport:
        """Exponential, absolute and mixed moments against Monte Carlo for random parameters."""
        rng = spawn_rng(self.seed, _MOMENTS)
        rows: List[ReportRow] = []
        for r in range(draws):
            h = float(rng.uniform(0.5, 2.0))
            p = float(rng.choice([1.0, 1.5, 2.0, 3.0, 4.0]))
            u, v, a, b = (0.4 * rng.standard_normal(MOMENT_DIM) / math.sqrt(MOMENT_DIM) for _ in range(4))
            x = self._samples(MOMENT_DIM, h, self.mc_samples, 1000 + r)
            params: Dict[str, float] = {"draw": float(r), "h": h, "p": p}

            closed = exp_moment(u, v, h)
            mean, stderr = mc_mean(np.exp(x @ u + 1j * (x @ v)))
            rows.append(ReportRow.compare(f"exp r={r}", abs(mean - closed), 0.0, stderr=stderr, sigma=self.sigma, params=params))

            norm_a = float(np.linalg.norm(a))
            mean, stderr = mc_mean(np.abs(x @ a) ** p)
            rows.append(
                ReportRow.compare(f"abs r={r}", abs(mean - abs_moment(norm_a, p, h)), 0.0, stderr=stderr, sigma=self.sigma, params=params)
            )

            rhs = mixed_moment_rhs(norm_a, float(a @ b), float(np.linalg.norm(b)), p, h)
            mean, stderr = mc_mean(np.abs(x @ a) ** p * np.exp(x @ b))
            rows.append(ReportRow.compare(f"mixed r={r}", abs(mean - rhs), 0.0, stderr=stderr, sigma=self.sigma, params=params))

            degenerate = mixed_moment_rhs(norm_a, 0.0, 0.0, p, h)
            rows.append(
                ReportRow.compare(
                    f"mixed b=0 r={r}", abs(degenerate - abs_moment(norm_a, p, h)),
                    QUADRATURE_TOLERANCE * max(1.0, degenerate), params=params,
                )
            )
        return ExperimentReport(
            check_id="moments", operation="exp_moment", rows=rows,
            metadata={"draws": draws, "samples": self.mc_samples, "seed": self.seed},
        )

    def _translation_symbol(self, r: int, rng: np.random.Generator) -> Symbol:
        b = 0.6 * rng.standard_normal(MOMENT_DIM) / math.sqrt(MOMENT_DIM)
        kind = r % 4
        if kind == 0:
            return trig_symbol(b, label="trig")
        if kind == 1:
            return gaussian_bell_symbol(TraceClassOperator.diagonal([0.5, 0.25, 0.0, 0.0]), label="bell")
        if kind == 2:
            return exp_i_symbol(b, label="exp_i")
        return poly_scalar_symbol([b], [2], label="poly")

    def translation_check(self, cases: int = 10) -> ExperimentReport:
        """Residual of int g dmu_h = e^{-|a|^2/(2h)} int g(x+a) e^{-<a,x>/h} dmu_h within 3 sigma."""
        rng = spawn_rng(self.seed, _TRANSLATION)
        rows: List[ReportRow] = []
        for r in range(cases):
            h = float(rng.uniform(0.5, 2.0))
            a = 0.5 * math.sqrt(h) * rng.standard_normal(MOMENT_DIM) / math.sqrt(MOMENT_DIM)
            g = self._translation_symbol(r, rng)
            spec = GaussianMeasureSpec(dim=MOMENT_DIM, variance=h)
            batch = gaussian_sample(spec, self.seed, self.mc_samples, stream=2000 + r)
            residual, stderr = translation_identity_residual(g, a, h, batch)
            params = {"case": float(r), "h": h, "norm_a": float(np.linalg.norm(a))}
            rows.append(ReportRow.compare(f"{g.label} r={r}", residual, 0.0, stderr=stderr, sigma=self.sigma, params=params))
            if g.label == "trig":
                direction = g.directions[0]
                oracle = math.exp(-0.5 * h * float(direction @ direction))
                mean, se = mc_mean(np.asarray(g.evaluate(batch.samples)))
                rows.append(
                    ReportRow.compare(f"trig oracle r={r}", abs(mean - oracle), 0.0, stderr=se, sigma=self.sigma, params=params)
                )
        return ExperimentReport(
            check_id="translation", operation="translation_identity_residual", rows=rows,
            metadata={"cases": cases, "samples": self.mc_samples, "seed": self.seed},
        )

    def holder_check(self, instances: int = 1000, ps: Sequence[float] = (1.0, 1.5, 2.0, 3.0, 4.0)) -> ExperimentReport:
        """Randomized telescoped Hoelder instances, worst slack per exponent."""
        rng = spawn_rng(self.seed, _HOLDER)
        worst: Dict[float, List[float]] = {float(p): [-math.inf, -math.inf, 0] for p in ps}
        for _ in range(instances):
            p = float(ps[int(rng.integers(len(ps)))])
            factors = int(rng.integers(1, 5))
            support = int(rng.integers(2, 13))
            f = rng.uniform(-2.0, 2.0, size=(factors, support))
            g = f + rng.normal(scale=0.3, size=(factors, support))
            weights = rng.dirichlet(np.ones(support))
            weights = weights / weights.sum()
            report = holder_telescoping_check(f, g, p, weights)
            precise, coarse = report.rows
            entry = worst[p]
            entry[0] = max(entry[0], precise.measured - precise.bound)
            entry[1] = max(entry[1], coarse.measured - coarse.bound)
            entry[2] += 1
        rows = []
        for p, (precise_gap, coarse_gap, count) in worst.items():
            if not count:
                continue
            params = {"p": p, "instances": float(count)}
            rows.append(ReportRow.compare(f"precise p={p:g}", precise_gap, 0.0, tolerance=CONSTANT_TOLERANCE, params=params))
            rows.append(ReportRow.compare(f"coarse p={p:g}", coarse_gap, 0.0, tolerance=CONSTANT_TOLERANCE, params=params))
        return ExperimentReport(
            check_id="holder", operation="holder_telescoping_check", rows=rows,
            metadata={"instances": instances, "seed": self.seed},
        )
