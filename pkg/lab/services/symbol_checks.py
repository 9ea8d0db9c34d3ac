"""Sampling checks of symbol-class claims and of the inequalities they imply."""

import itertools
import math
from typing import Dict, List, Optional, Sequence

import numpy as np
import structlog

from lab.core.gaussian import spawn_rng
from lab.core.geometry import ba_operator, q_form_rows, random_orthogonal
from lab.exceptions import InvalidArgumentError
from lab.models.hilbert import EpsilonSequence, FloatArray, OrthonormalFrame, TraceClassOperator
from lab.models.reports import ExperimentReport, ReportRow
from lab.symbols.algebra import finite_difference, laplacian
from lab.symbols.base import Symbol
from lab.symbols.stock import product_symbol

logger = structlog.get_logger(__name__)

MultiIndex = Dict[int, int]

SUPPORT_WINDOW = 8
MAX_SUPPORT = 3
RANDOM_MULTI_INDICES = 16
RATIO_SLACK = 1e-9

# auxiliary random streams
_GRID, _DIRECTIONS, _PAIRS, _MULTI = 101, 102, 103, 104


def default_multi_indices(dim: int, depth: int, seed: int = 0) -> List[MultiIndex]:
    """Depth-m multi-indices on at most three of the first eight indices, plus random sparse ones."""
    indices: List[MultiIndex] = [{}]
    if depth == 0:
        return indices
    window = range(min(SUPPORT_WINDOW, dim))
    for size in range(1, MAX_SUPPORT + 1):
        for support in itertools.combinations(window, size):
            for counts in itertools.product(range(1, depth + 1), repeat=size):
                indices.append(dict(zip(support, counts)))
    rng = spawn_rng(seed, _MULTI)
    for _ in range(RANDOM_MULTI_INDICES):
        size = int(rng.integers(1, min(5, dim) + 1))
        support = sorted(rng.choice(dim, size=size, replace=False).tolist())
        counts = rng.integers(1, depth + 1, size=size).tolist()
        indices.append(dict(zip(support, counts)))
    return indices


class SymbolCheckService:
    """Witnesses for S_m(B, eps) and S(Q_A) claims."""

    def __init__(self, seed: int = 0):
        self.logger = logger.bind(service="symbol_checks")
        self.seed = seed

    def random_points(self, dim: int, count: int, stream: int = _GRID, scale: float = 1.0) -> FloatArray:
        """Seeded evaluation grid whose first point is the origin."""
        points = scale * spawn_rng(self.seed, stream).standard_normal((count, dim))
        points[0] = 0.0
        return points

    def _unit_directions(self, dim: int, count: int, stream: int) -> FloatArray:
        raw = spawn_rng(self.seed, stream).standard_normal((count, dim))
        return raw / np.linalg.norm(raw, axis=1, keepdims=True)

    def _require_smeps(self, f: Symbol) -> None:
        if not f.claim.has_smeps:
            raise InvalidArgumentError(f"{f.label} carries no S_m(B, eps) claim")
        if not f.certified:
            self.logger.warning("Checking an uncertified symbol", symbol=f.label)

    def _require_qa(self, f: Symbol) -> None:
        if not f.claim.has_qa:
            raise InvalidArgumentError(f"{f.label} carries no S(Q_A) claim")
        if not f.certified:
            self.logger.warning("Checking an uncertified symbol", symbol=f.label)

    def smeps_norm_lower_bound(
        self,
        f: Symbol,
        frame: OrthonormalFrame,
        eps: EpsilonSequence,
        m: int,
        grid: np.ndarray,
        multi_indices: Optional[Sequence[MultiIndex]] = None,
    ) -> float:
        """Max over sampled (x, alpha) of |d^alpha F(x)| / prod eps_j^alpha_j; +inf when eps_j = 0 is witnessed."""
        if eps.dim != frame.dim or frame.dim != f.dim:
            raise InvalidArgumentError("symbol, frame and epsilon dimensions differ")
        points = np.asarray(grid, dtype=float).reshape(-1, f.dim)
        candidates = multi_indices if multi_indices is not None else default_multi_indices(f.dim, m, self.seed)
        best = 0.0
        for alpha in candidates:
            order = sum(alpha.values())
            if any(count > m for count in alpha.values()):
                continue
            if f.max_order is not None and order > f.max_order:
                continue
            dirs = [frame.vector(j) for j, count in sorted(alpha.items()) for _ in range(count)]
            values = np.abs(f.derivative_rows(points, dirs))
            peak = float(np.max(values, initial=0.0))
            if peak == 0.0:
                continue
            weights = [eps.values[j] ** count for j, count in alpha.items()]
            denominator = math.prod(weights)
            if denominator == 0.0:
                self.logger.info("Infinite norm witnessed", symbol=f.label, multi_index=alpha)
                return math.inf
            best = max(best, peak / denominator)
        return best

    def qa_membership_check(
        self,
        f: Symbol,
        operator: TraceClassOperator,
        claimed_norm: float,
        m_max: int,
        trials: int,
        seed: Optional[int] = None,
    ) -> ExperimentReport:
        """|d^m f(x)(U_1..U_m)| <= claimed prod Q_A(U_j)^{1/2} and |f| <= claimed on random samples."""
        seed = self.seed if seed is None else seed
        rng = spawn_rng(seed, _DIRECTIONS)
        points = 2.0 * rng.standard_normal((trials, f.dim))
        points[0] = 0.0
        params = {"claimed_norm": float(claimed_norm), "trials": float(trials)}

        def ratio(values: np.ndarray, scale: np.ndarray) -> float:
            values = np.abs(values)
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(scale > 0, values / np.where(scale > 0, scale, 1.0), np.where(values > 0, np.inf, 0.0))
            return float(np.max(out, initial=0.0))

        rows = [
            ReportRow.compare(
                "m=0",
                ratio(f.evaluate(points), np.full(trials, claimed_norm)),
                1.0,
                tolerance=RATIO_SLACK,
                params={**params, "m": 0.0},
            )
        ]
        for m in range(1, m_max + 1):
            dirs = [rng.standard_normal((trials, f.dim)) for _ in range(m)]
            scale = np.full(trials, float(claimed_norm))
            for u in dirs:
                scale = scale * np.sqrt(q_form_rows(operator, u))
            worst = ratio(f.derivative_rows(points, dirs), scale)
            rows.append(ReportRow.compare(f"m={m}", worst, 1.0, tolerance=RATIO_SLACK, params={**params, "m": float(m)}))
        worst_ratio = max(row.measured for row in rows)
        self.logger.info("Q_A membership sampled", symbol=f.label, worst_ratio=worst_ratio)
        return ExperimentReport(
            check_id="qa_membership",
            operation="qa_membership_check",
            rows=rows,
            metadata={"symbol": f.label, "worst_ratio": worst_ratio, "seed": seed, "trace": operator.trace},
        )

    def smeps_claim_check(
        self, f: Symbol, frame: OrthonormalFrame, grid_size: int = 16
    ) -> ExperimentReport:
        """Witnessed lower bound of ||F||_{m,eps} against the claim."""
        self._require_smeps(f)
        claim = f.claim
        grid = self.random_points(f.dim, grid_size)
        witness = self.smeps_norm_lower_bound(f, frame, claim.eps, claim.depth or 0, grid)
        row = ReportRow.compare(
            f.label, witness, claim.smeps_norm, tolerance=RATIO_SLACK * max(1.0, claim.smeps_norm),
            params={"depth": float(claim.depth or 0)},
        )
        return ExperimentReport(
            check_id="smeps_claim", operation="smeps_norm_lower_bound", rows=[row],
            metadata={"symbol": f.label, "grid_size": grid_size},
        )

    def taylor_form_bound_check(
        self, f: Symbol, k: int, samples: int, frame: Optional[OrthonormalFrame] = None
    ) -> ExperimentReport:
        """|Phi_j(x)(Y..)| <= 2^j ||F|| prod |Y_s| (sum eps^2)^{j/2}, plus the basis-free variant, j <= k."""
        self._require_smeps(f)
        claim = f.claim
        if k > (claim.depth or 0):
            raise InvalidArgumentError(f"order {k} exceeds claimed depth {claim.depth}")
        frame = frame or OrthonormalFrame.canonical(f.dim)
        sum_sq = claim.eps.group_sum_sq(frame)
        total = claim.eps.group_sum(frame)
        operator = ba_operator(claim.eps)
        points = self.random_points(f.dim, samples)
        rng = spawn_rng(self.seed, _DIRECTIONS, k)
        rows = []
        for j in range(1, k + 1):
            ys = [rng.standard_normal((samples, f.dim)) / math.sqrt(f.dim) for _ in range(j)]
            values = np.abs(f.derivative_rows(points, ys))
            lengths = np.prod([np.linalg.norm(y, axis=1) for y in ys], axis=0)
            bound = 2.0 ** j * claim.smeps_norm * lengths * sum_sq ** (j / 2.0)
            rows.append(self._ratio_row(f"k={j}", values, bound, {"k": float(j)}))
            if j <= 3:
                a_lengths = np.prod([np.sqrt(q_form_rows(operator, y)) for y in ys], axis=0)
                free = 2.0 ** j * claim.smeps_norm * total ** (j / 2.0) * a_lengths
                rows.append(self._ratio_row(f"k={j} basis-free", values, free, {"k": float(j)}))
        return ExperimentReport(
            check_id="taylor_form_bound", operation="taylor_form_bound_check", rows=rows,
            metadata={"symbol": f.label, "samples": samples},
        )

    @staticmethod
    def _ratio_row(label: str, values: np.ndarray, bound: np.ndarray, params: Dict[str, float]) -> ReportRow:
        """Row comparing the worst measured/bound ratio with 1."""
        values = np.abs(np.asarray(values))
        bound = np.asarray(bound, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(bound > 0, values / np.where(bound > 0, bound, 1.0), np.where(values > 1e-300, np.inf, 0.0))
        return ReportRow.compare(label, float(np.max(ratios, initial=0.0)), 1.0, tolerance=RATIO_SLACK, params=params)

    def _pairs(self, dim: int, count: int) -> tuple:
        rng = spawn_rng(self.seed, _PAIRS)
        x = rng.standard_normal((count, dim))
        scales = np.array([1e-3, 0.1, 1.0, 5.0])[np.arange(count) % 4]
        v = scales[:, None] * rng.standard_normal((count, dim)) / math.sqrt(dim)
        v[0] = 0.0
        return x, v

    def lipschitz_residual_check(
        self, f: Symbol, pairs: int, frame: Optional[OrthonormalFrame] = None
    ) -> ExperimentReport:
        """|F(X+V) - F(X)| <= ||F||_{1,eps} |V| sqrt(2) (sum eps^2)^{1/2}."""
        self._require_smeps(f)
        frame = frame or OrthonormalFrame.canonical(f.dim)
        claim = f.claim
        x, v = self._pairs(f.dim, pairs)
        values = np.abs(f.evaluate(x + v) - f.evaluate(x))
        bound = claim.smeps_norm * np.linalg.norm(v, axis=1) * math.sqrt(2.0 * claim.eps.group_sum_sq(frame))
        return ExperimentReport(
            check_id="lipschitz", operation="lipschitz_residual_check",
            rows=[self._ratio_row("lipschitz", values, bound, {"pairs": float(pairs)})],
            metadata={"symbol": f.label},
        )

    def frechet_remainder_check(
        self, f: Symbol, samples: int, frame: Optional[OrthonormalFrame] = None
    ) -> ExperimentReport:
        """|F(X+Y) - F(X) - dF(X)Y| <= ||F|| sum eps^2 (1 + 2 sqrt 2) |Y|^2."""
        self._require_smeps(f)
        if (f.claim.depth or 0) < 2:
            raise InvalidArgumentError("Frechet remainder needs an S_2 claim")
        frame = frame or OrthonormalFrame.canonical(f.dim)
        claim = f.claim
        x, y = self._pairs(f.dim, samples)
        values = np.abs(f.evaluate(x + y) - f.evaluate(x) - f.derivative_rows(x, [y]))
        bound = claim.smeps_norm * claim.eps.group_sum_sq(frame) * (1.0 + 2.0 * math.sqrt(2.0)) * np.sum(y * y, axis=1)
        return ExperimentReport(
            check_id="frechet_remainder", operation="frechet_remainder_check",
            rows=[self._ratio_row("remainder", values, bound, {"samples": float(samples)})],
            metadata={"symbol": f.label},
        )

    def frechet_derivative_check(
        self, f: Symbol, directions: int = 4, grid_size: int = 8, frame: Optional[OrthonormalFrame] = None
    ) -> ExperimentReport:
        """Witnessed ||x -> dF(x)Y||_{m-1,eps} <= 2 ||F|| |Y| (sum eps^2)^{1/2}."""
        self._require_smeps(f)
        frame = frame or OrthonormalFrame.canonical(f.dim)
        claim = f.claim
        depth = max((claim.depth or 1) - 1, 0)
        grid = self.random_points(f.dim, grid_size)
        ys = self._unit_directions(f.dim, directions, _DIRECTIONS) * np.linspace(0.5, 2.0, directions)[:, None]
        rows = []
        for i, y in enumerate(ys):
            witness = self.smeps_norm_lower_bound(f.directional_symbol(y), frame, claim.eps, depth, grid)
            bound = 2.0 * claim.smeps_norm * float(np.linalg.norm(y)) * math.sqrt(claim.eps.group_sum_sq(frame))
            rows.append(ReportRow.compare(f"Y{i}", witness, bound, tolerance=RATIO_SLACK * bound, params={"norm_y": float(np.linalg.norm(y))}))
        return ExperimentReport(
            check_id="frechet_derivative", operation="frechet_derivative_check", rows=rows,
            metadata={"symbol": f.label, "depth": depth},
        )

    def ba_continuity_check(
        self, f: Symbol, pairs: int, frame: Optional[OrthonormalFrame] = None
    ) -> ExperimentReport:
        """Continuity in the measurable norms ||.||_A of each claimed class."""
        frame = frame or OrthonormalFrame.canonical(f.dim)
        claim = f.claim
        if not (claim.has_smeps or claim.has_qa):
            raise InvalidArgumentError(f"{f.label} carries no class claim")
        x, v = self._pairs(f.dim, pairs)
        values = np.abs(f.evaluate(x + v) - f.evaluate(x))
        rows = []
        if claim.has_smeps:
            a_norm = np.sqrt(q_form_rows(ba_operator(claim.eps), v))
            bound = claim.smeps_norm * math.sqrt(2.0 * claim.eps.group_sum(frame)) * a_norm
            rows.append(self._ratio_row("smeps", values, bound, {"pairs": float(pairs)}))
        if claim.has_qa:
            bound = claim.qa_norm * np.sqrt(q_form_rows(claim.qa_operator, v))
            rows.append(self._ratio_row("qa", values, bound, {"pairs": float(pairs)}))
        return ExperimentReport(
            check_id="ba_continuity", operation="ba_continuity_check", rows=rows, metadata={"symbol": f.label}
        )

    def derivative_descent_check(
        self, f: Symbol, frame: Optional[OrthonormalFrame] = None, indices: int = 4, grid_size: int = 8
    ) -> ExperimentReport:
        """||d F / d u_i||_{m-1,eps} witness <= eps_i ||F||_{m,eps} + 1e-9."""
        self._require_smeps(f)
        frame = frame or OrthonormalFrame.canonical(f.dim)
        claim = f.claim
        depth = max((claim.depth or 1) - 1, 0)
        grid = self.random_points(f.dim, grid_size)
        rows = []
        for i in range(min(indices, f.dim)):
            partial = f.directional_symbol(frame.vector(i))
            witness = self.smeps_norm_lower_bound(partial, frame, claim.eps, depth, grid)
            bound = float(claim.eps.values[i]) * claim.smeps_norm
            rows.append(ReportRow.compare(f"i={i}", witness, bound, tolerance=RATIO_SLACK, params={"i": float(i)}))
        return ExperimentReport(
            check_id="derivative_descent", operation="derivative_descent_check", rows=rows,
            metadata={"symbol": f.label, "depth": depth},
        )

    def product_bound_check(
        self, f: Symbol, g: Symbol, m_max: int, trials: int, frame: Optional[OrthonormalFrame] = None
    ) -> ExperimentReport:
        """f g in S(Q_{2(A+B)}) with norm ||f|| ||g||; in S_m(eps + delta) with norm ||F|| ||G||."""
        product = product_symbol(f, g)
        claim = product.claim
        rows: List[ReportRow] = []
        if claim.has_qa:
            report = self.qa_membership_check(product, claim.qa_operator, claim.qa_norm, m_max, trials)
            rows.extend(r.model_copy(update={"label": f"qa {r.label}"}) for r in report.rows)
        if claim.has_smeps:
            frame = frame or OrthonormalFrame.canonical(f.dim)
            witness = self.smeps_norm_lower_bound(
                product, frame, claim.eps, claim.depth or 0, self.random_points(f.dim, 8)
            )
            rows.append(ReportRow.compare("smeps", witness, claim.smeps_norm, tolerance=RATIO_SLACK))
        if not rows:
            raise InvalidArgumentError("product carries no class claim to check")
        return ExperimentReport(
            check_id="product_bound", operation="product_bound_check", rows=rows,
            metadata={"symbol": product.label},
        )

    def laplacian_norm_check(
        self, f: Symbol, m_max: int, trials: int, frame: Optional[OrthonormalFrame] = None
    ) -> ExperimentReport:
        """||Delta f||_{Q_A} <= Tr(A) ||f||_{Q_A}; ||Delta F||_{m-2,eps} <= 2 sum eps^2 ||F||_{m,eps}."""
        claim = f.claim
        lap = f.laplacian_symbol()
        rows: List[ReportRow] = []
        if claim.has_qa:
            operator = claim.qa_operator
            report = self.qa_membership_check(lap, operator, operator.trace * claim.qa_norm, m_max, trials)
            rows.extend(r.model_copy(update={"label": f"qa {r.label}"}) for r in report.rows)
        if claim.has_smeps and (claim.depth or 0) >= 2:
            frame = frame or OrthonormalFrame.canonical(f.dim)
            witness = self.smeps_norm_lower_bound(
                lap, frame, claim.eps, claim.depth - 2, self.random_points(f.dim, 8)
            )
            bound = 2.0 * claim.eps.group_sum_sq(frame) * claim.smeps_norm
            rows.append(ReportRow.compare("smeps", witness, bound, tolerance=RATIO_SLACK))
        if not rows:
            raise InvalidArgumentError(f"{f.label} carries no class claim to check")
        return ExperimentReport(
            check_id="laplacian_norm", operation="laplacian_norm_check", rows=rows, metadata={"symbol": f.label}
        )

    def chain_rule_check(self, f: Symbol, trials: int) -> ExperimentReport:
        """Analytic directional derivatives against central differences (orders 1 and 2)."""
        points = self.random_points(f.dim, trials)
        dirs = self._unit_directions(f.dim, 2 * trials, _DIRECTIONS)
        rows = []
        for order, step in ((1, 1e-5), (2, 1e-3)):
            worst = 0.0
            for i, x in enumerate(points):
                us = [dirs[(2 * i + s) % len(dirs)] for s in range(order)]
                exact = f.derivative(x, us)
                approx = finite_difference(f, x, us, step=step)
                worst = max(worst, abs(exact - approx) / (1.0 + abs(exact)))
            rows.append(ReportRow.compare(f"order={order}", worst, 1e-6, params={"order": float(order), "step": step}))
        return ExperimentReport(
            check_id="chain_rule", operation="chain_rule_check", rows=rows, metadata={"symbol": f.label}
        )

    def multilinearity_check(self, f: Symbol, trials: int, order: int = 2) -> ExperimentReport:
        """d^m F(x) is symmetric under permutations and linear under scaling."""
        points = self.random_points(f.dim, trials)
        dirs = [self._unit_directions(f.dim, trials, _DIRECTIONS + s + 1) for s in range(order)]
        base = f.derivative_rows(points, dirs)
        scale = np.maximum(1.0, np.abs(base))
        symmetric = 0.0
        for perm in itertools.permutations(range(order)):
            permuted = f.derivative_rows(points, [dirs[p] for p in perm])
            symmetric = max(symmetric, float(np.max(np.abs(permuted - base) / scale)))
        scaled = f.derivative_rows(points, [2.5 * dirs[0]] + dirs[1:])
        linear = float(np.max(np.abs(scaled - 2.5 * base) / scale))
        return ExperimentReport(
            check_id="multilinearity",
            operation="multilinearity_check",
            rows=[
                ReportRow.compare("symmetry", symmetric, 1e-9, params={"order": float(order)}),
                ReportRow.compare("scaling", linear, 1e-9, params={"order": float(order)}),
            ],
            metadata={"symbol": f.label},
        )

    def laplacian_basis_independence_check(self, f: Symbol, points: int, seed: Optional[int] = None) -> ExperimentReport:
        """Laplacian in the canonical frame vs a randomly rotated frame vs the closed form."""
        seed = self.seed if seed is None else seed
        grid = self.random_points(f.dim, points)
        canonical = OrthonormalFrame.canonical(f.dim)
        rotated = canonical.rotated(random_orthogonal(f.dim, seed))
        frame_gap = closed_gap = 0.0
        for x in grid:
            in_canonical = laplacian(f, x, canonical)
            in_rotated = laplacian(f, x, rotated)
            closed = laplacian(f, x)
            scale = 1.0 + abs(closed)
            frame_gap = max(frame_gap, abs(in_canonical - in_rotated) / scale)
            closed_gap = max(closed_gap, abs(in_canonical - closed) / scale)
        return ExperimentReport(
            check_id="laplacian_basis_independence",
            operation="laplacian",
            rows=[
                ReportRow.compare("canonical-vs-rotated", frame_gap, 1e-9, params={"points": float(points)}),
                ReportRow.compare("frame-vs-closed-form", closed_gap, 1e-9, params={"points": float(points)}),
            ],
            metadata={"symbol": f.label, "seed": seed},
        )
