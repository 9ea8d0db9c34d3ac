"""Experiment runner: maps operation selectors to named checks and emits reports."""

import hashlib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from config.settings import settings
from lab import __version__
from lab.core.gaussian import spawn_rng
from lab.core.geometry import coordinate_chain, random_orthogonal, rotated_chain
from lab.exceptions import InvalidArgumentError, LabError
from lab.models.experiment import ChainKind, CheckSummary, ExperimentConfig, Operation, RunManifest
from lab.models.heat import HeatMethod, HeatMethodKind
from lab.models.hilbert import EpsilonSequence, OrthonormalFrame, SubspaceChain, TraceClassOperator
from lab.models.reports import ExperimentReport, ReportRow
from lab.reporting.writer import ReportWriter
from lab.services.extension_service import ExtensionService
from lab.services.gaussian_checks import GaussianCheckService
from lab.services.heat_service import HeatService
from lab.services.symbol_checks import SymbolCheckService
from lab.symbols.base import Symbol
from lab.symbols.cylindrical import CylindricalSymbol
from lab.symbols.registry import build_epsilon, build_symbols
from lab.symbols.stock import constant_symbol

logger = structlog.get_logger(__name__)

PRESETS_DIR = Path(__file__).resolve().parents[2] / "config" / "presets"

# auxiliary streams under the experiment seed
_POINTS, _ROTATIONS, _NM, _PRODSCAL = 301, 302, 303, 304

NM_CASES = [((1,), ()), ((1, 1), (1,)), ((2,), (1,))]
NM_SHIFTS = (0.0, 1.0, 5.0)
NM_DIM = 4
HEAT_TIMES = (0.1, 1.0)
FD_TOLERANCE = 1e-4
ANALYTIC_TOLERANCE = 1e-6
SEMIGROUP_TOLERANCE = 1e-7
COVARIANCE_TOLERANCE = 1e-8
COMMUTATION_POINTS = 50
BASIS_INDEPENDENCE_POINTS = 20


class ExperimentContext:
    """Objects shared by the checks of one experiment."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.dim = config.dim
        self.eps: EpsilonSequence = build_epsilon(config.dim, config.eps_decay, config.eps_ratio)
        self.frame = OrthonormalFrame.canonical(config.dim)
        self.symbols: Dict[str, Symbol] = build_symbols(config.symbols, config.dim, self.eps)
        self.chain: SubspaceChain = self._chain()
        self.method = HeatMethod(
            kind=HeatMethodKind.QUADRATURE,
            quadrature_order=config.method.quadrature_order,
            mc_samples=config.method.mc_samples,
            seed=config.seed,
        )
        self.symbol_checks = SymbolCheckService(seed=config.seed)
        self.gaussian = GaussianCheckService(seed=config.seed, mc_samples=config.method.mc_samples)
        self.extension = ExtensionService(seed=config.seed, mc_samples=config.method.mc_samples)
        self.heat = HeatService(seed=config.seed, method=self.method)

    def _chain(self) -> SubspaceChain:
        spec = self.config.chain
        if spec.kind == ChainKind.ROTATED:
            return rotated_chain(self.dim, spec.sizes, spec.seed)
        return coordinate_chain(self.dim, spec.sizes)

    def points(self, count: int, stream: int = _POINTS, scale: float = 0.5) -> np.ndarray:
        return self.symbol_checks.random_points(self.dim, count, stream=stream, scale=scale)

    def smeps_symbols(self) -> List[Symbol]:
        return [f for f in self.symbols.values() if f.claim.has_smeps]

    def qa_symbols(self) -> List[Symbol]:
        return [f for f in self.symbols.values() if f.claim.has_qa]

    def bounded_symbols(self) -> List[Symbol]:
        return [f for f in self.symbols.values() if f.claim.norm_bound is not None]

    def heat_symbols(self) -> List[Symbol]:
        return [f for f in self.symbols.values() if isinstance(f, CylindricalSymbol)]


CheckHandler = Callable[[ExperimentContext], List[ExperimentReport]]


def _tag(report: ExperimentReport, *parts: Any) -> ExperimentReport:
    """Suffix the check id so that reports of one check stay distinct per symbol or parameter."""
    suffix = ".".join(str(p) for p in parts if p != "")
    if not suffix:
        return report
    return report.model_copy(update={"check_id": f"{report.check_id}.{suffix}"})


def _num(value: float) -> str:
    return f"{value:g}"


class ExperimentService:
    """Runs experiment configs and verification suites."""

    def __init__(self, out_dir: Optional[Path] = None, threads: Optional[int] = None):
        self.logger = logger.bind(service="experiment")
        self.out_dir = Path(out_dir or settings.output_dir)
        self.threads = threads or settings.threads
        self.check_handlers: Dict[Operation, List[Tuple[str, CheckHandler]]] = {}
        self._register_default_checks()

    def register_check(self, operation: Operation, check_id: str, handler: CheckHandler) -> None:
        """Register a named check under an operation selector."""
        self.check_handlers.setdefault(operation, []).append((check_id, handler))
        self.logger.debug("Check registered", operation=operation.value, check_id=check_id)

    def checks_for(self, config: ExperimentConfig) -> List[Tuple[str, CheckHandler]]:
        if config.operation == Operation.VERIFY_ALL:
            selected = [item for op in Operation if op != Operation.VERIFY_ALL for item in self.check_handlers.get(op, [])]
        else:
            selected = list(self.check_handlers.get(config.operation, []))
        if config.checks is not None:
            known = {name for name, _ in selected}
            unknown = sorted(set(config.checks) - known)
            if unknown:
                raise InvalidArgumentError(f"unknown checks for {config.operation.value}: {', '.join(unknown)}")
            selected = [(name, handler) for name, handler in selected if name in config.checks]
        return selected

    def run_checks(self, config: ExperimentConfig) -> List[ExperimentReport]:
        """Execute every selected check; failures become error reports."""
        context = ExperimentContext(config)
        reports: List[ExperimentReport] = []
        for name, handler in self.checks_for(config):
            log = self.logger.bind(experiment_id=config.experiment_id, check=name)
            try:
                produced = handler(context)
            except LabError as e:
                log.error("Check aborted", error=str(e))
                produced = [ExperimentReport(check_id=name, operation=name, error=str(e))]
            except Exception as e:
                log.error("Unexpected failure in check", error=str(e))
                produced = [ExperimentReport(check_id=name, operation=name, error=f"{type(e).__name__}: {e}")]
            if not produced:
                log.warning("Check produced no report; no symbol qualifies")
            for report in produced:
                reports.append(report.model_copy(update={"experiment_id": config.experiment_id}))
                log.info("Check finished", check_id=report.check_id, passed=report.passed)
        return reports

    def _summaries(self, writer: ReportWriter, experiment_id: str, reports: List[ExperimentReport]) -> List[CheckSummary]:
        summaries = []
        for report in reports:
            csv_path, json_path = writer.write_report(experiment_id, report)
            summaries.append(
                CheckSummary(
                    experiment_id=experiment_id,
                    check_id=report.check_id,
                    operation=report.operation,
                    passed=report.passed,
                    rows=len(report.rows),
                    error=report.error,
                    csv_path=csv_path.name,
                    json_path=json_path.name,
                )
            )
        return summaries

    def run(self, config: ExperimentConfig, out_dir: Optional[Path] = None) -> RunManifest:
        """Run one experiment, write its reports and manifest."""
        target = Path(out_dir or config.output_dir or self.out_dir)
        self.logger.info("Running experiment", experiment_id=config.experiment_id, operation=config.operation.value, seed=config.seed)
        reports = self.run_checks(config)
        writer = ReportWriter(target)
        manifest = RunManifest(
            config_hash=config.config_hash(),
            code_version=__version__,
            seed=config.seed,
            experiments=[config.experiment_id],
            checks=self._summaries(writer, config.experiment_id, reports),
        )
        writer.write_manifest(manifest)
        return manifest

    def load_presets(self, seed: int, presets_dir: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> List[ExperimentConfig]:
        directory = Path(presets_dir or PRESETS_DIR)
        paths = sorted(directory.glob("*.json"))
        if not paths:
            raise InvalidArgumentError(f"no presets under {directory}")
        return [ExperimentConfig.load(path, overrides={**(overrides or {}), "seed": seed}) for path in paths]

    def verify_all(
        self,
        seed: int,
        out_dir: Optional[Path] = None,
        presets_dir: Optional[Path] = None,
        overrides: Optional[Dict[str, Any]] = None,
    ) -> RunManifest:
        """Run every preset in a thread pool; the manifest follows preset order."""
        configs = self.load_presets(seed, presets_dir, overrides)
        self.logger.info("Running verification suite", presets=len(configs), seed=seed, threads=self.threads)
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            results = list(pool.map(self.run_checks, configs))

        writer = ReportWriter(Path(out_dir or self.out_dir))
        checks: List[CheckSummary] = []
        digest = hashlib.sha256()
        for config, reports in zip(configs, results):
            digest.update(config.config_hash().encode("ascii"))
            checks.extend(self._summaries(writer, config.experiment_id, reports))
        manifest = RunManifest(
            config_hash=digest.hexdigest(),
            code_version=__version__,
            seed=seed,
            experiments=[c.experiment_id for c in configs],
            checks=checks,
        )
        writer.write_manifest(manifest)
        if not manifest.passed:
            self.logger.warning("Verification suite has failures", failed=[c.check_id for c in manifest.failed_checks])
        return manifest

    def _register_default_checks(self) -> None:
        for operation, checks in (
            (Operation.CONSTANTS, [("constants", _constants)]),
            (Operation.WICK, [("wick", _wick)]),
            (Operation.MOMENTS, [("moments", _moments)]),
            (Operation.TRANSLATION, [("translation", _translation)]),
            (Operation.HOLDER, [("holder", _holder)]),
            (Operation.SYMBOLS, SYMBOL_CHECKS),
            (Operation.EXTEND, EXTEND_CHECKS),
            (Operation.HEAT, HEAT_CHECKS),
            (Operation.EXPAND, EXPAND_CHECKS),
        ):
            for check_id, handler in checks:
                self.register_check(operation, check_id, handler)


# gaussian-core

def _constants(ctx: ExperimentContext) -> List[ExperimentReport]:
    return [ctx.gaussian.constants_table(ctx.config.p_grid)]


def _wick(ctx: ExperimentContext) -> List[ExperimentReport]:
    return [ctx.gaussian.wick_check(h=ctx.config.h_grid[0], samples=10 * ctx.config.method.mc_samples)]


def _moments(ctx: ExperimentContext) -> List[ExperimentReport]:
    return [ctx.gaussian.moments_check()]


def _translation(ctx: ExperimentContext) -> List[ExperimentReport]:
    return [ctx.gaussian.translation_check()]


def _holder(ctx: ExperimentContext) -> List[ExperimentReport]:
    return [ctx.gaussian.holder_check(instances=5 * ctx.config.trials, ps=ctx.config.p_grid)]


# symbols

def _smeps_claims(ctx: ExperimentContext) -> List[ExperimentReport]:
    return [_tag(ctx.symbol_checks.smeps_claim_check(f, ctx.frame), f.label) for f in ctx.smeps_symbols()]


def _qa_membership(ctx: ExperimentContext) -> List[ExperimentReport]:
    reports = []
    for f in ctx.qa_symbols():
        m_max = 3 if f.max_order is None else min(3, f.max_order)
        report = ctx.symbol_checks.qa_membership_check(f, f.claim.qa_operator, f.claim.qa_norm, m_max, ctx.config.trials)
        reports.append(_tag(report, f.label))
    return reports


def _taylor_forms(ctx: ExperimentContext) -> List[ExperimentReport]:
    reports = []
    for f in ctx.smeps_symbols():
        k = min(ctx.config.taylor_order, f.claim.depth or 0, 3)
        if k >= 1:
            reports.append(_tag(ctx.symbol_checks.taylor_form_bound_check(f, k, ctx.config.trials, ctx.frame), f.label))
    return reports


def _lipschitz(ctx: ExperimentContext) -> List[ExperimentReport]:
    return [
        _tag(ctx.symbol_checks.lipschitz_residual_check(f, ctx.config.trials, ctx.frame), f.label)
        for f in ctx.smeps_symbols()
        if (f.claim.depth or 0) >= 1
    ]


def _frechet(ctx: ExperimentContext) -> List[ExperimentReport]:
    reports = []
    for f in ctx.smeps_symbols():
        if (f.claim.depth or 0) >= 2:
            reports.append(_tag(ctx.symbol_checks.frechet_remainder_check(f, ctx.config.trials, ctx.frame), f.label))
        if (f.claim.depth or 0) >= 1:
            reports.append(_tag(ctx.symbol_checks.frechet_derivative_check(f, frame=ctx.frame), f.label))
    return reports


def _ba_continuity(ctx: ExperimentContext) -> List[ExperimentReport]:
    return [
        _tag(ctx.symbol_checks.ba_continuity_check(f, ctx.config.trials, ctx.frame), f.label)
        for f in ctx.smeps_symbols()
        if (f.claim.depth or 0) >= 1
    ]


def _descent(ctx: ExperimentContext) -> List[ExperimentReport]:
    return [
        _tag(ctx.symbol_checks.derivative_descent_check(f, ctx.frame), f.label)
        for f in ctx.smeps_symbols()
        if (f.claim.depth or 0) >= 1
    ]


def _products(ctx: ExperimentContext) -> List[ExperimentReport]:
    claimed = [f for f in ctx.symbols.values() if f.claim.has_qa or f.claim.has_smeps]
    reports = []
    for f, g in zip(claimed, claimed[1:]):
        reports.append(_tag(ctx.symbol_checks.product_bound_check(f, g, 2, ctx.config.trials, ctx.frame), f.label, g.label))
    return reports


def _laplacian_norm(ctx: ExperimentContext) -> List[ExperimentReport]:
    return [
        _tag(ctx.symbol_checks.laplacian_norm_check(f, 2, ctx.config.trials, ctx.frame), f.label)
        for f in ctx.symbols.values()
        if f.claim.has_qa or (f.claim.has_smeps and (f.claim.depth or 0) >= 2)
    ]


def _chain_rule(ctx: ExperimentContext) -> List[ExperimentReport]:
    return [_tag(ctx.symbol_checks.chain_rule_check(f, ctx.config.trials), f.label) for f in ctx.symbols.values()]


def _multilinearity(ctx: ExperimentContext) -> List[ExperimentReport]:
    return [
        _tag(ctx.symbol_checks.multilinearity_check(f, ctx.config.trials), f.label)
        for f in ctx.symbols.values()
        if f.max_order is None or f.max_order >= 2
    ]


def _basis_independence(ctx: ExperimentContext) -> List[ExperimentReport]:
    return [
        _tag(ctx.symbol_checks.laplacian_basis_independence_check(f, BASIS_INDEPENDENCE_POINTS, seed=ctx.config.seed), f.label)
        for f in ctx.heat_symbols()
    ]


SYMBOL_CHECKS: List[Tuple[str, CheckHandler]] = [
    ("smeps_claim", _smeps_claims),
    ("qa_membership", _qa_membership),
    ("taylor_form", _taylor_forms),
    ("lipschitz", _lipschitz),
    ("frechet", _frechet),
    ("ba_continuity", _ba_continuity),
    ("derivative_descent", _descent),
    ("product_bound", _products),
    ("laplacian_norm", _laplacian_norm),
    ("chain_rule", _chain_rule),
    ("multilinearity", _multilinearity),
    ("basis_independence", _basis_independence),
]


# extension-lab

def _sm_rate(ctx: ExperimentContext) -> List[ExperimentReport]:
    reports: List[ExperimentReport] = []
    for f in ctx.smeps_symbols():
        for q in ctx.config.q_grid:
            for h in ctx.config.h_grid:
                report = ctx.extension.sm_rate_check(f, ctx.chain, q, h, ctx.frame)
                reports.append(_tag(report, f.label, f"q{_num(q)}", f"h{_num(h)}"))
                reports.append(_tag(ctx.extension.chain_monotonicity(report), f.label, f"q{_num(q)}", f"h{_num(h)}"))
    return reports


def _sm_cauchy(ctx: ExperimentContext) -> List[ExperimentReport]:
    h = ctx.config.h_grid[0]
    return [
        _tag(ctx.extension.sm_cauchy_check(f, ctx.chain, q, h, ctx.frame), f.label, f"q{_num(q)}")
        for f in ctx.smeps_symbols()
        for q in ctx.config.q_grid
    ]


def _qa_rate(ctx: ExperimentContext) -> List[ExperimentReport]:
    reports: List[ExperimentReport] = []
    for f in ctx.qa_symbols():
        for p in ctx.config.p_grid:
            for h in ctx.config.h_grid:
                report = ctx.extension.qa_rate_check(f, ctx.chain, p, h)
                reports.append(_tag(report, f.label, f"p{_num(p)}", f"h{_num(h)}"))
                reports.append(_tag(ctx.extension.chain_monotonicity(report), f.label, f"p{_num(p)}", f"h{_num(h)}"))
    return reports


def _qa_projection_moment(ctx: ExperimentContext) -> List[ExperimentReport]:
    E = ctx.chain.steps[len(ctx.chain.steps) // 2]
    h = ctx.config.h_grid[0]
    operators = [("geometric", TraceClassOperator.geometric(ctx.dim, ctx.config.lambda_ratio))]
    operators += [(f.label, f.claim.qa_operator) for f in ctx.qa_symbols() if f.claim.qa_operator.rank > 0]
    return [
        _tag(ctx.extension.qa_projection_moment_check(operator, E, p, h), name, f"p{_num(p)}")
        for name, operator in operators
        for p in ctx.config.p_grid
    ]


def _derivative_extension(ctx: ExperimentContext) -> List[ExperimentReport]:
    x = ctx.points(2)[1]
    h = ctx.config.h_grid[0]
    reports = []
    for f in ctx.qa_symbols():
        for k in (1, 2):
            if f.max_order is not None and f.max_order < k:
                continue
            for p in ctx.config.p_grid:
                reports.append(_tag(ctx.extension.derivative_extension_rate(f, x, k, ctx.chain, p, h), f.label, f"p{_num(p)}"))
    return reports


def _prodscal_cases(dim: int, seed: int) -> List[Tuple[np.ndarray, List[int]]]:
    """A decaying direction, plus a random one for two-factor products."""
    decaying = 0.8 * 0.5 ** np.arange(dim, dtype=float)
    other = spawn_rng(seed, _PRODSCAL).standard_normal(dim)
    other = 0.6 * other / np.linalg.norm(other) * (0.7 ** np.arange(dim, dtype=float))
    return [
        (decaying[None, :], [1]),
        (np.stack([decaying, other]), [1, 1]),
        (np.stack([decaying, other]), [2, 1]),
    ]


def _prodscal(ctx: ExperimentContext) -> List[ExperimentReport]:
    h = ctx.config.h_grid[0]
    reports = []
    for a_list, exponents in _prodscal_cases(ctx.dim, ctx.config.seed):
        case = "x".join(str(e) for e in exponents)
        for p in ctx.config.p_grid:
            reports.append(_tag(ctx.extension.prodscal_rate_check(a_list, exponents, ctx.chain, p, h), case, f"p{_num(p)}"))
            if p == 2 or exponents == [1]:
                reports.append(_tag(ctx.extension.prodscal_oracle_check(a_list, exponents, ctx.chain, p, h), case, f"p{_num(p)}"))
    return reports


def _nm_bound(ctx: ExperimentContext) -> List[ExperimentReport]:
    rng = spawn_rng(ctx.config.seed, _NM)
    h = ctx.config.h_grid[0]
    direction = rng.standard_normal(2 * NM_DIM)
    direction /= np.linalg.norm(direction)
    ys = [r * direction for r in NM_SHIFTS]
    reports = []
    for alpha, beta in NM_CASES:
        a_list = rng.standard_normal((len(alpha), NM_DIM)) / np.sqrt(NM_DIM)
        b_list = rng.standard_normal((len(beta), NM_DIM)) / np.sqrt(NM_DIM)
        case = "a" + "".join(map(str, alpha)) + "b" + "".join(map(str, beta))
        reports.append(_tag(ctx.extension.nm_bound_check(list(a_list), list(b_list), alpha, beta, h, ys), case))
    return reports


def _extended_taylor(ctx: ExperimentContext) -> List[ExperimentReport]:
    x = ctx.points(2)[1]
    h = ctx.config.h_grid[0]
    p = min(ctx.config.p_grid)
    reports = []
    for f in ctx.smeps_symbols():
        k = min(ctx.config.taylor_order, (f.claim.depth or 0) - 1)
        if k >= 1:
            reports.append(_tag(ctx.extension.extended_taylor_residual(f, x, k, ctx.chain, p, h, ctx.frame), f.label))
    return reports


def _contraction_property(ctx: ExperimentContext) -> List[ExperimentReport]:
    return [
        _tag(ctx.extension.contraction_property_check(f, ctx.config.p_grid, h), f.label, f"h{_num(h)}")
        for f in ctx.bounded_symbols()
        for h in ctx.config.h_grid
    ]


EXTEND_CHECKS: List[Tuple[str, CheckHandler]] = [
    ("sm_rate", _sm_rate),
    ("sm_cauchy", _sm_cauchy),
    ("qa_rate", _qa_rate),
    ("qa_projection_moment", _qa_projection_moment),
    ("derivative_extension", _derivative_extension),
    ("prodscal", _prodscal),
    ("nm_bound", _nm_bound),
    ("extended_taylor", _extended_taylor),
    ("contraction_property", _contraction_property),
]


# heat-semigroup

def _heat_grid(ctx: ExperimentContext, count: int = 10) -> np.ndarray:
    return ctx.points(count)


def _closed_forms(ctx: ExperimentContext) -> List[ExperimentReport]:
    reports = []
    for f in ctx.heat_symbols():
        _, exact = ctx.heat.heat_symbol(f, HEAT_TIMES[0])
        if exact:
            reports.append(_tag(ctx.heat.closed_form_check(f, _heat_grid(ctx), HEAT_TIMES), f.label))
    return reports


def _residual_report(check_id: str, operation: str, label: str, entries: Sequence[Tuple[str, float, float, Dict[str, float]]]) -> ExperimentReport:
    rows = [ReportRow.compare(name, residual, tolerance, params=params) for name, residual, tolerance, params in entries]
    return ExperimentReport(check_id=check_id, operation=operation, rows=rows, metadata={"symbol": label})


def _semigroup(ctx: ExperimentContext) -> List[ExperimentReport]:
    grid = _heat_grid(ctx, 4)
    reports = []
    for f in ctx.heat_symbols():
        entries = [
            (f"s={_num(s)} t={_num(t)} x{j}", ctx.heat.semigroup_residual(f, x, s, t), SEMIGROUP_TOLERANCE, {"s": s, "t": t})
            for s in ctx.config.s_grid
            for t in ctx.config.s_grid
            for j, x in enumerate(grid)
        ]
        reports.append(_tag(_residual_report("semigroup", "semigroup_residual", f.label, entries), f.label))
    return reports


def _commutation(ctx: ExperimentContext) -> List[ExperimentReport]:
    grid = _heat_grid(ctx, COMMUTATION_POINTS)
    t = ctx.config.t_grid[-1]
    reports = []
    for f in ctx.heat_symbols():
        entries = []
        for j, x in enumerate(grid):
            entries.append((f"analytic x{j}", ctx.heat.commutation_residual(f, x, t), ANALYTIC_TOLERANCE, {"t": t}))
            entries.append(
                (f"finite-difference x{j}", ctx.heat.commutation_residual(f, x, t, finite_difference_lhs=True), FD_TOLERANCE, {"t": t})
            )
        reports.append(_tag(_residual_report("commutation", "commutation_residual", f.label, entries), f.label))
    return reports


def _covariance(ctx: ExperimentContext) -> List[ExperimentReport]:
    grid = _heat_grid(ctx, 3)
    t = ctx.config.t_grid[-1]
    reports = []
    for f in ctx.heat_symbols():
        entries = []
        for r in range(10):
            phi = random_orthogonal(ctx.dim, ctx.config.seed * 1000 + _ROTATIONS + r)
            for j, x in enumerate(grid):
                entries.append((f"phi{r} x{j}", ctx.heat.covariance_residual(f, phi, x, t), COVARIANCE_TOLERANCE, {"t": t}))
        reports.append(_tag(_residual_report("covariance", "covariance_residual", f.label, entries), f.label))
    return reports


def _commutators(ctx: ExperimentContext) -> List[ExperimentReport]:
    t = ctx.config.t_grid[-1]
    sampled = ctx.method.model_copy(update={"kind": HeatMethodKind.MONTE_CARLO})
    reports = []
    for f in ctx.heat_symbols():
        reports.append(_tag(ctx.heat.commutator_check(f, _heat_grid(ctx, 5), t, (0, 1)), f.label))
        reports.append(_tag(ctx.heat.commutator_check(f, _heat_grid(ctx, 2), t, (0,), sampled), f.label))
    return reports


def _derivative_exchange(ctx: ExperimentContext) -> List[ExperimentReport]:
    grid = _heat_grid(ctx, 4)
    t = ctx.config.t_grid[-1]
    reports = []
    for f in ctx.heat_symbols():
        entries = []
        for name, index in (("d0", {0: 1}), ("d0d1", {0: 1, 1: 1})):
            if f.max_order is not None and sum(index.values()) > f.max_order:
                continue
            for j, x in enumerate(grid):
                residual = ctx.heat.derivative_exchange_residual(f, x, t, multi_index=index, frame=ctx.frame)
                entries.append((f"{name} x{j}", residual, SEMIGROUP_TOLERANCE, {"t": t}))
        reports.append(_tag(_residual_report("derivative_exchange", "derivative_exchange_residual", f.label, entries), f.label))
    return reports


def _heat_contraction(ctx: ExperimentContext) -> List[ExperimentReport]:
    grid = _heat_grid(ctx, ctx.config.trials)
    return [
        _tag(ctx.heat.contraction_check(f, grid, t), f.label, f"t{_num(t)}")
        for f in ctx.bounded_symbols()
        if isinstance(f, CylindricalSymbol)
        for t in HEAT_TIMES
    ]


def _linearity(ctx: ExperimentContext) -> List[ExperimentReport]:
    symbols = ctx.heat_symbols()
    if len(symbols) < 2:
        return []
    return [ctx.heat.linearity_check(symbols[0], symbols[1], (2.0, -0.5), _heat_grid(ctx, 5), ctx.config.t_grid[-1])]


def _heat_constants(ctx: ExperimentContext) -> List[ExperimentReport]:
    constant = constant_symbol(1.5, ctx.dim, label="constant")
    return [ctx.heat.constants_check(constant, ctx.points(2)[1], ctx.config.t_grid)]


def _agreement(ctx: ExperimentContext) -> List[ExperimentReport]:
    return [_tag(ctx.heat.quadrature_mc_agreement(f, _heat_grid(ctx, 3), HEAT_TIMES), f.label) for f in ctx.heat_symbols()]


def _heat_taylor(ctx: ExperimentContext) -> List[ExperimentReport]:
    xs = _heat_grid(ctx, 16)
    ys = ctx.points(16, stream=_POINTS + 10, scale=0.3)
    t = ctx.config.t_grid[-1]
    return [_tag(ctx.heat.heat_taylor_remainder_check(f, xs, ys, t), f.label) for f in ctx.qa_symbols()]


def _heat_norm(ctx: ExperimentContext) -> List[ExperimentReport]:
    t = ctx.config.t_grid[-1]
    return [
        _tag(ctx.heat.heat_norm_contraction(f, t, 2, ctx.config.trials), f.label)
        for f in ctx.qa_symbols()
        if isinstance(f, CylindricalSymbol)
    ]


HEAT_CHECKS: List[Tuple[str, CheckHandler]] = [
    ("closed_form", _closed_forms),
    ("semigroup", _semigroup),
    ("commutation", _commutation),
    ("covariance", _covariance),
    ("commutator", _commutators),
    ("derivative_exchange", _derivative_exchange),
    ("contraction", _heat_contraction),
    ("linearity", _linearity),
    ("heat_constants", _heat_constants),
    ("quadrature_mc_agreement", _agreement),
    ("heat_taylor_remainder", _heat_taylor),
    ("heat_norm_contraction", _heat_norm),
]


# generator and expansion

def _generator(ctx: ExperimentContext) -> List[ExperimentReport]:
    x = ctx.points(2)[1]
    return [
        _tag(ctx.heat.generator_check(f, x, ctx.config.delta_grid), f.label)
        for f in ctx.heat_symbols()
        if f.claim.has_qa or f.claim.has_smeps
    ]


def _expansion(ctx: ExperimentContext) -> List[ExperimentReport]:
    x = ctx.points(2)[1]
    return [
        _tag(ctx.heat.expansion_check(f, x, ctx.config.t_grid, ctx.config.expansion_order), f.label)
        for f in ctx.heat_symbols()
        if f.claim.has_qa or f.claim.has_smeps
    ]


EXPAND_CHECKS: List[Tuple[str, CheckHandler]] = [
    ("generator", _generator),
    ("expansion", _expansion),
]
