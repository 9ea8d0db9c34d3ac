"""Command-line entry point for the Wiener Heat Lab."""

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from config.logging import configure_logging, get_logger
from config.settings import settings
from lab import __version__
from lab.exceptions import ConfigInvalidError, LabError
from lab.models.experiment import ExperimentConfig, Operation, RunManifest
from lab.services.experiment_service import PRESETS_DIR, ExperimentService

logger = get_logger(__name__)

EXIT_PASSED, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2

GROUP_COMMANDS = [op.value for op in Operation if op != Operation.VERIFY_ALL]


def _add_common(parser: argparse.ArgumentParser, config_required: bool = False) -> None:
    parser.add_argument("--config", type=Path, required=config_required, help="Experiment config (JSON)")
    parser.add_argument("--seed", type=int, help="Master seed")
    parser.add_argument("--out", type=Path, help="Output directory")
    parser.add_argument("--mc-samples", dest="mc_samples", type=int, help="Monte Carlo samples per estimate")
    parser.add_argument("--quad-order", dest="quad_order", type=int, help="Gauss-Hermite nodes per dimension")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wienerlab",
        description="Numerical verification of Gaussian calculus, stochastic extensions and the heat semigroup.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", dest="log_level", help="Log level (default from settings)")
    commands = parser.add_subparsers(dest="command", required=True)
    for name in GROUP_COMMANDS:
        _add_common(commands.add_parser(name, help=f"Run the {name} checks (preset unless --config)"))
    _add_common(commands.add_parser("run", help="Run the experiment described by --config"), config_required=True)
    _add_common(commands.add_parser("verify-all", help="Run every preset (--config names a preset directory)"))
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    method: Dict[str, Any] = {}
    if args.mc_samples is not None:
        method["mc_samples"] = args.mc_samples
    if args.quad_order is not None:
        method["quadrature_order"] = args.quad_order
    if method:
        overrides["method"] = method
    return overrides


def _print_summary(manifest: RunManifest, out_dir: Path) -> None:
    for check in manifest.checks:
        status = "PASS" if check.passed else ("ERROR" if check.error else "FAIL")
        print(f"{status:5} {check.experiment_id}/{check.check_id}")
    failed = len(manifest.failed_checks)
    print(f"{len(manifest.checks) - failed}/{len(manifest.checks)} checks passed; reports in {out_dir}")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(level=args.log_level)
    out_dir = args.out
    service = ExperimentService(out_dir=out_dir)
    overrides = _overrides(args)
    try:
        if args.command == "verify-all":
            seed = overrides.pop("seed", 0)
            manifest = service.verify_all(seed, out_dir=out_dir, presets_dir=args.config, overrides=overrides)
        else:
            path = args.config or PRESETS_DIR / f"{args.command}.json"
            config = ExperimentConfig.load(path, overrides=overrides)
            if args.command != "run" and config.operation.value != args.command:
                config = config.model_copy(update={"operation": Operation(args.command)})
            manifest = service.run(config, out_dir=out_dir)
    except ConfigInvalidError as e:
        logger.error("Invalid configuration", error=str(e), field=e.field, line=e.line)
        print(f"config invalid: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except LabError as e:
        logger.error("Run aborted", error=str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILED

    _print_summary(manifest, Path(out_dir or settings.output_dir))
    return EXIT_PASSED if manifest.passed else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
