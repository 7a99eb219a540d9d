#!/usr/bin/env python3
"""
formrep: batch CLI for Hermitean quadratic forms on atomic direct integrals.

    python3 app.py represent config/models/position.json --no-timestamp --out -
    python3 app.py check oa --seed 1
    python3 app.py group s3 --seed 7
    python3 app.py group config/groups/z2.txt --coefficients 0,1

Exit codes: 0 success, 1 failed property or verdict, 2 usage or config error.
"""
import argparse
import dataclasses
import sys
from pathlib import Path

BASE_DIR = Path(__file__).parent
sys.path.insert(0, str(BASE_DIR / "src"))

from parameter import ParameterManager, Tolerances  # noqa: E402
from reports.commands import SUITES, cmd_check, cmd_group, cmd_represent, parse_coefficients  # noqa: E402
from reports.model_config import load_model_config  # noqa: E402
from reports.report_writer import ReportWriter  # noqa: E402
from utils.errors import ConfigError, FormRepError  # noqa: E402
from utils.log import get_logger, setup_logging  # noqa: E402

log = get_logger("cli")


def _override(tol: Tolerances, value) -> Tolerances:
    """--tolerance replaces the relative and representation tolerances."""
    if value is None:
        return tol
    try:
        return tol.merged({"relative": value, "representation": value})
    except ValueError as e:
        raise ConfigError(f"--tolerance: {e}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tolerance", type=float, default=None, help="relative/representation tolerance")
    common.add_argument("--seed", type=int, default=None, help="seed for generated samples (default: config or 0)")
    common.add_argument("--no-timestamp", action="store_true", help="omit the timestamp for byte-identical reruns")
    common.add_argument("--out", default=None, help="report path, '-' for stdout (default: reports/<date>_<cmd>.json)")
    common.add_argument("--workers", type=int, default=None, help="threads for fiber eigenproblems")
    common.add_argument("--verbose", action="store_true", help="DEBUG logging")

    ap = argparse.ArgumentParser(description="Representation checks for Hermitean quadratic forms")
    sub = ap.add_subparsers(dest="command", required=True)

    rep = sub.add_parser("represent", parents=[common], help="verify the spectral representation of sections")
    rep.add_argument("config", help="model config document (JSON)")

    chk = sub.add_parser("check", parents=[common], help="run one property suite")
    chk.add_argument("suite", choices=SUITES)
    chk.add_argument("config", nargs="?", default=None, help="model config (default: 8-atom random model)")

    grp = sub.add_parser("group", parents=[common], help="isotypic decomposition and invariant form report")
    grp.add_argument("group", help="shipped group name (z2, z3, z4, z6, s3, d4, q8) or Cayley table path")
    grp.add_argument("--coefficients", default=None, help="comma-separated c_g, e.g. '0,1' (default: random)")
    grp.add_argument("--side", choices=("right", "left"), default="right", help="translation side of T")
    return ap


def run(args, manager: ParameterManager) -> int:
    settings = manager.app_settings()
    reports = settings.get("reports", {})
    writer = ReportWriter(settings.get("timezone", "America/Toronto"), reports.get("directory", "reports"),
                          timestamp=not args.no_timestamp)
    workers = args.workers or int(settings.get("workers", 1))
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    tol = _override(manager.tolerances(), args.tolerance)

    if args.command == "represent":
        config = load_model_config(args.config, tol)
        config = dataclasses.replace(config, tolerances=_override(config.tolerances, args.tolerance))
        if args.seed is not None:
            config = dataclasses.replace(config, seed=args.seed)
        return cmd_represent(config, writer, args.out, workers)

    seed = 0 if args.seed is None else args.seed
    if args.command == "check":
        config = None
        if args.config:
            config = load_model_config(args.config, tol)
            config = dataclasses.replace(config, tolerances=_override(config.tolerances, args.tolerance), seed=seed)
        return cmd_check(args.suite, config, seed, tol, writer, args.out, workers)

    coefficients = parse_coefficients(args.coefficients) if args.coefficients else None
    return cmd_group(args.group, coefficients, seed, tol, writer, args.out, args.side, workers)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    setup_logging(args.verbose)
    try:
        return run(args, ParameterManager())
    except ConfigError as e:
        log.error("error: %s", e)
        return 2
    except FormRepError as e:
        log.error("error: %s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
