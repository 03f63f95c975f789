import argparse
import logging
from typing import Optional, Sequence

from pydantic import ValidationError

from sdot.cli.commands import check, normality, run, sinkhorn, version
from sdot.core.config import get_settings
from sdot.core.exceptions import SdotError
from sdot.core.logging import configure_logging

logger = logging.getLogger(__name__)

COMMANDS = (run, sinkhorn, check, normality, version)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdot",
        description="Stochastic semi-dual estimation of entropic semi-discrete optimal transport.",
    )
    parser.add_argument("--log-level", default=None, help="Overrides SDOT_LOG_LEVEL (default INFO)")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def cli(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point of the `sdot` command line.

    Returns:
        int: 0 on success, 1 on a failed check or runtime error, 2 on usage or config errors.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        settings = get_settings()
    except ValidationError as exc:
        configure_logging("INFO")
        logger.error("Invalid SDOT_* environment: %s", exc)
        return 2
    configure_logging(args.log_level or settings.log_level)

    try:
        return args.handler(args, settings)
    except SdotError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    except Exception:
        logger.exception("Unexpected failure in `%s`", args.command)
        return 1
