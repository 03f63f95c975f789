import argparse
import json
import logging
from pathlib import Path

import pandas as pd
from pydantic import ValidationError

from sdot.cli.options import add_config_arguments, load_with_overrides, resolve_seed, resolve_truth_cache
from sdot.core.config import Settings
from sdot.core.exceptions import CheckFailedError, ConfigError
from sdot.schemas.experiment import CheckSpec
from sdot.services.diagnostics import run_diagnostics
from sdot.services.experiment import build_instance, format_config_error, instance_truth

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("check", help="Run the diagnostics suite and print a pass/fail table")
    add_config_arguments(parser)
    parser.add_argument("--points", type=int, default=None, help="Random evaluation points per eps")
    parser.add_argument("--radius", type=float, default=None, help="Maximal |v - v*| of evaluation points")
    parser.add_argument("--json-out", type=Path, default=None, help="Write the reports as JSON")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace, settings: Settings) -> int:
    config = load_with_overrides(args.config, seed=resolve_seed(args.seed))
    overrides = {key: value for key, value in {"points": args.points, "radius": args.radius}.items() if value is not None}
    try:
        spec = CheckSpec.model_validate({**config.check.model_dump(), **overrides})
    except ValidationError as exc:
        raise ConfigError(f"invalid check options: {format_config_error(exc)}") from exc
    cache = resolve_truth_cache(args.truth, settings)
    instance = build_instance(config)

    reports = []
    for eps in config.eps:
        logger.info("Checking %d points within radius %g of v* at eps=%g", spec.points, spec.radius, eps)
        truth = instance_truth(config, instance, eps, cache)
        report = run_diagnostics(instance.evaluation, instance.target, truth, spec, config.cost)
        reports.append(report)
        table = pd.DataFrame(
            [
                {
                    "check": result.name,
                    "status": result.status.value,
                    "required": "yes" if result.required else "no",
                    "value": result.value,
                    "bound": result.bound,
                }
                for result in report.checks
            ]
        )
        print(f"eps={eps:g}")
        print(table.to_string(index=False))

    if args.json_out is not None:
        args.json_out.parent.mkdir(parents=True, exist_ok=True)
        args.json_out.write_text(json.dumps([report.model_dump(mode="json") for report in reports], indent=2))

    failed = sorted({result.name for report in reports for result in report.failed})
    if failed:
        raise CheckFailedError("required checks failed", {"checks": ", ".join(failed)})
    print("all required checks passed")
    return 0
