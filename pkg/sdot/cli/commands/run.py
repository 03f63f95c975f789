import argparse
import logging
from pathlib import Path

from sdot.cli.options import (
    add_config_arguments,
    load_with_overrides,
    parse_snapshots,
    resolve_output_dir,
    resolve_seed,
    resolve_threads,
    resolve_truth_cache,
)
from sdot.core.config import Settings
from sdot.services.experiment import run_experiment

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("run", help="Run the Monte-Carlo protocol and write CSV + manifest")
    add_config_arguments(parser)
    parser.add_argument("--out", type=Path, default=None, help="Output directory (default SDOT_OUTPUT_DIR or ./results)")
    parser.add_argument("--threads", type=int, default=None, help="Worker processes (default SDOT_THREADS)")
    parser.add_argument("--snapshots", default=None, help='Comma-separated iteration counts, e.g. "1e2,1e3,1e4"')
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace, settings: Settings) -> int:
    snapshots = parse_snapshots(args.snapshots) if args.snapshots else None
    config = load_with_overrides(args.config, seed=resolve_seed(args.seed), snapshots=snapshots)
    out_dir = resolve_output_dir(args.out, config, settings)
    threads = resolve_threads(args.threads, settings)

    outcome = run_experiment(config, out_dir, threads, resolve_truth_cache(args.truth, settings))
    for result in outcome.results:
        final = result.aggregate.groupby("algorithm", sort=True).tail(1)
        columns = ["algorithm", "n", "replications", "w_abs_err_mean", "v_err_sq_mean", "w_hat_mean"]
        print(f"eps={result.eps:g}  W_eps={result.truth.W_eps:.10g}")
        print(final[columns].to_string(index=False))
    print(f"outputs written to {outcome.out_dir}")
    return 0
