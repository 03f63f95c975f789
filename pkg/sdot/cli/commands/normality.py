import argparse
import logging
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from sdot.core.config import Settings
from sdot.core.exceptions import ConfigError
from sdot.services.diagnostics import NormalityStats, normality_stats
from sdot.services.experiment import FLOAT_FORMAT, eps_tag, read_manifest

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("normality", help="Histogram the replicated terminal values of a run")
    parser.add_argument("--run-dir", required=True, type=Path, help="Directory written by `sdot run`")
    parser.add_argument("--n", type=int, default=None, help="Snapshot to use (default: the last one)")
    parser.add_argument("--bins", type=int, default=20, help="Histogram bins")
    parser.add_argument("--out", type=Path, default=None, help="Output directory (default: the run directory)")
    parser.set_defaults(handler=handle)


def standardized_values(runs: pd.DataFrame, n: int, W_eps: float) -> pd.DataFrame:
    """sqrt(n) (W_n - W_eps) / sigma_n and n |V_n - v*|^2 per replication at snapshot n."""
    at_n = runs[runs["n"] == n].copy()
    sigma = np.sqrt(at_n["sigma2_hat"].to_numpy(dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        at_n["w_tilde"] = np.sqrt(n) * (at_n["w_hat"].to_numpy(dtype=float) - W_eps) / sigma
    at_n["scaled_v_err"] = n * at_n["v_err_sq"]
    return at_n


def _histogram(stats: NormalityStats) -> pd.DataFrame:
    edges = stats.bin_edges
    return pd.DataFrame({"bin_left": edges[:-1], "bin_right": edges[1:], "count": stats.counts})


def handle(args: argparse.Namespace, settings: Settings) -> int:
    manifest = read_manifest(args.run_dir)
    out_dir: Path = args.out or args.run_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    summary: List[dict] = []
    for truth in manifest.truth:
        tag = eps_tag(truth.eps)
        path = args.run_dir / f"runs_{tag}.csv"
        if not path.exists():
            raise ConfigError(f"missing run table {path}")
        runs = pd.read_csv(path)
        n: Optional[int] = args.n if args.n is not None else int(runs["n"].max())
        if n not in set(runs["n"]):
            raise ConfigError(f"snapshot n={n} is not in {path.name}")

        values = standardized_values(runs, n, truth.W_eps)
        for algorithm, group in values.groupby("algorithm", sort=True):
            for statistic in ("w_tilde", "scaled_v_err"):
                column = group[statistic].dropna()
                if column.empty:
                    continue
                stats = normality_stats(column.to_numpy(), bins=args.bins)
                _histogram(stats).to_csv(
                    out_dir / f"normality_{tag}_{algorithm}_{statistic}.csv", index=False, float_format=FLOAT_FORMAT
                )
                summary.append(
                    {
                        "eps": truth.eps,
                        "algorithm": algorithm,
                        "n": n,
                        "statistic": statistic,
                        "count": stats.count,
                        "mean": stats.mean,
                        "std": stats.std,
                        "ks_statistic": stats.ks_statistic,
                    }
                )

    table = pd.DataFrame(summary)
    table.to_csv(out_dir / "normality_summary.csv", index=False, float_format=FLOAT_FORMAT)
    print(table.to_string(index=False) if not table.empty else "no replicated values found")
    return 0
