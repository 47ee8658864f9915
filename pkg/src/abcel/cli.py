"""Command-line entry points for running experiments.

    abcel run CONFIG [--out DIR] [--seed N] [--workers N]
    abcel coverage CONFIG [--out DIR] [--seed N] [--workers N]
    abcel grid CONFIG --theta-grid FILE [--evals N] [--out DIR] [--seed N]
    abcel export-plots DIR
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .harness import density_grid, export_plot_csvs, load_config, run_experiment


def _add_common(parser):
    parser.add_argument("config", help="experiment config file")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--workers", type=int, default=1, help="process count for repeats")


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _read_theta_grid(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in csv.reader(fh):
            if not line:
                continue
            try:
                rows.append([float(v) for v in line])
            except ValueError:
                continue  # header line
    if not rows:
        raise SystemExit(f"no numeric rows in theta grid file {path}")
    return np.array(rows)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="abcel", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the configured experiment")
    _add_common(p_run)

    p_cov = sub.add_parser("coverage", help="repeated-run coverage study")
    _add_common(p_cov)

    p_grid = sub.add_parser("grid", help="log-posterior over a parameter grid")
    _add_common(p_grid)
    p_grid.add_argument("--theta-grid", required=True, help="CSV of grid points, one theta per row")
    p_grid.add_argument("--evals", type=int, default=100, help="evaluations per grid point")

    p_exp = sub.add_parser("export-plots", help="emit plot-ready CSVs from a results directory")
    p_exp.add_argument("directory")

    args = parser.parse_args(argv)

    if args.command == "export-plots":
        for path in export_plot_csvs(args.directory):
            print(path)
        return 0

    cfg = _load(args)
    out = args.out or cfg.out or f"results/{cfg.name}"

    if args.command in ("run", "coverage"):
        result = run_experiment(cfg, out_dir=out, workers=args.workers)
        rep = result.report
        print(f"{cfg.name}: method={cfg.method} repeats={cfg.repeats}")
        print(f"  coverage    = {rep['coverage']}")
        print(f"  avg_length  = {rep['avg_length']}")
        print(f"  acceptance  = {rep['acceptance_rate']}")
        print(f"  runtime [s] = {rep['runtime']:.1f}")
        print(f"  outputs in {out}")
        return 0

    if args.command == "grid":
        thetas = _read_theta_grid(args.theta_grid)
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        grid_path = out_dir / "grid.csv"
        density_grid(cfg, thetas, evals_per_point=args.evals, out_path=grid_path)
        print(grid_path)
        return 0

    return 1


if __name__ == "__main__":
    sys.exit(main())
