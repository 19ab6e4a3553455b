"""Command line entry point: ``mocsim <experiment-id> --config PATH ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..errors import ConfigError, InfeasibleError
from .config import EXPERIMENTS, load_config, make_config, with_overrides
from .experiments import run_experiment
from .report import emit_csv, plot_script, rows_to_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3

log = logging.getLogger("mocsim")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mocsim", description="Run a modulation-order confusion experiment.")
    p.add_argument("experiment", help="one of: " + ", ".join(EXPERIMENTS))
    p.add_argument("--config", type=Path, help="INI file with a section named after the experiment")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="CSV destination (default: stdout)")
    p.add_argument("--snr", help="SNR grid in dB as start:stop:step")
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int, help="process count for trial fan-out")
    p.add_argument("--plot-script", type=Path, help="also write a matplotlib script for the CSV")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.config is not None:
            cfg = load_config(args.config, args.experiment)
        else:
            cfg = make_config(args.experiment)
        cfg = with_overrides(cfg, snr=args.snr, seed=args.seed, trials=args.trials,
                             out=args.out, workers=args.workers)
        log.info("running %s over %d SNR points, %d trials each",
                 cfg.experiment_id, len(cfg.snr_points), cfg.trials)
        rows = run_experiment(cfg)
    except ConfigError as exc:
        print(f"mocsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"mocsim: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE

    if cfg.output_path:
        emit_csv(rows, cfg.output_path)
        if args.plot_script is not None:
            args.plot_script.write_text(plot_script(cfg.output_path), encoding="utf-8")
    else:
        sys.stdout.write(rows_to_csv(rows))
    bad = [r for r in rows if r.is_error]
    if bad:
        print(f"mocsim: {len(bad)} rows are infeasible (value nan)", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
