"""Run a config through the CLI and plot the aggregate regret curves.

    python3 scripts/regret_sweep.py configs/burst_sweep.cfg --runs 3
    python3 scripts/regret_sweep.py configs/changepoint.cfg
"""

import argparse
import sys
from pathlib import Path

from a2c2 import cli
from a2c2.config import parse_config


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--runs", type=int)
    ap.add_argument("--workers", type=int)
    args = ap.parse_args()

    argv = ["-v", "run", "--config", args.config]
    if args.runs:
        argv += ["--runs", str(args.runs)]
    if args.workers:
        argv += ["--workers", str(args.workers)]
    cfg = parse_config(Path(args.config).read_text())
    Path(cfg.aggregate_output).parent.mkdir(parents=True, exist_ok=True)
    code = cli.main(argv)
    if code:
        sys.exit(code)
    svg = str(Path(cfg.aggregate_output).with_suffix(".svg"))
    cli.main(["plot", cfg.aggregate_output, svg])
    print(Path(cfg.aggregate_output).read_text())
    print(f"plot written to {svg}")


if __name__ == "__main__":
    main()
