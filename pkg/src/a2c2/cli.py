"""Command-line front end.

    a2c2 run --config exp.cfg [--runs 5] [--set adversary.n_bursts=3]
    a2c2 bounds --models alpha_unaware,no_sensing_reference --M-range 2:16 --K 10 --T 1e6 --attack 0.7
    a2c2 plot aggregate.csv regret.svg
    a2c2 probe-sync --M 2 --K 2 --T 400 --trials 10000

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import harness
from .config import ConfigError, ExperimentConfig, build_config, read_entries

log = logging.getLogger("a2c2")

USAGE, RUNTIME = 1, 2

# flag name -> config key; flags override values read from --config
_FLAGS = {
    "protocols": "protocols",
    "M": "M",
    "K": "K",
    "T": "T",
    "horizons": "horizons",
    "runs": "runs",
    "seed": "seed",
    "epsilon_step": "epsilon_step",
    "checkpoints": "checkpoints",
    "workers": "workers",
    "output": "output",
    "aggregate_output": "aggregate_output",
}


def environment_label(cfg: ExperimentConfig, T: int) -> str:
    return f"{cfg.adversary}(T={T})"


def run_reports(cfg: ExperimentConfig) -> list[harness.RegretReport]:
    reports = []
    for T in cfg.horizon_list():
        for protocol in cfg.protocols:
            spec = harness.RunSpec(
                protocol=protocol,
                M=cfg.M,
                K=cfg.K,
                T=T,
                adversary=cfg.adversary,
                adversary_params=dict(cfg.adversary_params),
                params_inputs=cfg.params_inputs(protocol),
                runs=cfg.runs,
                seed=cfg.seed,
                checkpoints=cfg.checkpoints,
                workers=cfg.workers,
                environment=environment_label(cfg, T),
            )
            log.info("running %s at T=%d (%d runs)", protocol, T, cfg.runs)
            reports.append(harness.monte_carlo(spec))
    return reports


def _check_writable(path: str):
    parent = Path(path).resolve().parent
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise OSError(f"cannot write to {path}")


def cmd_run(cfg: ExperimentConfig) -> int:
    if cfg.runs < 1:
        return USAGE
    try:
        for p in (cfg.output, cfg.aggregate_output):
            _check_writable(p)
        reports = run_reports(cfg)
        harness.write_reports(reports, cfg.output, cfg.aggregate_output)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return RUNTIME
    return 0


BOUND_COLUMNS = ("model", "M", "K", "T", "attack_param", "bound")


def bound_rows(models, M_values, K: int, T: float, attack_values, eps: float = 0.01) -> list[list]:
    rows = []
    for model in models:
        for M in M_values:
            for a in attack_values:
                rows.append([model, M, K, T, a, harness.theory_bound(model, M, K, T, a, eps)])
    return rows


def cmd_bounds(models, M_values, K: int, T: float, attack_values, out=None, eps: float = 0.01) -> int:
    rows = bound_rows(models, M_values, K, T, attack_values, eps)
    fmt = [[r[0], r[1], r[2], repr(float(r[3])), repr(float(r[4])), repr(r[5])] for r in rows]
    if out is None:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(BOUND_COLUMNS)
        w.writerows(fmt)
    else:
        harness.write_rows(out, BOUND_COLUMNS, fmt)
    return 0


def read_aggregate(csv_path) -> dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """protocol -> (checkpoints, mean, std) from an aggregate CSV."""
    with open(csv_path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            return {}
        if tuple(header) != harness.AGGREGATE_COLUMNS:
            raise ValueError(f"{csv_path}: expected header {','.join(harness.AGGREGATE_COLUMNS)}")
        series: dict[str, list] = {}
        for no, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{csv_path}:{no}: expected {len(header)} fields")
            try:
                t, m, s = int(row[2]), float(row[3]), float(row[4])
            except ValueError:
                raise ValueError(f"{csv_path}:{no}: non-numeric field") from None
            series.setdefault(row[0], []).append((t, m, s))
    out = {}
    for label, pts in series.items():
        pts.sort()
        arr = np.array(pts)
        out[label] = (arr[:, 0], arr[:, 1], arr[:, 2])
    return out


def cmd_plot(csv_path, out_path) -> dict:
    """Render mean regret curves with +-1 std bands to a vector image.

    Returns the plotted polyline coordinates per protocol.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series = read_aggregate(csv_path)
    fig, ax = plt.subplots(figsize=(6, 4))
    drawn = {}
    for label, (t, m, s) in series.items():
        (line,) = ax.plot(t, m, marker="o", label=label)
        ax.fill_between(t, m - s, m + s, alpha=0.2, color=line.get_color())
        drawn[label] = (np.asarray(line.get_xdata()), np.asarray(line.get_ydata()))
    ax.set_xlabel("T")
    ax.set_ylabel("regret")
    if series:
        ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, format=Path(out_path).suffix.lstrip(".") or "svg")
    plt.close(fig)
    return drawn


# ------------------------------------------------------------------ parsing


def _parse_range(text: str) -> list[int]:
    if ":" in text:
        lo, hi = (int(x) for x in text.split(":"))
        return list(range(lo, hi + 1))
    return [int(x) for x in text.split(",")]


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",")]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="a2c2", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Monte-Carlo regret experiment")
    run.add_argument("--config", help="experiment config file")
    for flag in _FLAGS:
        run.add_argument("--" + flag.replace("_", "-"), dest=flag, help=f"override {flag}")
    run.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")

    b = sub.add_parser("bounds", help="tabulate regret bounds")
    b.add_argument("--models", default=",".join(harness.MODELS))
    b.add_argument("--M-range", dest="M_range", default="2:16")
    b.add_argument("--K", type=int, default=10)
    b.add_argument("--T", type=float, default=1e6)
    b.add_argument("--attack", default="0.7", help="value or comma list")
    b.add_argument("--eps", type=float, default=0.01)
    b.add_argument("--output")

    pl = sub.add_parser("plot", help="plot an aggregate CSV")
    pl.add_argument("csv_path")
    pl.add_argument("out_path")

    ps = sub.add_parser("probe-sync", help="desync rate under a one-round downlink attack")
    ps.add_argument("--M", type=int, default=2)
    ps.add_argument("--K", type=int, default=2)
    ps.add_argument("--T", type=int, default=400)
    ps.add_argument("--trials", type=int, default=10_000)
    ps.add_argument("--start", type=float, default=0.0)
    ps.add_argument("--target", default="last", help="round index, 'last' or 'none'")
    ps.add_argument("--seed", type=int, default=0)
    return p


def load_config(args) -> ExperimentConfig:
    entries, problems = {}, []
    if args.config:
        text = Path(args.config).read_text(encoding="utf-8")
        entries, problems = read_entries(text)
    for flag, key in _FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            entries[("", key)] = (value, None)
    for item in args.set:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            problems.append(f"override: expected SECTION.KEY=VALUE, got {item!r}")
            continue
        lhs, value = item.split("=", 1)
        section, key = lhs.split(".", 1)
        entries[(section.strip(), key.strip())] = (value.strip(), None)
    return build_config(entries, problems)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return USAGE if e.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    if args.command == "run":
        try:
            cfg = load_config(args)
        except ConfigError as e:
            for problem in e.problems:
                print(f"config error: {problem}", file=sys.stderr)
            return USAGE
        except OSError as e:
            print(f"error: {e}", file=sys.stderr)
            return USAGE
        return cmd_run(cfg)

    if args.command == "bounds":
        try:
            models = [m.strip() for m in args.models.split(",")]
            unknown = [m for m in models if m not in harness.MODELS]
            if unknown:
                raise ValueError(f"unknown model(s) {unknown}")
            M_values, attacks = _parse_range(args.M_range), _floats(args.attack)
        except ValueError as e:
            print(f"usage error: {e}", file=sys.stderr)
            return USAGE
        try:
            return cmd_bounds(models, M_values, args.K, args.T, attacks, args.output, args.eps)
        except (ValueError, OSError) as e:
            print(f"error: {e}", file=sys.stderr)
            return RUNTIME

    if args.command == "plot":
        try:
            cmd_plot(args.csv_path, args.out_path)
        except (ValueError, OSError) as e:
            print(f"error: {e}", file=sys.stderr)
            return RUNTIME
        return 0

    if args.command == "probe-sync":
        target = {"last": "last", "none": None}.get(args.target, args.target)
        try:
            if isinstance(target, str) and target != "last":
                target = int(target)
            rate = harness.sync_failure_probe(
                args.M, args.K, args.T, args.trials, start=args.start, target_round=target, seed=args.seed
            )
        except ValueError as e:
            print(f"usage error: {e}", file=sys.stderr)
            return USAGE
        print(f"desync_rate={rate!r} trials={args.trials}")
        return 0
    return USAGE  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
