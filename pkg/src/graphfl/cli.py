"""Command line entry point: ``graphfl run | sweep | verify``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .config import ConfigError, ExperimentConfig, parse_config, with_overrides, write_config
from .engine import run_experiment
from .persist import write_manifest, write_metrics, write_summary

log = logging.getLogger("graphfl")


def _load(args) -> ExperimentConfig:
    cfg = parse_config(args.config) if args.config else ExperimentConfig()
    optimize = None if args.optimize is None else args.optimize == "on"
    return with_overrides(cfg, seed=args.seed, rounds=args.rounds,
                          aggregator=getattr(args, "aggregator", None),
                          mu_s=getattr(args, "mu_s", None), optimize=optimize)


def _run_cell(cfg: ExperimentConfig, out: Path, stem: str) -> Path:
    csv_path = out / f"{stem}.csv"
    json_path = out / f"{stem}.json"
    metrics = run_experiment(cfg)
    write_metrics(metrics, csv_path)
    write_summary(metrics, json_path)
    return csv_path


def cmd_run(args) -> int:
    cfg = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    snapshot = out / "config.ini"
    write_config(cfg, snapshot)
    write_manifest(cfg, out, [snapshot, out / "metrics.csv", out / "metrics.json"])

    def progress(rec):
        if rec.round % 10 == 0 or rec.round == cfg.run.rounds:
            log.info("round %d  local %.4f  global %.4f", rec.round,
                     rec.acc_local_mean, rec.acc_global_mean)

    metrics = run_experiment(cfg, progress=progress)
    write_metrics(metrics, out / "metrics.csv")
    write_summary(metrics, out / "metrics.json")
    final = metrics.final
    print(f"H={metrics.H:.4f} acc_local={final.acc_local_mean:.4f} "
          f"acc_global={final.acc_global_mean:.4f} I6={metrics.I6:.6g} I7={metrics.I7:.6g}")
    return 0


def sweep_cells(cfg: ExperimentConfig):
    """(stem, config) per grid cell; fedavg ignores mu_s so it gets one cell."""
    for agg in cfg.sweep.aggregators:
        mus = [cfg.run.mu_s] if agg == "fedavg" else list(cfg.sweep.mu_s)
        for mu in mus:
            stem = "fedavg" if agg == "fedavg" else f"gfedfilt_mu{mu:g}"
            run = dataclasses.replace(cfg.run, aggregator=agg, mu_s=mu)
            yield stem, dataclasses.replace(cfg, run=run)


def cmd_sweep(args) -> int:
    cfg = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cells = list(sweep_cells(cfg))
    snapshot = out / "config.ini"
    write_config(cfg, snapshot)
    outputs = [snapshot]
    for stem, _ in cells:
        outputs += [out / f"{stem}.csv", out / f"{stem}.json"]
    write_manifest(cfg, out, outputs)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            done = list(pool.map(_run_cell, [c for _, c in cells], [out] * len(cells),
                                 [s for s, _ in cells]))
    else:
        done = [_run_cell(c, out, s) for s, c in cells]
    for path in done:
        print(path)
    return 0


def cmd_verify(args) -> int:
    from .verify import run_all

    return 0 if run_all(seed=args.seed or 0) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphfl", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default):
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--seed", type=int, metavar="N")
        p.add_argument("--out", metavar="DIR", default=out_default)
        p.add_argument("--rounds", type=int, metavar="N")
        p.add_argument("--optimize", choices=("on", "off"))

    run = sub.add_parser("run", help="run one experiment")
    common(run, "runs/latest")
    run.add_argument("--aggregator", choices=("fedavg", "gfedfilt"))
    run.add_argument("--mu-s", dest="mu_s", type=float, metavar="FLOAT")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="grid over aggregator and mu_s, one CSV per cell")
    common(sweep, "runs/sweep")
    sweep.add_argument("--jobs", type=int, default=1, metavar="N")
    sweep.set_defaults(func=cmd_sweep)

    verify = sub.add_parser("verify", help="run the oracle-equivalence suites")
    verify.add_argument("--seed", type=int, metavar="N")
    verify.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, ArithmeticError, OSError) as exc:
        print(f"graphfl: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
