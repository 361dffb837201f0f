"""CSV/JSON output of run metrics and the run manifest."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from . import __version__, seeding
from .config import ExperimentConfig, config_to_string
from .engine import MetricsLog, RoundRecord

__all__ = ["CSV_COLUMNS", "metrics_rows", "write_metrics", "write_summary", "write_manifest"]

# Public contract: do not reorder.
CSV_COLUMNS = (
    "round",
    "acc_local_mean", "acc_local_std",
    "acc_global_mean", "acc_global_std",
    "I1", "I2", "I3", "I4", "I5", "I6", "I7",
    "T", "H",
)


def _num(x) -> str:
    return f"{float(x):.6g}"


def metrics_rows(log: MetricsLog):
    i5 = i6 = i7 = 0.0
    for r in log.rounds:
        i5 += r.flops
        i6 += r.T
        i7 += r.desync
        yield [
            str(r.round),
            _num(r.acc_local.mean()), _num(r.acc_local.std()),
            _num(r.acc_global.mean()), _num(r.acc_global.std()),
            _num(r.local.accuracy), _num(r.local.precision), _num(r.local.recall), _num(r.local.f1),
            _num(i5), _num(i6), _num(i7),
            _num(r.T), _num(log.H),
        ]


def write_metrics(log: MetricsLog, path) -> Path:
    """One CSV row per round; I1-I4 from the pooled local-test confusion matrix,
    I5-I7 cumulative."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        writer.writerows(metrics_rows(log))
    return path


def _record_json(r: RoundRecord) -> dict:
    def cm(m):
        return {"I1": m.accuracy, "I2": m.precision, "I3": m.recall, "I4": m.f1, "n": m.total}

    return {
        "round": r.round,
        "acc_local": [round(float(a), 6) for a in r.acc_local],
        "acc_global": [round(float(a), 6) for a in r.acc_global],
        "local": cm(r.local),
        "global": cm(r.global_),
        "T": r.T,
        "desync": r.desync,
        "alpha": list(r.alphas),
        "q": list(r.qs),
        "z": list(r.zs),
    }


def write_summary(log: MetricsLog, path) -> Path:
    path = Path(path)
    summary = {
        "H": log.H,
        "rounds": len(log.rounds),
        "I5": log.I5,
        "I6": log.I6,
        "I7": log.I7,
        "baseline": _record_json(log.baseline) if log.baseline else None,
        "final": _record_json(log.final) if log.rounds else None,
    }
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return path


def write_manifest(cfg: ExperimentConfig, out_dir, outputs) -> Path:
    """Record everything needed to reproduce the run; written before round one."""
    out_dir = Path(out_dir)
    path = out_dir / "manifest.json"
    manifest = {
        "version": __version__,
        "seed": cfg.run.seed,
        "seed_streams": {k: [cfg.run.seed, v] for k, v in seeding.STREAMS.items()},
        "config": config_to_string(cfg),
        "outputs": sorted({str(Path(p)) for p in outputs} | {str(path)}),
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
