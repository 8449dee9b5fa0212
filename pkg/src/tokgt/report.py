"""Report emission: JSON with a stable schema plus delimited per-seed tables.

Wall-clock timings are part of the report, but with NTF_DETERMINISTIC=1 they
are suppressed so that two identical runs emit byte-identical files.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

from .training import SeedReport

REPORT_VERSION = 1


def deterministic_mode() -> bool:
    return os.environ.get("NTF_DETERMINISTIC", "") == "1"


def _seed_block(report: SeedReport) -> dict:
    return {
        "seeds": list(report.seeds),
        "accuracies": [float(a) for a in report.accuracies],
        "mean_accuracy": float(report.mean_accuracy),
        "std_accuracy": None if report.std_accuracy is None else float(report.std_accuracy),
        "fusion_weights": report.fusion_weights,
        "per_seed": [
            {
                "seed": m.seed,
                "test_acc": float(m.test_acc),
                "best_val_acc": float(m.best_val_acc),
                "best_epoch": m.best_epoch,
                "epochs_run": m.epochs_run,
            }
            for m in report.runs
        ],
    }


def make_report(command: str, config_flat: dict, dataset_info: dict,
                results, timings: dict | None = None) -> dict:
    """Assemble the report document.

    `results` may be a SeedReport (train), {variant: SeedReport} (ablate), or
    a list of sweep records ({param, value, report}).
    """
    if isinstance(results, SeedReport):
        body = _seed_block(results)
    elif isinstance(results, dict):
        body = {name: _seed_block(rep) for name, rep in results.items()}
    else:
        body = [
            {"param": rec["param"], "value": rec["value"], **_seed_block(rec["report"])}
            for rec in results
        ]
    doc = {
        "report_version": REPORT_VERSION,
        "command": command,
        "config": config_flat,
        "dataset": dataset_info,
        "results": body,
        "timings": None if deterministic_mode() else (timings or {}),
    }
    return doc


def write_json(doc: dict, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def write_per_seed_csv(report: SeedReport, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "test_acc", "best_val_acc", "best_epoch", "epochs_run"])
        for m in report.runs:
            w.writerow([m.seed, f"{m.test_acc:.6f}", f"{m.best_val_acc:.6f}",
                        m.best_epoch, m.epochs_run])


def write_variant_csv(results: dict[str, SeedReport], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["variant", "mean_accuracy", "std_accuracy", "seeds"])
        for name, rep in results.items():
            std = "" if rep.std_accuracy is None else f"{rep.std_accuracy:.6f}"
            w.writerow([name, f"{rep.mean_accuracy:.6f}", std, len(rep.seeds)])


def write_sweep_csv(records: list[dict], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["param", "value", "mean_accuracy", "std_accuracy", "seeds"])
        for rec in records:
            rep = rec["report"]
            std = "" if rep.std_accuracy is None else f"{rep.std_accuracy:.6f}"
            w.writerow([rec["param"], rec["value"], f"{rep.mean_accuracy:.6f}",
                        std, len(rep.seeds)])
