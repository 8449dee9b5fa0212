"""Figure rendering for the report path (headless matplotlib)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .training import SeedReport  # noqa: E402

_SAVE = dict(dpi=120, bbox_inches="tight")


def _finish(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return path


def training_curves(report: SeedReport, path):
    """Per-seed train loss and validation accuracy against epochs."""
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(9, 3.4))
    for m in report.runs:
        epochs = range(1, len(m.train_loss) + 1)
        ax_loss.plot(epochs, m.train_loss, alpha=0.8, label=f"seed {m.seed}")
        ax_acc.plot(epochs, m.val_acc, alpha=0.8, label=f"seed {m.seed}")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("train loss")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("val accuracy")
    if len(report.runs) <= 6:
        ax_acc.legend(fontsize=8)
    return _finish(fig, path)


def fusion_weight_bars(weights: dict[str, float], path, title="mean fusion weight"):
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    names = list(weights)
    vals = [weights[k] for k in names]
    ax.bar(names, vals, color="#4878b0")
    ax.set_ylabel(title)
    ax.set_ylim(0, 1)
    for i, v in enumerate(vals):
        ax.text(i, v + 0.02, f"{v:.2f}", ha="center", fontsize=8)
    return _finish(fig, path)


def variant_bars(results: dict[str, SeedReport], path, ylabel="test accuracy"):
    """Ablation-style comparison with stdev whiskers where available."""
    fig, ax = plt.subplots(figsize=(max(4.5, 1.1 * len(results)), 3.4))
    names = list(results)
    means = [results[k].mean_accuracy for k in names]
    errs = [results[k].std_accuracy or 0.0 for k in names]
    ax.bar(names, means, yerr=errs, capsize=3, color="#5a9e6f")
    ax.set_ylabel(ylabel)
    ax.set_ylim(0, 1.05)
    ax.tick_params(axis="x", rotation=20)
    for i, v in enumerate(means):
        ax.text(i, v + 0.02, f"{v:.3f}", ha="center", fontsize=8)
    return _finish(fig, path)


def sweep_curve(records: list[dict], path):
    fig, ax = plt.subplots(figsize=(4.8, 3.4))
    xs = [rec["value"] for rec in records]
    means = [rec["report"].mean_accuracy for rec in records]
    stds = [rec["report"].std_accuracy or 0.0 for rec in records]
    ax.errorbar(xs, means, yerr=stds, marker="o", capsize=3, color="#b0614a")
    ax.set_xlabel(records[0]["param"] if records else "value")
    ax.set_ylabel("test accuracy")
    return _finish(fig, path)
