"""Matplotlib rendering of the CLI reports. Every function writes one PNG next
to the delimited/JSON output it illustrates."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

CLASS_ORDER = ["inac_inac", "inac_ac", "ac_ac", "rand"]
CLASS_LABELS = {
    "inac_inac": "Inac-Inac",
    "inac_ac": "Inac-Ac",
    "ac_ac": "Ac-Ac",
    "rand": "Rand",
}


def save_relation_quality_figure(report: dict, path: str) -> None:
    classes = report["classes"]
    names = [c for c in CLASS_ORDER if c in classes]
    values = [classes[c]["value"] or 0.0 for c in names]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.bar([CLASS_LABELS[c] for c in names], values, color="#4878cf")
    ax.set_ylabel("non-zero Jaccard rate")
    ax.set_ylim(0, 1)
    ax.set_title("Relation quality by endpoint class")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_degree_distribution_figure(report: dict, path: str) -> None:
    buckets = report["buckets"]
    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    width = 0.38
    x = np.arange(len(buckets))
    for offset, (name, color) in enumerate(
        (("active", "#4878cf"), ("inactive", "#d65f5f"))
    ):
        frac = report["classes"][name]["fractions"]
        ax.bar(x + (offset - 0.5) * width, frac, width, label=name, color=color)
    ax.set_xticks(x, buckets)
    ax.set_xlabel("social degree")
    ax.set_ylabel("fraction of users")
    ax.set_title("Social degree distribution")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_jaccard_delta_figure(report: dict, path: str) -> None:
    classes = report["classes"]
    names = [c for c in CLASS_ORDER if c in classes and classes[c]["pair_count"]]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    means = [classes[c]["value"] for c in names]
    ax.bar([CLASS_LABELS[c] for c in names], means, color="#6acc65")
    if all("q25" in classes[c] for c in names):
        low = [classes[c]["value"] - classes[c]["q25"] for c in names]
        high = [classes[c]["q75"] - classes[c]["value"] for c in names]
        ax.errorbar(
            [CLASS_LABELS[c] for c in names], means, yerr=[low, high],
            fmt="none", ecolor="black", capsize=4,
        )
    ax.axhline(0.0, color="gray", linewidth=0.8)
    ax.set_ylabel("overlap change on new edges")
    ax.set_title("New-edge Jaccard delta (mean, quartile bars)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_loss_curve_figure(history: list[dict], path: str) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    epochs = [h["epoch"] for h in history]
    ax.plot(epochs, [h["total"] for h in history], label="total", color="#4878cf")
    ax.plot(epochs, [h["bpr"] for h in history], label="ranking", linestyle="--",
            color="#d65f5f")
    if any(h["mimic"] for h in history):
        ax.plot(epochs, [h["mimic"] for h in history], label="mimic", linestyle=":",
                color="#6acc65")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title("Training loss")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_metrics_figure(report: dict, path: str) -> None:
    cohorts = ["inactive", "active", "overall"]
    k_values = report["k_values"]
    metrics = [f"ndcg@{k}" for k in k_values] + [f"hr@{k}" for k in k_values]
    fig, ax = plt.subplots(figsize=(6.5, 3.4))
    x = np.arange(len(metrics))
    width = 0.8 / len(cohorts)
    colors = {"inactive": "#d65f5f", "active": "#4878cf", "overall": "#6acc65"}
    for pos, cohort in enumerate(cohorts):
        vals = [report["cohorts"][cohort][m] for m in metrics]
        ax.bar(x + (pos - 1) * width, vals, width, label=cohort, color=colors[cohort])
    ax.set_xticks(x, metrics, rotation=20)
    ax.set_ylabel("metric value")
    ax.set_title("Top-K ranking metrics by cohort")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_ablation_figure(rows: list[dict], metric: str, path: str) -> None:
    """rows: one dict per variant with `variant`, `mean`, `std` of the metric."""
    fig, ax = plt.subplots(figsize=(5.5, 3.4))
    names = [r["variant"] for r in rows]
    means = [r["mean"] for r in rows]
    stds = [r["std"] for r in rows]
    ax.bar(names, means, yerr=stds, capsize=4, color="#4878cf")
    ax.set_ylabel(metric)
    ax.set_title("Ablation comparison (inactive cohort)")
    ax.tick_params(axis="x", rotation=15)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
