"""Report rendering: JSON metrics, per-item CSV, and matplotlib figures."""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import QAEvalResult


def write_qa_csv(path: str, item_rows: list[dict]) -> None:
    fields = ["item_id", "video_id", "question_type", "predicted_index", "answer_index", "correct"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in item_rows:
            writer.writerow({k: row[k] for k in fields})


def write_dvc_csv(path: str, video_rows: list[dict]) -> None:
    fields = ["video_id", "n_predictions", "n_references", "precision", "recall", "f1"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in video_rows:
            writer.writerow({k: row[k] for k in fields})


def _new_axes(width: float = 6.0, height: float = 3.6):
    fig, ax = plt.subplots(figsize=(width, height), dpi=120)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    return fig, ax


def render_qa_figure(path: str, result: QAEvalResult) -> None:
    """Bar chart of per-type accuracy with the unweighted mean marked."""
    types = sorted(result.per_type)
    values = [result.per_type[t].accuracy for t in types]
    fig, ax = _new_axes()
    ax.bar(range(len(types)), values, color="#4878a8", width=0.6)
    ax.axhline(result.mean_accuracy, color="#b0413e", linestyle="--", linewidth=1,
               label=f"mean {result.mean_accuracy:.3f}")
    ax.set_xticks(range(len(types)))
    ax.set_xticklabels(types, rotation=20, ha="right", fontsize=8)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("accuracy")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_dvc_figure(path: str, video_rows: list[dict], mean_f1: float) -> None:
    """Per-video F score bars plus the mean."""
    vids = [r["video_id"] for r in video_rows]
    values = [r["f1"] for r in video_rows]
    fig, ax = _new_axes(width=max(6.0, 0.6 * len(vids) + 2))
    ax.bar(range(len(vids)), values, color="#4878a8", width=0.6)
    ax.axhline(mean_f1, color="#b0413e", linestyle="--", linewidth=1, label=f"mean F {mean_f1:.3f}")
    ax.set_xticks(range(len(vids)))
    ax.set_xticklabels(vids, rotation=30, ha="right", fontsize=7)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("matching F score")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
