"""Comparison tables and figures for evaluation reports and phase audits.

The text table follows the layout of the original comparison: one row per
preprocessing method with accuracy as mean plus-minus standard deviation in
percent, and the gain over the unadjusted baseline in percentage points.
"""

from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .classify import EvalReport  # noqa: E402
from .types import AlignmentMode, ClassLabel, ModeKind  # noqa: E402

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}

TABLE_HEADER = ("Preprocessing Method", "Accuracy(%)±Std Dev", "Improvement (pp)")


def figsize(width_in: float = 6.0, aspect: float = GOLDEN) -> tuple[float, float]:
    return width_in, width_in * aspect


def _baseline(report: EvalReport) -> float | None:
    for r in report.rows:
        if AlignmentMode.parse(r.mode).kind is ModeKind.NONE:
            return r.mean
    return None


def table_rows(report: EvalReport) -> list[tuple[str, str, str]]:
    """Rows of the comparison table as display strings."""
    base = _baseline(report)
    out = []
    for r in report.rows:
        acc = f"{100 * r.mean:.1f} ± {100 * r.std:.1f}"
        if base is None or AlignmentMode.parse(r.mode).kind is ModeKind.NONE:
            gain = "-"
        else:
            gain = f"{100 * (r.mean - base):+.1f}"
        out.append((r.title, acc, gain))
    return out


def format_table(report: EvalReport) -> str:
    rows = [TABLE_HEADER, *table_rows(report)]
    widths = [max(len(row[i]) for row in rows) for i in range(3)]
    rule = "-+-".join("-" * w for w in widths)

    def line(row):
        return " | ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()

    body = [line(rows[0]), rule, *(line(r) for r in rows[1:])]
    cfg = report.config
    reps = cfg.get("repetitions")
    footer = [f"# {report.note}"]
    if reps is not None:
        footer.append(f"# repetitions={reps} schema={cfg.get('schema')} seed={cfg.get('seed')}")
    if cfg.get("preset"):
        footer.append(f"# synthetic preset {cfg['preset']!r}: class signatures are stand-ins, not measurements")
    return "\n".join([*footer, *body]) + "\n"


def write_table_csv(report: EvalReport, path: str | os.PathLike) -> None:
    base = _baseline(report)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mode", "title", "accuracy_mean_pct", "accuracy_std_pct", "improvement_pp", "repetitions"])
        for r in report.rows:
            is_base = AlignmentMode.parse(r.mode).kind is ModeKind.NONE
            gain = "" if base is None or is_base else f"{100 * (r.mean - base):.4f}"
            w.writerow([r.mode, r.title, f"{100 * r.mean:.4f}", f"{100 * r.std:.4f}", gain, len(r.accuracies)])


def plot_accuracy(report: EvalReport, path: str | os.PathLike) -> None:
    """Bar chart of mean accuracy with one-std error bars."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize(5.5))
        x = np.arange(len(report.rows))
        means = [100 * r.mean for r in report.rows]
        stds = [100 * r.std for r in report.rows]
        ax.bar(x, means, yerr=stds, capsize=4, color="0.6", edgecolor="0.2", width=0.6)
        for xi, m in zip(x, means):
            ax.text(xi, m + 0.5, f"{m:.1f}", ha="center", va="bottom", fontsize=8)
        ax.set_xticks(x, [r.title for r in report.rows], rotation=20, ha="right")
        ax.set_ylabel("test accuracy (%)")
        low = min(means) - max(stds, default=0) if means else 0
        ax.set_ylim(max(0.0, min(low - 5, 90.0)), 101)
        ax.set_title("Accuracy by phase preprocessing")
        fig.savefig(path)
        plt.close(fig)


def plot_confusion(report: EvalReport, path: str | os.PathLike) -> None:
    """One row-normalized confusion matrix per mode, summed over repetitions."""
    n = len(report.rows)
    cols = min(n, 3)
    nrows = math.ceil(n / cols)
    tags = [c.tag for c in ClassLabel]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(nrows, cols, figsize=(3.2 * cols, 3.0 * nrows), squeeze=False)
        for ax in axes.flat[n:]:
            ax.set_visible(False)
        for ax, r in zip(axes.flat, report.rows):
            cm = np.asarray(r.confusion, dtype=float)
            totals = cm.sum(axis=1, keepdims=True)
            frac = np.divide(cm, totals, out=np.zeros_like(cm), where=totals > 0)
            ax.imshow(frac, vmin=0, vmax=1, cmap="Greys")
            for i, j in np.ndindex(frac.shape):
                if cm[i, j]:
                    ax.text(j, i, f"{frac[i, j]:.2f}", ha="center", va="center", fontsize=6,
                            color="white" if frac[i, j] > 0.5 else "black")
            ax.set_xticks(range(6), tags, rotation=90, fontsize=6)
            ax.set_yticks(range(6), tags, fontsize=6)
            ax.set_xlabel("predicted")
            ax.set_ylabel("true")
            ax.set_title(r.title, fontsize=9)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_phase_audit(rows: list[dict], path: str | os.PathLike, max_points: int = 5000) -> None:
    """Pre- and post-alignment phases per axis from an audit table."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(9.0, 3.0), subplot_kw={"projection": "polar"})
        step = max(1, len(rows) // max_points)
        sub = rows[::step]
        for ax, axis in zip(axes, "xyz"):
            pre = np.array([r[f"pre_phase_{axis}"] for r in sub], dtype=float)
            post = np.array([r[f"post_phase_{axis}"] for r in sub], dtype=float)
            ax.scatter(pre, np.full(pre.size, 1.0), s=4, color="0.65", label="before")
            ax.scatter(post, np.full(post.size, 0.6), s=4, color="k", label="after")
            ax.set_yticks([])
            ax.set_ylim(0, 1.2)
            ax.set_title(f"{axis.upper()} phase at f_d", fontsize=9)
        axes[0].legend(loc="lower left", bbox_to_anchor=(-0.2, -0.25), frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def render_report(report: EvalReport, out_dir: str | os.PathLike) -> dict[str, Path]:
    """Write table text, table CSV, structured JSON and figures into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "table": out / "report.txt",
        "csv": out / "report.csv",
        "json": out / "report.json",
        "accuracy_plot": out / "accuracy.png",
        "confusion_plot": out / "confusion.png",
    }
    paths["table"].write_text(format_table(report))
    write_table_csv(report, paths["csv"])
    paths["json"].write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    plot_accuracy(report, paths["accuracy_plot"])
    plot_confusion(report, paths["confusion_plot"])
    return paths
