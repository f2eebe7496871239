"""Figures for evaluation reports and training curves.

Figures are drawn on the Agg canvas without touching pyplot state, and PNG
metadata is stripped so reruns are byte-identical.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib as mpl
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .evalkit import EvalReport

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
}
COLORS = ("#4C72B0", "#DD8452", "#55A868")


def _new(width=6.0, height=3.2):
    fig = Figure(figsize=(width, height), dpi=100)
    FigureCanvasAgg(fig)
    return fig, fig.add_subplot(1, 1, 1)


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, format="png", metadata={"Software": None})
    return path


@mpl.rc_context(STYLE)
def plot_report(report: EvalReport, path, title: str | None = None) -> Path:
    """Grouped P/R/F1 bars per class, with the macro average as the last group."""
    names = list(report.per_class) + ["macro"]
    rows = [(s.precision, s.recall, s.f1) for s in report.per_class.values()] + [report.macro]
    values = np.array(rows)
    fig, ax = _new(width=max(3.5, 0.9 * len(names) + 1.5))
    x = np.arange(len(names))
    w = 0.26
    for k, (label, color) in enumerate(zip(("precision", "recall", "F1"), COLORS)):
        ax.bar(x + (k - 1) * w, values[:, k], w, label=label, color=color)
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=30 if len(names) > 3 else 0, ha="right" if len(names) > 3 else "center")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    ax.set_title(title or report.mode.value)
    ax.grid(axis="y", alpha=0.3)
    ax.legend(loc="upper left", ncol=3, frameon=False)
    return _save(fig, path)


@mpl.rc_context(STYLE)
def plot_history(rows: Sequence[dict], keys: Sequence[str], path, title: str = "training") -> Path:
    """Line plot of per-epoch values from a metrics log."""
    fig, ax = _new()
    epochs = [r["epoch"] for r in rows]
    for key, color in zip(keys, COLORS * 3):
        if any(key in r for r in rows):
            ax.plot(epochs, [r.get(key, np.nan) for r in rows], marker="o", ms=3, label=key, color=color)
    ax.set_xlabel("epoch")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(frameon=False)
    return _save(fig, path)
