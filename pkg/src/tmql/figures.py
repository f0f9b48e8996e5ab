"""Matplotlib rendering of benchmark results to image files.

Kept separate from the harness so the compute path stays figure-free; the
CLI calls into this module to drop PNGs next to the CSV/JSON reports.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .bench import ExperimentReport  # noqa: E402


def save_error_trace_figure(report: ExperimentReport, path, title: str | None = None) -> Path:
    """Average error versus iterations, one line per traced algorithm."""
    traced = [r for r in report.results if r.mean_error_trace]
    if not traced:
        raise ValueError("report carries no error traces (run with trace_every > 0)")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for r in traced:
        ax.plot(r.trace_iterations, r.mean_error_trace, label=r.name, linewidth=1.4)
    ax.set_xlabel("iterations")
    ax.set_ylabel("average error")
    ax.set_title(title or "Average error over iterations")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_summary_figure(report: ExperimentReport, path, title: str | None = None) -> Path:
    """Bar chart of per-algorithm average error with a std whisker."""
    names = [r.name for r in report.results]
    means = [r.average_error for r in report.results]
    stds = [r.error_std for r in report.results]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(names, means, yerr=stds, capsize=4, color="tab:blue", alpha=0.85)
    ax.set_ylabel("average error")
    ax.set_title(title or "Final average error by algorithm")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
