"""Evaluation artifacts: delimited curve tables, a JSON summary, and rendered
figures next to them.

One row per curve point so the tables can be replotted elsewhere; the PNG
figures are the quick-look versions of the same data (PR curve, ROC curve,
and the cumulative bad/good Lorenz chart with the K-S gap marked).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .metrics import CurveReport  # noqa: E402

PR_FILE = "pr_points.csv"
ROC_FILE = "roc_points.csv"
LORENZ_FILE = "lorenz.csv"
SUMMARY_FILE = "summary.json"


def _write_points(path: Path, header: Sequence[str], points: np.ndarray) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in points:
            writer.writerow([repr(float(v)) for v in row])


def write_curve_tables(report: CurveReport, outdir: str | Path) -> dict[str, Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {
        "pr": outdir / PR_FILE,
        "roc": outdir / ROC_FILE,
        "lorenz": outdir / LORENZ_FILE,
    }
    _write_points(paths["pr"], ["recall", "precision", "threshold"], report.pr_points)
    _write_points(paths["roc"], ["fpr", "tpr", "threshold"], report.roc_points)
    _write_points(
        paths["lorenz"],
        ["sample_fraction", "cum_bad_fraction", "cum_good_fraction"],
        report.lorenz,
    )
    return paths


def write_summary(report: CurveReport, path: str | Path, extra: dict | None = None) -> None:
    summary = {
        "n": report.n,
        "positives": report.positives,
        "auc": report.auc,
        "average_precision": report.average_precision,
        "ks": report.ks,
        "ks_at_fraction": report.ks_at_fraction,
    }
    if extra:
        summary.update(extra)
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _new_axes(title: str, xlabel: str, ylabel: str):
    fig, ax = plt.subplots(figsize=(5.0, 4.0), dpi=120)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _save(fig, path: Path) -> None:
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_figures(report: CurveReport, outdir: str | Path) -> list[Path]:
    """Render pr_curve.png, roc_curve.png, lorenz_ks.png into outdir."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []

    fig, ax = _new_axes("Precision-Recall", "recall", "precision")
    ax.plot(report.pr_points[:, 0], report.pr_points[:, 1], lw=1.5)
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    p = outdir / "pr_curve.png"
    _save(fig, p)
    paths.append(p)

    fig, ax = _new_axes(f"ROC (AUC = {report.auc:.4f})", "false positive rate", "true positive rate")
    ax.plot(report.roc_points[:, 0], report.roc_points[:, 1], lw=1.5)
    ax.plot([0, 1], [0, 1], "k--", lw=0.8)
    p = outdir / "roc_curve.png"
    _save(fig, p)
    paths.append(p)

    fig, ax = _new_axes(f"K-S = {report.ks:.4f}", "fraction of samples", "cumulative fraction")
    ax.plot(report.lorenz[:, 0], report.lorenz[:, 1], lw=1.5, label="bad cases")
    ax.plot(report.lorenz[:, 0], report.lorenz[:, 2], lw=1.5, label="good cases")
    ax.axvline(report.ks_at_fraction, color="gray", ls=":", lw=1.0)
    ax.legend(loc="lower right")
    p = outdir / "lorenz_ks.png"
    _save(fig, p)
    paths.append(p)
    return paths


def render_pr_overlay(curves: Sequence[tuple[str, np.ndarray]], path: str | Path) -> Path:
    """Overlay several PR curves (label, pr_points) on one axes."""
    fig, ax = _new_axes("Precision-Recall", "recall", "precision")
    for label, points in curves:
        ax.plot(points[:, 0], points[:, 1], lw=1.2, label=label)
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    ax.legend(loc="lower left", fontsize=8)
    path = Path(path)
    _save(fig, path)
    return path
