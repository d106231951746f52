"""Figure rendering for the report path: bar charts written next to the tables."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .report import EvaluationReport, _FAMILIES

_BAR_COLORS = ("#4878cf", "#d65f5f")


def _grouped_bars(ax, methods, series, labels, title, ylabel):
    x = np.arange(len(methods))
    width = 0.8 / len(series)
    for i, (values, label) in enumerate(zip(series, labels)):
        ax.bar(
            x + (i - (len(series) - 1) / 2) * width,
            values,
            width,
            label=label,
            color=_BAR_COLORS[i % len(_BAR_COLORS)],
        )
    ax.set_xticks(x)
    ax.set_xticklabels(methods, rotation=20, ha="right")
    ax.set_title(title)
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    ax.grid(axis="y", alpha=0.3)


def render_figures(report: EvaluationReport, out_dir: str | Path) -> list[Path]:
    """Write the leakage and per-setup quality figures; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    methods = report.table.methods

    if report.leakage is not None:
        rows = report.leakage.rows
        fig, axes = plt.subplots(1, 2, figsize=(10, 4))
        _grouped_bars(
            axes[0],
            methods,
            [[r.lsd_cr for r in rows], [r.lsd_ar for r in rows]],
            ["LSD-CR", "LSD-AR"],
            "Lip-sync discrepancy (lower = less leakage)",
            "LSD",
        )
        _grouped_bars(
            axes[1],
            methods,
            [[r.lse_c_s["CR"] for r in rows], [r.lse_c_s["AR"] for r in rows]],
            ["LSE-C_S (CR)", "LSE-C_S (AR)"],
            "Silent-input sync confidence (lower = less leakage)",
            "LSE-C_S",
        )
        fig.tight_layout()
        path = out_dir / "leakage_summary.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    for setup in report.table.setups_present():
        metrics = [
            m
            for m in report.table.metrics_present()
            if any(
                report.table.cell(method, setup, family, m) is not None
                for method in methods
                for family in _FAMILIES
            )
        ]
        if not metrics:
            continue
        ncols = min(3, len(metrics))
        nrows = (len(metrics) + ncols - 1) // ncols
        fig, axes = plt.subplots(
            nrows, ncols, figsize=(4.2 * ncols, 3.4 * nrows), squeeze=False
        )
        for i, metric in enumerate(metrics):
            ax = axes[i // ncols][i % ncols]
            series = []
            for family in _FAMILIES:
                cells = [report.table.cell(m, setup, family, metric) for m in methods]
                series.append([c.mean if c is not None else 0.0 for c in cells])
            _grouped_bars(ax, methods, series, list(_FAMILIES), metric, metric)
        for j in range(len(metrics), nrows * ncols):
            axes[j // ncols][j % ncols].axis("off")
        fig.suptitle(f"{setup.value} setup")
        fig.tight_layout()
        path = out_dir / f"quality_{setup.value.lower()}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
