"""Report rendering: summary tables plus matplotlib figures from sweep CSVs."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

import numpy as np  # noqa: E402

from .harness import emit_summary, format_summary, read_records  # noqa: E402

__all__ = ["render_report"]


def _curves(records, y_attr: str, split_by: str):
    """mean-over-seeds curves of y vs zeta, one per value of ``split_by``."""
    groups = {}
    for r in records:
        groups.setdefault(getattr(r, split_by), {}).setdefault(r.zeta, []).append(
            getattr(r, y_attr)
        )
    curves = {}
    for label, by_zeta in sorted(groups.items(), key=lambda kv: str(kv[0])):
        zetas = sorted(by_zeta)
        curves[label] = (
            np.array(zetas),
            np.array([np.mean(by_zeta[z]) for z in zetas]),
        )
    return curves


def _plot_vs_zeta(records, y_attr, split_by, ylabel, path, logy=False):
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    for label, (z, y) in _curves(records, y_attr, split_by).items():
        ax.plot(z, y, marker="o", label=str(label))
    ax.set_xlabel(r"compression factor $\zeta$")
    ax.set_ylabel(ylabel)
    if logy:
        ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend(title=split_by)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_report(csv_path, out_dir) -> dict:
    """Summaries and figures for one sweep CSV.

    Writes ``summary.txt`` and ``summary.csv`` plus accuracy/MSE-vs-zeta
    figures (split by method, and by heterogeneity when the sweep covers
    more than one mode).  Returns the paths keyed by artifact name.
    """
    records = read_records(csv_path)
    if not records:
        raise ValueError(f"{csv_path}: no records")
    os.makedirs(out_dir, exist_ok=True)
    paths = {}

    header, rows = emit_summary(records, csv_path=os.path.join(out_dir, "summary.csv"))
    paths["summary_csv"] = os.path.join(out_dir, "summary.csv")
    paths["summary_txt"] = os.path.join(out_dir, "summary.txt")
    with open(paths["summary_txt"], "w") as fh:
        fh.write(format_summary(header, rows) + "\n")

    paths["accuracy_fig"] = _plot_vs_zeta(
        records, "accuracy", "method", "proxy accuracy",
        os.path.join(out_dir, "accuracy_vs_zeta.png"),
    )
    paths["mse_fig"] = _plot_vs_zeta(
        records, "network_mse", "method", "network MSE",
        os.path.join(out_dir, "mse_vs_zeta.png"), logy=True,
    )
    if len({r.heterogeneity for r in records}) > 1:
        paths["heterogeneity_fig"] = _plot_vs_zeta(
            records, "network_mse", "heterogeneity", "network MSE",
            os.path.join(out_dir, "mse_vs_zeta_by_heterogeneity.png"), logy=True,
        )
    return paths
