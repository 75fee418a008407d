"""Matplotlib renderings of run artifacts, written next to the CSV files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_curves(curves, ylabel: str, path: Path, hline: float | None = None) -> None:
    """One line per training run; `curves` maps a label to a value sequence."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, values in curves.items():
        ax.plot(range(len(values)), values, lw=1.2, label=label)
    if hline is not None:
        ax.axhline(hline, color="k", ls="--", lw=0.8)
    ax.set_xlabel("epoch")
    ax.set_ylabel(ylabel)
    if len(curves) <= 10:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_histogram(edges, trained_counts, untrained_counts, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    centers = 0.5 * (np.asarray(edges[:-1]) + np.asarray(edges[1:]))
    width = edges[1] - edges[0]
    ax.bar(centers, trained_counts, width=width, alpha=0.6, color="green", label="trained")
    ax.bar(centers, untrained_counts, width=width, alpha=0.6, color="purple", label="untrained")
    ax.set_xlabel("output fidelity")
    ax.set_ylabel("count")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_sweep(cells, path: Path) -> None:
    """Mean energy vs ZZ strength, one line per coherence-time scale."""
    fig, ax = plt.subplots(figsize=(6, 4))
    by_scale = {}
    for c in cells:
        by_scale.setdefault(c.time_scale, []).append((c.zz, c.mean_energy))
    for ts, pts in sorted(by_scale.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", label=f"T/T0 = {ts:g}")
    ax.set_xlabel("residual ZZ strength (rad/us)")
    ax.set_ylabel("mean converged energy (hartree)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
