"""Figure rendering for the CLI report commands.

Each report command writes its delimited data file first; these helpers
render a companion PNG next to it (same stem).  Everything draws through
the Agg backend so headless runs are fine.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

REGION_COLORS = {
    "opt_beats_lossless_noon": "#08306b",
    "opt_beats_lossy_noon": "#6baed6",
    "noon_wins": "#fee8c8",
}


def figure_path(data_path) -> Path:
    p = Path(data_path)
    return p.with_suffix(".png")


def render_cfi_figure(data_path, phi, cfi_values, qfi_values, title) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.plot(phi, cfi_values, color="#b2182b", lw=1.2, label="CFI")
    ax.plot(phi, qfi_values, color="#1a1a1a", ls=":", lw=1.2, label="QFI")
    ax.set_xlabel(r"$\phi$")
    ax.set_ylabel("Fisher information")
    ax.set_title(title, fontsize=10)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    out = figure_path(data_path)
    fig.savefig(out, dpi=160)
    plt.close(fig)
    return out


def render_lossmap_figure(data_path, t1, t2, region_grid, ratio_grid, title) -> Path:
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    codes = {name: k for k, name in enumerate(REGION_COLORS)}
    coded = np.vectorize(codes.get)(region_grid)
    cmap = matplotlib.colors.ListedColormap(list(REGION_COLORS.values()))
    axes[0].pcolormesh(t1, t2, coded.T, cmap=cmap, vmin=0, vmax=2, shading="nearest")
    axes[0].set_xlabel(r"$T_1$")
    axes[0].set_ylabel(r"$T_2$")
    axes[0].set_title("winner regions", fontsize=9)
    pm = axes[1].pcolormesh(t1, t2, ratio_grid.T, cmap="viridis", shading="nearest")
    fig.colorbar(pm, ax=axes[1], label="optimal / NOON QFI")
    axes[1].set_xlabel(r"$T_1$")
    axes[1].set_title(title, fontsize=9)
    fig.tight_layout()
    out = figure_path(data_path)
    fig.savefig(out, dpi=160)
    plt.close(fig)
    return out


def render_robustness_figure(data_path, rows, thresholds, title) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    markers = ["^", "s", "*", "o"]
    for k, thr in enumerate(thresholds):
        pts = [(nbar, prop) for nbar, t, prop in rows if t == thr]
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        ax.plot(xs, ys, marker=markers[k % len(markers)], ms=4, lw=1.0,
                label=f"threshold {thr:g}")
    ax.set_xlabel(r"$\bar{n}$")
    ax.set_ylabel("robust fraction of (T1, T2)")
    ax.set_title(title, fontsize=10)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    out = figure_path(data_path)
    fig.savefig(out, dpi=160)
    plt.close(fig)
    return out


def render_adapt_figure(data_path, iterations, mean_var, reference, title) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.loglog(iterations, mean_var, color="#2166ac", lw=1.2, label=r"mean $\delta^2\phi$")
    if reference is not None:
        ax.loglog(
            iterations,
            reference / np.asarray(iterations, dtype=float),
            color="#555555",
            ls=":",
            lw=1.2,
            label="information bound",
        )
    ax.set_xlabel("iteration")
    ax.set_ylabel(r"$\delta^2\phi$")
    ax.set_title(title, fontsize=10)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    out = figure_path(data_path)
    fig.savefig(out, dpi=160)
    plt.close(fig)
    return out
