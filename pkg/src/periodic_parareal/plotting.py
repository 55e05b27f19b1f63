"""Static report figures (PNG files only, no interactive backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.figure import Figure

golden_mean = (np.sqrt(5) - 1.0) / 2.0
fig_width = 5.0

STYLE = {
    "axes.labelsize": 10,
    "font.size": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def _figure(height_ratio=golden_mean, ncols=1) -> tuple[Figure, object]:
    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=(fig_width * ncols, fig_width * height_ratio), dpi=120)
        axes = fig.subplots(1, ncols)
    return fig, axes


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    with matplotlib.rc_context(STYLE):
        fig.tight_layout()
        fig.savefig(path)
    return path


def plot_history(history, path, tol=None) -> Path:
    """Jump norm per iteration on a log axis."""
    fig, ax = _figure()
    k = [r.k for r in history.records]
    jumps = np.maximum([r.jump_norm for r in history.records], 1e-300)
    ax.semilogy(k, jumps, "o-", label=history.variant)
    if tol is not None:
        ax.axhline(tol, color="k", ls="--", lw=0.8, label="tolerance")
    ax.set_xlabel("iteration k")
    ax.set_ylabel("jump norm")
    ax.legend()
    return _save(fig, path)


def plot_trajectory(times, trajectory, path, max_dofs: int = 6) -> Path:
    """A few state components at the subinterval boundaries."""
    fig, ax = _figure()
    trajectory = np.atleast_2d(trajectory)
    d = trajectory.shape[1]
    picks = np.unique(np.linspace(0, d - 1, min(d, max_dofs)).astype(int))
    for i in picks:
        ax.plot(times, trajectory[:, i], ".-", label=f"u[{i}]")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("state")
    ax.legend(ncol=2)
    return _save(fig, path)


def plot_compare(histories: dict, path) -> Path:
    """Jump histories of several variants and their iteration counts."""
    fig, (ax, bx) = _figure(height_ratio=0.45, ncols=2)
    names = list(histories)
    for name in names:
        h = histories[name]
        if h is None or not h.records:
            continue
        ax.semilogy([r.k for r in h.records], np.maximum(h.jumps, 1e-300), ".-", label=name)
    ax.set_xlabel("iteration k")
    ax.set_ylabel("jump norm")
    ax.legend()
    counts = [histories[n].iterations if histories[n] is not None else 0 for n in names]
    bx.bar(range(len(names)), counts)
    bx.set_xticks(range(len(names)))
    bx.set_xticklabels(names, rotation=30, ha="right")
    bx.set_ylabel("iterations")
    return _save(fig, path)
