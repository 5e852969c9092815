"""Report figures.  Everything renders off-screen with the Agg backend."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

COLORS = ["#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad", "#d35400", "#16a085"]


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_link(link, path, samples: int = 1024, title: str = "") -> Path:
    fig = plt.figure(figsize=(5.5, 5))
    ax = fig.add_subplot(projection="3d")
    for k, c in enumerate(link):
        s = np.linspace(0.0, c.length, samples + 1)
        p = c.points(s)
        ax.plot(p[:, 0], p[:, 1], p[:, 2], color=COLORS[k % len(COLORS)], lw=1.4, label=f"component {k}")
    ax.set_box_aspect((1, 1, 1))
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_zlabel("z")
    ax.legend(loc="upper left", fontsize=7)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_curvature(link, path, samples: int = 2000) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3))
    for k, c in enumerate(link):
        if not hasattr(c, "curvatures"):
            continue
        s = np.linspace(0.0, c.length, samples, endpoint=False)
        ax.plot(s, c.curvatures(s), color=COLORS[k % len(COLORS)], lw=1, label=f"component {k}")
    ax.set_xlabel("arclength")
    ax.set_ylabel("curvature")
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_lengths(lengths, reference: float, path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.hist(np.asarray(lengths) - reference, bins=30, color=COLORS[0])
    ax.axvline(0.0, color="k", lw=0.8)
    ax.set_xlabel("length minus reference")
    ax.set_ylabel("trials")
    return _save(fig, path)


def plot_descent(lengths, path, settle: int = 0) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3))
    L = np.asarray(lengths)
    ax.plot(np.arange(len(L)), L, color=COLORS[0], lw=1)
    if 0 < settle < len(L):
        ax.axvline(settle, color="0.5", ls="--", lw=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("polygon length")
    return _save(fig, path)
