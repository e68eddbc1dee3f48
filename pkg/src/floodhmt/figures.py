"""Figure rendering for CLI outputs.

Everything draws through the Agg backend straight to files; no display is
ever needed. Colors match the PPM palette so the PNG and PPM views of a
class map agree.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import ListedColormap

from .learn import EmTrace
from .raster import DEFAULT_PALETTE, Grid


def _scale(rgb: tuple[int, int, int]) -> tuple[float, float, float]:
    return tuple(v / 255.0 for v in rgb)


def save_class_map(grid: Grid, path: str | Path, title: str = "class map") -> None:
    """Class grid as an image: dry brown, flood blue, nodata black."""
    cmap = ListedColormap(
        [_scale(DEFAULT_PALETTE["nodata"]), _scale(DEFAULT_PALETTE[0]), _scale(DEFAULT_PALETTE[1])]
    )
    idx = np.zeros(grid.values.shape, dtype=np.int64)
    mask = grid.valid_mask()
    idx[mask & (grid.values == 0.0)] = 1
    idx[mask & (grid.values == 1.0)] = 2
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.imshow(idx, cmap=cmap, vmin=0, vmax=2, interpolation="nearest")
    ax.set_title(title)
    ax.set_xticks([])
    ax.set_yticks([])
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def save_marginal_map(grid: Grid, path: str | Path) -> None:
    """Flood posterior probability as a continuous image."""
    vals = np.where(grid.valid_mask(), grid.values, np.nan)
    fig, ax = plt.subplots(figsize=(6, 6))
    im = ax.imshow(vals, cmap="viridis", vmin=0.0, vmax=1.0, interpolation="nearest")
    fig.colorbar(im, ax=ax, shrink=0.8, label="flood probability")
    ax.set_title("flood marginals")
    ax.set_xticks([])
    ax.set_yticks([])
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def save_em_trace(trace: EmTrace, path: str | Path) -> None:
    """Log-likelihood by iteration; monotone when learning behaves."""
    fig, ax = plt.subplots(figsize=(6, 4))
    its = np.arange(1, len(trace.logliks) + 1)
    ax.plot(its, trace.logliks, marker="o")
    ax.set_xlabel("iteration")
    ax.set_ylabel("log-likelihood")
    ax.set_title("EM trace" + (" (converged)" if trace.converged else ""))
    ax.grid(True, alpha=0.3)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def save_metrics_chart(per_class: dict[str, tuple[float, ...]], path: str | Path) -> None:
    """Grouped bars of precision/recall/F1 from parsed machine lines."""
    classes = [k for k in ("dry", "flood") if k in per_class]
    names = ("precision", "recall", "f1")
    fig, ax = plt.subplots(figsize=(6, 4))
    width = 0.25
    xs = np.arange(len(classes))
    for i, name in enumerate(names):
        vals = [per_class[c][i] for c in classes]
        ax.bar(xs + (i - 1) * width, vals, width, label=name)
    ax.set_xticks(xs)
    ax.set_xticklabels(classes)
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    ax.set_title("per-class metrics")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def save_bench_plot(rows: list[tuple[int, float, float, float]], path: str | Path) -> None:
    """Wall time per stage against pixel count, log-log."""
    sizes = [r[0] for r in rows]
    pixels = [s * s for s in sizes]
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, name in enumerate(("construction", "learning", "inference"), start=1):
        ax.plot(pixels, [r[i] for r in rows], marker="o", label=name)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("pixels")
    ax.set_ylabel("seconds")
    ax.set_title("runtime scaling")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
