"""Figure rendering for reports: field panels, index box plots, stability.

All functions write PNG files and return the path; they are safe in
headless environments (Agg backend is forced before pyplot loads).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _imshow_field(ax, values, grid, title):
    img = np.asarray(values, dtype=float).reshape(grid)
    im = ax.imshow(img, origin="lower", aspect="auto", interpolation="nearest")
    ax.set_title(title, fontsize=10)
    ax.set_xticks([])
    ax.set_yticks([])
    return im


def plot_moment_fields(path, mean, sd, variance, grid, var_floor=1e-10,
                       dpi=130):
    """Mean, standard deviation and log-variance panels of one component."""
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.2))
    logvar = np.where(np.asarray(variance) >= var_floor,
                      np.log(np.maximum(variance, var_floor)), np.nan)
    for ax, vals, title in zip(
            axes, [mean, sd, logvar],
            ["mean", "standard deviation", "log-variance"]):
        im = _imshow_field(ax, vals, grid, title)
        fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path


def plot_index_fields(path, fields, names, grid, suptitle=None, dpi=130):
    """One panel per parameter for a per-cell index field (e.g. totals)."""
    k = len(names)
    ncols = min(k, 3)
    nrows = (k + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(3.6 * ncols, 3.0 * nrows),
                             squeeze=False)
    for ax in axes.ravel()[k:]:
        ax.axis("off")
    for idx, (name, vals) in enumerate(zip(names, fields)):
        ax = axes.ravel()[idx]
        im = _imshow_field(ax, vals, grid, name)
        im.set_clim(0.0, 1.0)
        fig.colorbar(im, ax=ax, shrink=0.85)
    if suptitle:
        fig.suptitle(suptitle)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path


def plot_index_boxes(path, summaries, names, title="space-averaged indices",
                     dpi=130):
    """Box plot plus mean bars from space-averaged five-number summaries."""
    fig, (ax_box, ax_bar) = plt.subplots(1, 2, figsize=(9, 3.4))
    stats = []
    means = []
    for name in names:
        s = summaries[name]
        if s.get("empty"):
            stats.append({"med": 0, "q1": 0, "q3": 0, "whislo": 0,
                          "whishi": 0, "label": name, "fliers": []})
            means.append(0.0)
            continue
        stats.append({"med": s["median"], "q1": s["q1"], "q3": s["q3"],
                      "whislo": s["whisker_lo"], "whishi": s["whisker_hi"],
                      "label": name, "fliers": []})
        means.append(s["mean"])
    ax_box.bxp(stats, showfliers=False)
    ax_box.set_ylabel("index")
    ax_box.tick_params(axis="x", rotation=30)
    ax_bar.bar(range(len(names)), means)
    ax_bar.set_xticks(range(len(names)), names, rotation=30)
    ax_bar.set_ylabel("mean index")
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path


def plot_index_stabilization(path, sample_sizes, index_series, names,
                             title="index stabilization", dpi=130):
    """Index estimates against training-set size, one line per parameter."""
    fig, ax = plt.subplots(figsize=(6, 4))
    arr = np.asarray(index_series, dtype=float)  # (len(sizes), M)
    for j, name in enumerate(names):
        ax.plot(sample_sizes, arr[:, j], marker="o", label=name)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("training samples")
    ax.set_ylabel("index")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path
