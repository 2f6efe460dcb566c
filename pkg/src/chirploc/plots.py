"""Figure rendering for the CLI report paths.

Writes PNGs next to the CSV/JSON output: a plan-view + depth scatter of
estimated fixes against ground truth, and horizontal GDOP heatmap slices.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .solver import SOLVABLE_GDOP, Cylinder


def _draw_volume_outline(ax, volume):
    if isinstance(volume, Cylinder):
        theta = np.linspace(0.0, 2.0 * np.pi, 181)
        ax.plot(volume.center[0] + volume.radius * np.cos(theta),
                volume.center[1] + volume.radius * np.sin(theta),
                color="0.6", lw=1.0, ls="--")
    elif volume is not None:
        x0, y0 = volume.mins[0], volume.mins[1]
        x1, y1 = volume.maxs[0], volume.maxs[1]
        ax.plot([x0, x1, x1, x0, x0], [y0, y0, y1, y1, y0],
                color="0.6", lw=1.0, ls="--")


def plot_fixes(results, path, volume=None, constellation=None):
    """Two panels: XY plan view and per-waypoint depth comparison."""
    fig, (ax_xy, ax_z) = plt.subplots(
        1, 2, figsize=(10.5, 5), gridspec_kw={"width_ratios": [1.2, 1]})

    _draw_volume_outline(ax_xy, volume)
    if constellation is not None:
        ax_xy.scatter(constellation.speakers[:, 0], constellation.speakers[:, 1],
                      marker="^", s=70, color="k", label="speakers", zorder=3)

    labels, truth_z, est_z = [], [], []
    first = True
    for r in results:
        labels.append(f"P{r.index + 1}")
        tp = r.truth.position
        truth_z.append(tp[2])
        ax_xy.scatter([tp[0]], [tp[1]], marker="x", color="tab:blue",
                      s=50, label="truth" if first else None, zorder=4)
        ests = [f.estimate.position for f in r.fixes if f.converged]
        if ests:
            ests = np.asarray(ests)
            ax_xy.scatter(ests[:, 0], ests[:, 1], marker="o", s=18,
                          facecolors="none", edgecolors="tab:red",
                          label="estimate" if first else None, zorder=4)
            est_z.append(float(np.mean(ests[:, 2])))
        else:
            est_z.append(math.nan)
        first = False

    ax_xy.set_xlabel("x [m]")
    ax_xy.set_ylabel("y [m]")
    ax_xy.set_aspect("equal")
    ax_xy.legend(loc="upper right", fontsize=8)
    ax_xy.set_title("plan view")

    idx = np.arange(len(labels))
    ax_z.plot(idx, truth_z, "x-", color="tab:blue", label="truth")
    ax_z.plot(idx, est_z, "o--", color="tab:red", mfc="none", label="estimate")
    ax_z.set_xticks(idx)
    ax_z.set_xticklabels(labels, rotation=45, fontsize=8)
    ax_z.set_ylabel("depth z [m]")
    ax_z.invert_yaxis()
    ax_z.legend(fontsize=8)
    ax_z.set_title("depth")

    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_gdop_slices(grid, path, n_slices=3):
    """Heatmap of GDOP on up to ``n_slices`` horizontal planes of the grid.

    Unsolvable cells (GDOP beyond the solvable limit, or singular geometry)
    are drawn in grey so holes in coverage stand out.
    """
    pts = np.asarray(grid.points)
    vals = np.asarray(grid.values)
    z_levels = np.unique(np.round(pts[:, 2], 9))
    if len(z_levels) > n_slices:
        pick = np.linspace(0, len(z_levels) - 1, n_slices).round().astype(int)
        z_levels = z_levels[np.unique(pick)]

    fig, axes = plt.subplots(1, len(z_levels),
                             figsize=(4.2 * len(z_levels), 4), squeeze=False)
    xs = np.unique(np.round(pts[:, 0], 9))
    ys = np.unique(np.round(pts[:, 1], 9))
    xi = {v: i for i, v in enumerate(xs)}
    yi = {v: i for i, v in enumerate(ys)}

    last = None
    for ax, z in zip(axes[0], z_levels):
        img = np.full((len(ys), len(xs)), np.nan)
        mask = np.isclose(pts[:, 2], z)
        for (x, y, _), g in zip(pts[mask], vals[mask]):
            img[yi[round(float(y), 9)], xi[round(float(x), 9)]] = \
                g if math.isfinite(g) else np.nan
        cmap = plt.get_cmap("viridis_r").copy()
        cmap.set_bad("0.75")
        # a single-row/column grid still needs a nonzero drawing extent
        pad = grid.spacing / 2.0
        extent = (xs[0] - pad, xs[-1] + pad, ys[0] - pad, ys[-1] + pad)
        last = ax.imshow(img, origin="lower", cmap=cmap,
                         vmin=0.0, vmax=SOLVABLE_GDOP, extent=extent)
        ax.set_title(f"z = {z:.2f} m", fontsize=9)
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")

    fig.colorbar(last, ax=axes[0].tolist(), shrink=0.85, label="GDOP")
    fig.savefig(path, dpi=130)
    plt.close(fig)
