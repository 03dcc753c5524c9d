"""Figure rendering for run artifacts.

Every CSV a run writes gets a rendered companion so a directory is
readable at a glance: heatmaps for grids, line charts for metric curves,
scatter plots for sample clouds. All rendering is headless (Agg) and
deterministic; figures are a presentation of the CSV, never an extra
source of truth.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_heatmap(path, xs, ys, grid, title="", colorbar_label="", overlays=()):
    """Render grid[j, i] over (xs[i], ys[j]) with optional point overlays."""
    fig, ax = plt.subplots(figsize=(5.0, 4.2), constrained_layout=True)
    mesh = ax.pcolormesh(xs, ys, grid, shading="nearest", cmap="viridis")
    cbar = fig.colorbar(mesh, ax=ax)
    if colorbar_label:
        cbar.set_label(colorbar_label)
    for points, style in overlays:
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        ax.plot(pts[:, 0], pts[:, 1], style, markersize=9, markeredgecolor="white")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_curves(path, rows, x_key, y_keys, title="", reference=None, logy=False):
    """Line chart of the named columns; `reference` draws a horizontal rule."""
    fig, ax = plt.subplots(figsize=(5.6, 3.6), constrained_layout=True)
    xs = [row[x_key] for row in rows]
    for key in y_keys:
        ys = [row[key] for row in rows]
        ax.plot(xs, ys, label=key, linewidth=1.2)
    if reference is not None:
        ax.axhline(reference, color="dimgray", linestyle="--", linewidth=1.0)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(x_key)
    ax.legend(frameon=False, fontsize=8)
    if title:
        ax.set_title(title)
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_scatter(path, samples, target=None, title=""):
    """Sample cloud, with the target mixture means marked if given."""
    samples = np.asarray(samples, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(4.4, 4.4), constrained_layout=True)
    ax.plot(samples[:, 0], samples[:, 1], ".", markersize=2, alpha=0.4)
    if target is not None:
        means = np.asarray(target.means)
        ax.plot(means[:, 0], means[:, 1], "r+", markersize=10)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_trajectories(path, spec, trajectories, title=""):
    """Episode paths over the maze geometry (walls, start, goal)."""
    fig, ax = plt.subplots(figsize=(4.6, 4.6), constrained_layout=True)
    xmin, xmax, ymin, ymax = spec.bounds
    for wall in spec.walls:
        if wall.axis == "h":
            ax.plot([wall.lo, wall.hi], [wall.level, wall.level], "k-", linewidth=3)
        else:
            ax.plot([wall.level, wall.level], [wall.lo, wall.hi], "k-", linewidth=3)
    for traj in trajectories:
        traj = np.asarray(traj)
        ax.plot(traj[:, 0], traj[:, 1], "-", linewidth=0.8, alpha=0.6)
    ax.plot(*spec.start_mean, "bs", markersize=8)
    ax.plot(*spec.goal, "g*", markersize=14)
    ax.set_xlim(xmin, xmax)
    ax.set_ylim(ymin, ymax)
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    fig.savefig(path, dpi=110)
    plt.close(fig)
