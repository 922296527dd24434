"""CSV and SVG artifact writers with reproducible provenance headers.

Every file starts with comment lines embedding the configuration hash and
the random seed of the run that produced it.  Nothing time-dependent is
written (SVG date metadata is stripped), so identical runs produce
byte-identical artifacts.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .dynamics import Trajectory
from .reach import GridClassification, RegionEstimate

_FLOAT_FMT = "%.9g"


def _header(config_sha256: str, seed, extra: dict = None) -> str:
    lines = [f"# config_sha256={config_sha256}", f"# seed={seed}"]
    for key, val in (extra or {}).items():
        lines.append(f"# {key}={val}")
    return "\n".join(lines)


def _save_csv(path, columns: str, rows: np.ndarray, config_sha256: str,
              seed, extra: dict = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = _header(config_sha256, seed, extra) + f"\n{columns}"
    np.savetxt(path, np.atleast_2d(rows) if np.size(rows) else
               np.zeros((0, len(columns.split(",")))),
               fmt=_FLOAT_FMT, delimiter=",", header=header, comments="")
    return path


def write_trajectory_csv(path, traj: Trajectory, config_sha256: str,
                         seed) -> Path:
    """Columns ``t, x1..xn``, one row per sample."""
    n = traj.states.shape[1]
    cols = "t," + ",".join(f"x{i + 1}" for i in range(n))
    rows = np.column_stack([traj.times, traj.states])
    return _save_csv(path, cols, rows, config_sha256, seed)


def write_cloud_csv(path, points: np.ndarray, tags: np.ndarray,
                    config_sha256: str, seed, extra: dict = None,
                    tag_name: str = "tag") -> Path:
    """Columns ``x1..xn, tag`` for an arbitrary tagged point cloud."""
    points = np.asarray(points, float)
    n = points.shape[1] if points.ndim == 2 and points.size else \
        (points.shape[1] if points.ndim == 2 else 0)
    cols = ",".join(f"x{i + 1}" for i in range(n)) + f",{tag_name}"
    rows = np.column_stack([points, np.asarray(tags, float)]) \
        if len(points) else np.zeros((0, n + 1))
    return _save_csv(path, cols, rows, config_sha256, seed, extra)


def write_points_csv(path, estimate: RegionEstimate, config_sha256: str,
                     seed) -> Path:
    """Columns ``x1..xn, tag`` (tag 0 = forward cloud, 1 = backward)."""
    n = estimate.points.shape[1] if estimate.n_points else \
        len(estimate.params.get("free_axes", ())) + \
        len(estimate.params.get("circle_axes", ()))
    extra = {"kind": estimate.params.get("kind", ""),
             "n_points": estimate.n_points}
    if estimate.diagnostic:
        extra["diagnostic"] = estimate.diagnostic
    if estimate.n_points:
        return write_cloud_csv(path, estimate.points, estimate.cloud,
                               config_sha256, seed, extra)
    cols = ",".join(f"x{i + 1}" for i in range(n)) + ",tag"
    return _save_csv(path, cols, np.zeros((0, n + 1)), config_sha256, seed,
                     extra)


def write_grid_csv(path, grid: GridClassification, config_sha256: str,
                   seed) -> Path:
    """Columns ``cell_center_1..cell_center_m, class`` (0 out / 1 in / 2 unknown)."""
    centers = grid.cell_centers()
    cols = ",".join(f"cell_center_{i + 1}" for i in range(centers.shape[1]))
    cols += ",class"
    rows = np.column_stack([centers, grid.classes])
    return _save_csv(path, cols, rows, config_sha256, seed)


def write_report(path, text: str, config_sha256: str, seed) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_header(config_sha256, seed) + "\n" + text + "\n",
                    encoding="utf-8")
    return path


def _finish_svg(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context({"svg.hashsalt": "nilctrl"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def scatter_svg(path, points: np.ndarray, tags: np.ndarray = None,
                axes=(0, 1), axis_labels=None, title: str = "") -> Path:
    """Scatter plot of a point cloud projected to two coordinates."""
    a, b = axes
    fig, ax = plt.subplots(figsize=(5, 5))
    if len(points):
        colors = tags if tags is not None and len(tags) else None
        ax.scatter(points[:, a], points[:, b], s=1.0, c=colors,
                   cmap="coolwarm", linewidths=0, rasterized=False)
    labels = axis_labels or (f"x{a + 1}", f"x{b + 1}")
    ax.set_xlabel(labels[0])
    ax.set_ylabel(labels[1])
    ax.set_title(title)
    ax.set_aspect("equal", adjustable="datalim")
    return _finish_svg(fig, path)


def timeseries_svg(path, traj: Trajectory, title: str = "") -> Path:
    """Each coordinate of a trajectory against time."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for i in range(traj.states.shape[1]):
        ax.plot(traj.times, traj.states[:, i], label=f"x{i + 1}", lw=1.0)
    ax.set_xlabel("t")
    ax.legend(loc="best", fontsize=8)
    ax.set_title(title)
    return _finish_svg(fig, path)


def heatmap_svg(path, grid: GridClassification, title: str = "") -> Path:
    """Class heatmap over the first two grid axes (others reduced by any-in).

    Cells are drawn 1 where any cell in the reduced axes is classified in,
    0 otherwise; unknown cells count as 0.5 when nothing is in.
    """
    classes = grid.classes.reshape(grid.shape)
    n_axes = classes.ndim
    if n_axes == 1:
        img = (classes == 1).astype(float)[None, :]
    else:
        reduce_axes = tuple(range(2, n_axes))
        inside = (classes == 1)
        unknown = (classes == 2)
        if reduce_axes:
            inside = inside.any(axis=reduce_axes)
            unknown = unknown.any(axis=reduce_axes)
        img = np.where(inside, 1.0, np.where(unknown, 0.5, 0.0))
        img = img.T  # axis 0 on x, axis 1 on y
    fig, ax = plt.subplots(figsize=(5, 5))
    lo0, hi0 = (grid.window[0] if len(grid.free_axes) else (0.0, 1.0))
    if n_axes >= 2 and len(grid.free_axes) >= 2:
        lo1, hi1 = grid.window[1]
    else:
        lo1, hi1 = 0.0, 1.0
    ax.imshow(img, origin="lower", extent=(lo0, hi0, lo1, hi1),
              cmap="viridis", vmin=0.0, vmax=1.0, aspect="auto",
              interpolation="nearest")
    ax.set_title(title)
    return _finish_svg(fig, path)
