"""Matplotlib figures for reports: horizon curves and sample/prediction panels."""
from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from fishingnet.grid import CLASS_NAMES, HORIZONS_S, grid_to_rgb  # noqa: E402

_RC = {
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
}
# fixed PNG metadata keeps repeated renders byte-comparable
_PNG_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, metadata=_PNG_META, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_horizon_curves(rows: Sequence[dict], out_dir: str | Path, prefix: str = "horizon") -> list[Path]:
    """One PNG per metric: a panel per class, one line per predictor over horizon."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics = sorted({r["metric"] for r in rows}, key=lambda m: ("precision", "recall", "iou", "accuracy").index(m))
    predictors = list(dict.fromkeys(r["predictor"] for r in rows))
    paths = []
    with plt.rc_context(_RC):
        for metric in metrics:
            fig, axes = plt.subplots(1, len(CLASS_NAMES), figsize=(3.2 * len(CLASS_NAMES), 2.8), sharey=True)
            for ax, cname in zip(axes, CLASS_NAMES):
                for p in predictors:
                    pts = sorted((r["horizon_s"], r["value"]) for r in rows
                                 if r["metric"] == metric and r["class"] == cname and r["predictor"] == p)
                    if pts:
                        xs, ys = zip(*pts)
                        ax.plot(xs, ys, marker="o", ms=3, label=p)
                ax.set_title(cname)
                ax.set_xlabel("horizon [s]")
                ax.set_xticks(HORIZONS_S)
                ax.set_ylim(-0.02, 1.02)
            axes[0].set_ylabel(metric)
            axes[-1].legend(loc="lower left", fontsize=7, frameon=False)
            fig.tight_layout()
            paths.append(_save(fig, out_dir / f"{prefix}_{metric}.png"))
    return paths


def plot_loss_curve(history: Sequence[dict], path: str | Path) -> Path:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.5, 3))
        ax.plot([h["step"] for h in history], [h["loss"] for h in history], lw=1)
        ax.set_xlabel("step")
        ax.set_ylabel("mean weighted CE")
        ax.set_yscale("log")
        fig.tight_layout()
        return _save(fig, Path(path))


def render_sequence_panels(sequences: Mapping[str, np.ndarray], path: str | Path,
                           horizons: Sequence[float] = HORIZONS_S) -> Path:
    """Grid of label images: one row per named (T, rows, cols) label sequence."""
    names = list(sequences)
    n_t = len(horizons)
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(len(names), n_t, figsize=(1.9 * n_t, 1.5 * len(names) + 0.3), squeeze=False)
        for i, name in enumerate(names):
            for t in range(n_t):
                ax = axes[i][t]
                ax.imshow(grid_to_rgb(np.asarray(sequences[name][t])), interpolation="nearest")
                ax.set_xticks([])
                ax.set_yticks([])
                ax.grid(False)
                if i == 0:
                    ax.set_title(f"t={horizons[t]:.1f}s")
                if t == 0:
                    ax.set_ylabel(name)
        fig.tight_layout()
        return _save(fig, Path(path))


def render_input_panels(lidar: np.ndarray | None, radar: np.ndarray | None, images: np.ndarray | None,
                        path: str | Path) -> Path:
    """Input overview at t0: lidar occupancy/density/max z/first slice, radar
    velocity quiver, and one frame per camera.

    ``lidar`` and ``radar`` are stacked (rows, cols, C*T) feature grids;
    ``images`` is (cams, T, H, W, 3).
    """
    panels = []
    if lidar is not None:
        t0 = lidar[..., -8:]
        panels += [("lidar occupancy", t0[..., 0], "gray"), ("lidar density", t0[..., 1], "viridis"),
                   ("max z", t0[..., 2], "magma"), ("max z slice 0-0.5 m", t0[..., 3], "magma")]
    if radar is not None:
        panels.append(("radar velocity", radar[..., -6:], "quiver"))
    if images is not None:
        for c in range(images.shape[0]):
            panels.append((f"camera {c}", images[c, -1], "rgb"))
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, max(1, len(panels)), figsize=(2.4 * max(1, len(panels)), 2.4), squeeze=False)
        for ax, (title, data, kind) in zip(axes[0], panels):
            ax.grid(False)
            if kind == "quiver":
                occ = data[..., 0] > 0
                r, c = np.nonzero(occ)
                rows, cols = occ.shape
                # forward up, left on the left (same orientation as label images)
                ax.quiver(cols - 1 - c, rows - 1 - r, -data[r, c, 2], data[r, c, 1], angles="xy")
                ax.set_xlim(0, cols)
                ax.set_ylim(0, rows)
                ax.set_aspect("equal")
            elif kind == "rgb":
                ax.imshow(data)
            else:
                ax.imshow(data[::-1, ::-1], cmap=kind, interpolation="nearest")
            ax.set_title(title, fontsize=7)
            ax.set_xticks([])
            ax.set_yticks([])
        fig.tight_layout()
        return _save(fig, Path(path))
