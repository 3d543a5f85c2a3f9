"""Top-down semantic grids.

Axis convention: grid rows run along ego x (forward) and columns along ego y
(left). ``origin_offset`` is the position of the ego origin measured from the
outer corner of cell (0, 0), so::

    row = floor((x + origin_offset[0]) / resolution)
    col = floor((y + origin_offset[1]) / resolution)

Class channel order is (VRU, Vehicle, Background). When classes must be
ranked (overlapping boxes, argmax ties) VRU beats Vehicle beats Background,
which is also index order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Sequence

import numpy as np

HORIZONS_S = (0.0, 0.5, 1.0, 1.5, 2.0)


class SemClass(IntEnum):
    VRU = 0
    VEHICLE = 1
    BACKGROUND = 2


NUM_CLASSES = len(SemClass)
CLASS_NAMES = tuple(c.name.lower() for c in SemClass)

# RGB per class, indexed by SemClass value
CLASS_COLORS = np.array([[255, 0, 0], [0, 255, 0], [0, 0, 255]], dtype=np.uint8)


@dataclass(frozen=True)
class GridSpec:
    rows_x: int = 48
    cols_y: int = 80
    resolution: float = 0.25
    origin_offset: tuple[float, float] | None = None

    def __post_init__(self):
        if self.rows_x < 1 or self.cols_y < 1:
            raise ValueError("grid must have at least one row and column")
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        if self.origin_offset is None:
            # ego centered
            object.__setattr__(self, "origin_offset",
                               (self.rows_x * self.resolution / 2.0,
                                self.cols_y * self.resolution / 2.0))
        else:
            object.__setattr__(self, "origin_offset",
                               (float(self.origin_offset[0]), float(self.origin_offset[1])))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows_x, self.cols_y)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Ego-frame x of each row center and y of each column center."""
        xs = (np.arange(self.rows_x) + 0.5) * self.resolution - self.origin_offset[0]
        ys = (np.arange(self.cols_y) + 0.5) * self.resolution - self.origin_offset[1]
        return xs, ys

    def to_dict(self) -> dict:
        return {"rows_x": self.rows_x, "cols_y": self.cols_y,
                "resolution": self.resolution, "origin_offset": list(self.origin_offset)}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        off = d.get("origin_offset")
        return cls(int(d["rows_x"]), int(d["cols_y"]), float(d["resolution"]),
                   tuple(off) if off is not None else None)


FULL_GRID_10CM = GridSpec(192, 320, 0.1)
FULL_GRID_20CM = GridSpec(192, 320, 0.2)


def coverage_m2(spec: GridSpec) -> float:
    """Area covered by the grid. 192x320 cells give 614.4 m^2 at 10 cm and
    2457.6 m^2 at 20 cm (often quoted rounded down to 614 and 2457)."""
    # integer cell count times squared resolution; rounded to absorb the
    # binary representation error of the resolution itself
    return round(spec.rows_x * spec.cols_y * spec.resolution * spec.resolution, 9)


def cell_of(spec: GridSpec, point: Sequence[float]) -> tuple[int, int] | None:
    """Cell containing an ego-frame (x, y) point, or None outside the grid."""
    r = math.floor((point[0] + spec.origin_offset[0]) / spec.resolution)
    c = math.floor((point[1] + spec.origin_offset[1]) / spec.resolution)
    if 0 <= r < spec.rows_x and 0 <= c < spec.cols_y:
        return (r, c)
    return None


def cells_of(spec: GridSpec, xy: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized :func:`cell_of`. Returns (rows, cols, inside_mask)."""
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    r = np.floor((xy[:, 0] + spec.origin_offset[0]) / spec.resolution).astype(np.int64)
    c = np.floor((xy[:, 1] + spec.origin_offset[1]) / spec.resolution).astype(np.int64)
    inside = (r >= 0) & (r < spec.rows_x) & (c >= 0) & (c < spec.cols_y)
    return r, c, inside


@dataclass(frozen=True)
class OrientedBox:
    center: tuple[float, float]
    length: float
    width: float
    yaw: float
    cls: SemClass

    def __post_init__(self):
        if not (self.length > 0 and self.width > 0):
            raise ValueError("box length and width must be positive")

    def contains(self, xy: np.ndarray) -> np.ndarray:
        """Boolean mask of (N, 2) points inside the box footprint (edges included)."""
        xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
        d = xy - np.asarray(self.center, dtype=np.float64)
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        along = d[:, 0] * c + d[:, 1] * s
        across = -d[:, 0] * s + d[:, 1] * c
        return (np.abs(along) <= self.length / 2.0) & (np.abs(across) <= self.width / 2.0)

    def corners(self) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        hl, hw = self.length / 2.0, self.width / 2.0
        local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.asarray(self.center, dtype=np.float64)


def rasterize_labels(boxes: Sequence[OrientedBox], spec: GridSpec) -> np.ndarray:
    """Integer label grid (rows, cols) from boxes by cell-center containment."""
    labels = np.full(spec.shape, int(SemClass.BACKGROUND), dtype=np.int64)
    xs, ys = spec.cell_centers()
    # paint lowest priority first so VRU ends on top
    for cls in (SemClass.VEHICLE, SemClass.VRU):
        for box in boxes:
            if box.cls != cls:
                continue
            corners = box.corners()
            lo = corners.min(axis=0)
            hi = corners.max(axis=0)
            r0 = max(0, int(math.floor((lo[0] + spec.origin_offset[0]) / spec.resolution)) - 1)
            r1 = min(spec.rows_x, int(math.ceil((hi[0] + spec.origin_offset[0]) / spec.resolution)) + 1)
            c0 = max(0, int(math.floor((lo[1] + spec.origin_offset[1]) / spec.resolution)) - 1)
            c1 = min(spec.cols_y, int(math.ceil((hi[1] + spec.origin_offset[1]) / spec.resolution)) + 1)
            if r0 >= r1 or c0 >= c1:
                continue
            gx, gy = np.meshgrid(xs[r0:r1], ys[c0:c1], indexing="ij")
            mask = box.contains(np.stack([gx.ravel(), gy.ravel()], axis=1)).reshape(gx.shape)
            labels[r0:r1, c0:c1][mask] = int(cls)
    return labels


def one_hot(labels: np.ndarray, dtype=np.float32) -> np.ndarray:
    """(..., ) integer labels to (..., 3) one-hot probabilities."""
    return np.eye(NUM_CLASSES, dtype=dtype)[labels]


@dataclass
class SemanticGrid:
    spec: GridSpec
    data: np.ndarray  # (rows, cols, 3)
    timestep: float = 0.0

    def validate(self, atol: float = 1e-5) -> None:
        if self.data.shape != (*self.spec.shape, NUM_CLASSES):
            raise ValueError(f"grid data shape {self.data.shape} does not match {self.spec}")
        if np.any(self.data < -atol) or np.any(self.data > 1 + atol):
            raise ValueError("grid values outside [0, 1]")
        if not np.allclose(self.data.sum(axis=-1), 1.0, atol=atol):
            raise ValueError("grid cells are not normalized")


def rasterize(boxes: Sequence[OrientedBox], spec: GridSpec, timestep: float = 0.0) -> SemanticGrid:
    """One-hot grid of boxes given in the ego-at-t0 frame."""
    return SemanticGrid(spec, one_hot(rasterize_labels(boxes, spec)), timestep)


def argmax_labels(probs: np.ndarray) -> np.ndarray:
    """Per-cell class labels over the last axis; ties go to the lower index,
    i.e. the higher-priority class."""
    if isinstance(probs, SemanticGrid):
        probs = probs.data
    return np.argmax(probs, axis=-1)


@dataclass
class GridSequence:
    """Grids at horizons 0..2 s, stored as one (rows, cols, 3, T) array."""

    spec: GridSpec
    probs: np.ndarray
    timesteps: tuple[float, ...] = field(default=HORIZONS_S)

    def __post_init__(self):
        if self.probs.shape != (*self.spec.shape, NUM_CLASSES, len(self.timesteps)):
            raise ValueError(f"sequence shape {self.probs.shape} does not match "
                             f"{self.spec.shape} x {NUM_CLASSES} x {len(self.timesteps)}")

    def __len__(self) -> int:
        return len(self.timesteps)

    def grid(self, k: int) -> SemanticGrid:
        return SemanticGrid(self.spec, self.probs[..., k], self.timesteps[k])

    @property
    def grids(self) -> list[SemanticGrid]:
        return [self.grid(k) for k in range(len(self))]

    def labels(self) -> np.ndarray:
        """(T, rows, cols) argmax labels."""
        return np.moveaxis(argmax_labels(np.moveaxis(self.probs, 2, -1)), -1, 0)

    @classmethod
    def from_labels(cls, spec: GridSpec, labels: np.ndarray,
                    timesteps: tuple[float, ...] = HORIZONS_S) -> "GridSequence":
        """Build a one-hot sequence from (T, rows, cols) labels."""
        probs = np.moveaxis(one_hot(labels), 0, -1)
        return cls(spec, probs, timesteps)


def grid_to_rgb(labels: np.ndarray) -> np.ndarray:
    """Colour a (rows, cols) label grid as an image with forward up and left on
    the left: image row 0 is the farthest-forward grid row and image column 0
    the leftmost grid column."""
    return CLASS_COLORS[labels[::-1, ::-1]]


def render_png(grid: SemanticGrid | np.ndarray, path: str | Path) -> Path:
    """Write a lossless PNG with one pixel per cell.

    Vehicles are green, VRUs red, background blue.
    """
    import matplotlib.image as mpimg

    labels = argmax_labels(grid) if isinstance(grid, SemanticGrid) else np.asarray(grid)
    if labels.ndim == 3:
        labels = argmax_labels(labels)
    path = Path(path)
    mpimg.imsave(path, grid_to_rgb(labels), format="png")
    return path
