"""Per-modality input tensors in the ego-at-t0 grid.

Lidar: 8 channels per timestep
    0 occupancy, 1 log density ln(1+n)/ln(1+n_cap) clamped to 1, 2 max z,
    3-7 max z inside the height slices [0,0.5), [0.5,1), ..., [2,2.5) m.
Radar: 6 channels per timestep
    0 occupancy, 1-2 ego-compensated velocity (vx, vy) in m/s, 3 RCS, 4 SNR,
    5 Doppler ambiguity interval (3-5 min-max normalized, see RadarNorm).

Timesteps are stacked timestep-major, oldest first, so channel
``k * C + c`` holds channel ``c`` of input frame ``k``. Cells without data
hold 0 in every channel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from fishingnet.config import ConfigMixin
from fishingnet.geometry import FrameId, FrameKind, IDENTITY, Pose2, compensate_doppler_array, to_ego_frame_array
from fishingnet.grid import GridSpec, cells_of
from fishingnet.sim.sensors import RadarReturns

LIDAR_CHANNELS = 8
RADAR_CHANNELS = 6
N_INPUT_FRAMES = 5
SLICE_EDGES = (0.0, 0.5, 1.0, 1.5, 2.0, 2.5)


@dataclass
class RadarNorm(ConfigMixin):
    rcs_range: tuple[float, float] = (-20.0, 30.0)
    snr_db_range: tuple[float, float] = (-10.0, 50.0)
    doppler_interval_scale: float = 50.0

    def normalize_rcs(self, rcs: np.ndarray) -> np.ndarray:
        lo, hi = self.rcs_range
        return np.clip((rcs - lo) / (hi - lo), 0.0, 1.0)

    def normalize_snr(self, snr: np.ndarray) -> np.ndarray:
        lo, hi = self.snr_db_range
        db = 10.0 * np.log10(np.maximum(snr, 1e-12))
        return np.clip((db - lo) / (hi - lo), 0.0, 1.0)


def _cell_index(spec: GridSpec, xy: np.ndarray) -> np.ndarray:
    """Flat cell index per point, -1 outside the grid."""
    r, c, inside = cells_of(spec, xy)
    return np.where(inside, r * spec.cols_y + c, -1)


def lidar_frame_features(points_t0: np.ndarray, spec: GridSpec, n_cap: int = 64) -> np.ndarray:
    """(rows, cols, 8) features for points already in the ego-at-t0 frame."""
    n_cells = spec.rows_x * spec.cols_y
    out = np.zeros((n_cells, LIDAR_CHANNELS), dtype=np.float64)
    pts = np.asarray(points_t0, dtype=np.float64).reshape(-1, 3)
    idx = _cell_index(spec, pts[:, :2])
    keep = idx >= 0
    idx, z = idx[keep], pts[keep, 2]
    if len(idx):
        counts = np.bincount(idx, minlength=n_cells)
        occupied = counts > 0
        out[:, 0] = occupied
        out[:, 1] = np.minimum(np.log1p(counts) / math.log1p(n_cap), 1.0)
        zmax = np.full(n_cells, -np.inf)
        np.maximum.at(zmax, idx, z)
        out[:, 2] = np.where(occupied, zmax, 0.0)
        for j in range(5):
            in_slice = (z >= SLICE_EDGES[j]) & (z < SLICE_EDGES[j + 1])
            smax = np.full(n_cells, -np.inf)
            np.maximum.at(smax, idx[in_slice], z[in_slice])
            out[:, 3 + j] = np.where(np.isfinite(smax), smax, 0.0)
    return out.reshape(spec.rows_x, spec.cols_y, LIDAR_CHANNELS)


def featurize_lidar(points_per_timestep: Sequence[np.ndarray], ego_poses: Sequence[Pose2], spec: GridSpec,
                    n_cap: int = 64, frame: FrameId | None = None) -> np.ndarray:
    """Stacked lidar features, (rows, cols, 8 * T) float32.

    ``ego_poses[-1]`` is the pose at t0. Points are world-frame unless
    ``frame`` is ``FrameId.ego_at(...)``, in which case each timestep's points
    are taken relative to that timestep's ego pose.
    """
    frame = frame or FrameId.world()
    t0 = ego_poses[-1]
    blocks = []
    for k, pts in enumerate(points_per_timestep):
        source = IDENTITY if frame.kind == FrameKind.WORLD else ego_poses[k]
        local = to_ego_frame_array(np.asarray(pts, dtype=np.float64).reshape(-1, 3), source, t0)
        blocks.append(lidar_frame_features(local, spec, n_cap))
    return np.concatenate(blocks, axis=-1).astype(np.float32)


def radar_frame_features(returns: RadarReturns, ego_pose: Pose2, ego_velocity: Sequence[float],
                         ego_pose_t0: Pose2, spec: GridSpec, norm: RadarNorm | None = None) -> np.ndarray:
    """(rows, cols, 6) features for one scan expressed in the ``ego_pose`` frame."""
    norm = norm or RadarNorm()
    n_cells = spec.rows_x * spec.cols_y
    out = np.zeros((n_cells, RADAR_CHANNELS), dtype=np.float64)
    if len(returns) == 0:
        return out.reshape(spec.rows_x, spec.cols_y, RADAR_CHANNELS)
    pos3 = np.column_stack([returns.position.reshape(-1, 2), np.zeros(len(returns))])
    pos_t0 = to_ego_frame_array(pos3, ego_pose, ego_pose_t0)[:, :2]
    vel = compensate_doppler_array(returns.radial_velocity, returns.azimuth, tuple(ego_velocity))
    dyaw = ego_pose.yaw - ego_pose_t0.yaw
    c, s = math.cos(dyaw), math.sin(dyaw)
    vel_t0 = np.column_stack([c * vel[:, 0] - s * vel[:, 1], s * vel[:, 0] + c * vel[:, 1]])
    feats = np.column_stack([np.ones(len(returns)), vel_t0, norm.normalize_rcs(returns.rcs),
                             norm.normalize_snr(returns.snr), returns.doppler_interval / norm.doppler_interval_scale])
    idx = _cell_index(spec, pos_t0)
    keep = idx >= 0
    idx, feats, snr = idx[keep], feats[keep], returns.snr[keep]
    if len(idx):
        # max-SNR return per cell; remaining columns break exact SNR ties so the
        # result does not depend on return order
        order = np.lexsort(tuple(feats[:, j] for j in range(feats.shape[1] - 1, -1, -1)) + (snr, idx))
        idx_sorted = idx[order]
        last = np.r_[idx_sorted[1:] != idx_sorted[:-1], True]
        out[idx_sorted[last]] = feats[order][last]
    return out.reshape(spec.rows_x, spec.cols_y, RADAR_CHANNELS)


def featurize_radar(returns_per_timestep: Sequence[RadarReturns], ego_poses: Sequence[Pose2],
                    ego_velocities: Sequence[Sequence[float]], spec: GridSpec,
                    norm: RadarNorm | None = None) -> np.ndarray:
    """Stacked radar features, (rows, cols, 6 * T) float32.

    Return positions and ``ego_velocities[k]`` are in the ego frame of
    timestep k; ``ego_poses[-1]`` is the t0 pose.
    """
    t0 = ego_poses[-1]
    blocks = [radar_frame_features(r, ego_poses[k], ego_velocities[k], t0, spec, norm)
              for k, r in enumerate(returns_per_timestep)]
    return np.concatenate(blocks, axis=-1).astype(np.float32)


def assemble_vision_input(images: np.ndarray, image_shape: tuple[int, int] | None = None) -> np.ndarray:
    """(cams, T, H, W, 3) uint8 images to float32 in [0, 1], same ordering."""
    images = np.asarray(images)
    if images.ndim != 5 or images.shape[-1] != 3:
        raise ValueError(f"expected (cams, T, H, W, 3) images, got shape {images.shape}")
    if image_shape is not None and tuple(images.shape[2:4]) != tuple(image_shape):
        raise ValueError(f"image size {images.shape[2:4]} does not match expected {tuple(image_shape)}")
    if images.dtype == np.uint8:
        return images.astype(np.float32) / 255.0
    return np.clip(images.astype(np.float32), 0.0, 1.0)


def featurize_sample(sample, modality: str, n_cap: int = 64, norm: RadarNorm | None = None) -> np.ndarray:
    """Network input for one sample.

    lidar/radar give (rows, cols, C*T); vision gives (cams, T, H, W, 3).
    """
    if modality == "lidar":
        return featurize_lidar(sample.inputs.lidar, sample.ego_poses, sample.spec, n_cap)
    if modality == "radar":
        return featurize_radar(sample.inputs.radar, sample.ego_poses, sample.ego_velocities, sample.spec, norm)
    if modality == "vision":
        if sample.inputs.images is None:
            raise ValueError("sample has no camera images")
        return assemble_vision_input(sample.inputs.images, sample.spec.shape)
    raise ValueError(f"unknown modality {modality!r}")
