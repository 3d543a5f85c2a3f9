"""Pinhole ray-cast rendering of flat-shaded agent boxes."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from fishingnet.config import ConfigError, ConfigMixin
from fishingnet.grid import SemClass
from fishingnet.sim.scene import Scene

SKY = np.array([135, 190, 235], dtype=np.float64)
GROUND = np.array([96, 96, 96], dtype=np.float64)
CLASS_BASE_COLOR = {
    SemClass.VRU: np.array([230, 60, 40], dtype=np.float64),
    SemClass.VEHICLE: np.array([40, 170, 70], dtype=np.float64),
}
# shading factor per face: +x/-x (front/back), +y/-y (sides), top
_FACE_SHADE = np.array([0.9, 0.9, 0.7, 0.7, 1.0, 1.0])


@dataclass
class CameraRig(ConfigMixin):
    n_cameras: int = 4
    fov_deg: float = 110.0
    height_px: int = 192
    width_px: int = 320
    mount_height: float = 1.6

    def validate(self) -> None:
        if self.n_cameras < 1:
            raise ConfigError("rig needs at least one camera")
        if not 0 < self.fov_deg < 180:
            raise ConfigError("fov_deg must be in (0, 180)")
        if self.height_px < 1 or self.width_px < 1:
            raise ConfigError("image size must be positive")

    def yaw_offsets(self) -> np.ndarray:
        """Camera headings relative to ego forward, evenly spread over 360 degrees."""
        return np.array([2.0 * math.pi * i / self.n_cameras for i in range(self.n_cameras)])

    def focal_px(self) -> float:
        return (self.width_px / 2.0) / math.tan(math.radians(self.fov_deg) / 2.0)

    def ray_directions(self) -> np.ndarray:
        """(H, W, 3) unit rays in the camera frame (x forward, y left, z up)."""
        f = self.focal_px()
        rows = np.arange(self.height_px) + 0.5 - self.height_px / 2.0
        cols = np.arange(self.width_px) + 0.5 - self.width_px / 2.0
        c, r = np.meshgrid(cols, rows)
        d = np.stack([np.full_like(c, f), -c, -r], axis=-1)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)


def _render(rig: CameraRig, origin: np.ndarray, heading: float, boxes) -> np.ndarray:
    dirs_cam = rig.ray_directions().reshape(-1, 3)
    ch, sh = math.cos(heading), math.sin(heading)
    dirs = np.empty_like(dirs_cam)
    dirs[:, 0] = ch * dirs_cam[:, 0] - sh * dirs_cam[:, 1]
    dirs[:, 1] = sh * dirs_cam[:, 0] + ch * dirs_cam[:, 1]
    dirs[:, 2] = dirs_cam[:, 2]

    n = len(dirs)
    color = np.tile(SKY, (n, 1))
    depth = np.full(n, np.inf)
    down = dirs[:, 2] < 0
    t_ground = np.where(down, -origin[2] / np.where(down, dirs[:, 2], -1.0), np.inf)
    color[down] = GROUND
    depth[down] = t_ground[down]

    for (cx, cy, yaw, L, W, H, cls) in boxes:
        c, s = math.cos(yaw), math.sin(yaw)
        ox, oy = origin[0] - cx, origin[1] - cy
        o_local = np.array([c * ox + s * oy, -s * ox + c * oy, origin[2]])
        d_local = np.column_stack([c * dirs[:, 0] + s * dirs[:, 1], -s * dirs[:, 0] + c * dirs[:, 1], dirs[:, 2]])
        lo = np.array([-L / 2, -W / 2, 0.0])
        hi = np.array([L / 2, W / 2, H])
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / d_local
            t1 = (lo - o_local) * inv
            t2 = (hi - o_local) * inv
        tmin_axes = np.where(np.isnan(t1), -np.inf, np.minimum(t1, t2))
        tmax_axes = np.where(np.isnan(t2), np.inf, np.maximum(t1, t2))
        t_enter = tmin_axes.max(axis=1)
        t_exit = tmax_axes.min(axis=1)
        hit = (t_exit >= t_enter) & (t_enter > 0) & (t_enter < depth)
        if not hit.any():
            continue
        axis = tmin_axes.argmax(axis=1)
        # entering through the low slab of an axis means the face normal points negative
        negative = d_local[np.arange(n), axis] > 0
        face = 2 * axis + negative.astype(np.int64)
        shade = _FACE_SHADE[face]
        color[hit] = CLASS_BASE_COLOR[SemClass(cls)] * shade[hit, None]
        depth[hit] = t_enter[hit]

    return np.clip(np.round(color), 0, 255).astype(np.uint8).reshape(rig.height_px, rig.width_px, 3)


def simulate_cameras(scene: Scene, k: int, rig: CameraRig | None = None) -> np.ndarray:
    """Render every rig camera at timestep index ``k``; returns (n_cameras, H, W, 3) uint8."""
    rig = rig or CameraRig()
    t = scene.times[k]
    ego = scene.ego_pose(k)
    boxes = []
    for a in scene.agents:
        p = a.pose_at(t)
        boxes.append((p.x, p.y, p.yaw, a.length, a.width, a.height, int(a.cls)))
    origin = np.array([ego.x, ego.y, rig.mount_height])
    return np.stack([_render(rig, origin, ego.yaw + off, boxes) for off in rig.yaw_offsets()])
