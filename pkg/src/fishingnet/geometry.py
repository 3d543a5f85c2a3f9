"""Planar ego-motion geometry.

Conventions: x forward, y left, z up. Poses are planar (x, y, yaw) and all
arithmetic is double precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


@dataclass(frozen=True)
class Pose2:
    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "yaw", normalize_angle(float(self.yaw)))

    def rotation(self) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, -s], [s, c]])

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.yaw)


IDENTITY = Pose2()


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError(f"non-finite point {self!r}")


class FrameKind(Enum):
    WORLD = "world"
    EGO = "ego"


@dataclass(frozen=True)
class FrameId:
    """Tag for the frame a point set is expressed in.

    ``FrameId.world()`` or ``FrameId.ego_at(k)`` where ``k`` indexes the
    scene timesteps.
    """

    kind: FrameKind
    timestep: int | None = None

    @classmethod
    def world(cls) -> "FrameId":
        return cls(FrameKind.WORLD)

    @classmethod
    def ego_at(cls, timestep: int) -> "FrameId":
        return cls(FrameKind.EGO, int(timestep))


def compose(a: Pose2, b: Pose2) -> Pose2:
    """Rigid motion that applies ``b`` first, then ``a``."""
    c, s = math.cos(a.yaw), math.sin(a.yaw)
    return Pose2(a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y, a.yaw + b.yaw)


def inverse(p: Pose2) -> Pose2:
    c, s = math.cos(p.yaw), math.sin(p.yaw)
    return Pose2(-(c * p.x + s * p.y), -(-s * p.x + c * p.y), -p.yaw)


def transform_xy(pose: Pose2, xy: np.ndarray) -> np.ndarray:
    """Map (N, 2) points from the pose's local frame into its parent frame."""
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    return xy @ pose.rotation().T + np.array([pose.x, pose.y])


def world_to_local(pose: Pose2, xy: np.ndarray) -> np.ndarray:
    """Express (N, 2) parent-frame points in the frame of ``pose``."""
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    return (xy - np.array([pose.x, pose.y])) @ pose.rotation()


def to_ego_frame_array(points: np.ndarray, source_pose: Pose2, ego_pose_t0: Pose2) -> np.ndarray:
    """Array version of :func:`to_ego_frame` for (N, 3) float arrays.

    ``points`` are expressed in the frame of ``source_pose``; pass
    ``IDENTITY`` as the source for world-frame points.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    rel = compose(inverse(ego_pose_t0), source_pose)
    out = np.empty_like(points)
    out[:, :2] = transform_xy(rel, points[:, :2])
    out[:, 2] = points[:, 2]
    return out


def to_ego_frame(points: list[Point3], source_pose: Pose2, ego_pose_t0: Pose2) -> list[Point3]:
    """Re-express points given in the ``source_pose`` frame relative to ``ego_pose_t0``.

    Height is untouched since ego motion is planar.
    """
    if not points:
        return []
    arr = np.array([(p.x, p.y, p.z) for p in points], dtype=np.float64)
    out = to_ego_frame_array(arr, source_pose, ego_pose_t0)
    return [Point3(*row) for row in out]


def compensate_doppler(radial_velocity: float, azimuth: float,
                       ego_velocity: tuple[float, float]) -> tuple[float, float]:
    """Ground-relative velocity of a radar return along its bearing.

    ``radial_velocity`` is the measured range rate (positive = receding) and
    ``ego_velocity`` the sensor velocity, both in the frame that defines
    ``azimuth``. The ego velocity component along the bearing is added back,
    and the result is split into (vx, vy) along the bearing direction.
    """
    ux, uy = math.cos(azimuth), math.sin(azimuth)
    ground_radial = radial_velocity + ego_velocity[0] * ux + ego_velocity[1] * uy
    return (ground_radial * ux, ground_radial * uy)


def compensate_doppler_array(radial_velocity: np.ndarray, azimuth: np.ndarray,
                             ego_velocity: tuple[float, float]) -> np.ndarray:
    ux, uy = np.cos(azimuth), np.sin(azimuth)
    ground_radial = radial_velocity + ego_velocity[0] * ux + ego_velocity[1] * uy
    return np.stack([ground_radial * ux, ground_radial * uy], axis=-1)
