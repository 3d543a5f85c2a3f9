"""Synthetic scenes: an ego trajectory plus moving, classed agent boxes."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from fishingnet.config import ConfigError, ConfigMixin
from fishingnet.geometry import Pose2, compose, inverse
from fishingnet.grid import OrientedBox, SemClass

DT = 0.5
# t = -2.0 .. +2.0 s in 0.5 s steps; index 4 is t0
TIMES = tuple(DT * (k - 4) for k in range(9))
T0_INDEX = 4
PAST_INDICES = tuple(range(0, 5))
FUTURE_INDICES = tuple(range(4, 9))

VRU_MAX_SPEED = 3.0
VEHICLE_MAX_SPEED = 15.0


@dataclass
class SceneConfig(ConfigMixin):
    """Knobs for :func:`generate_scene`. Ranges are inclusive (lo, hi) pairs."""

    n_vehicles: tuple[int, int] = (1, 4)
    n_vrus: tuple[int, int] = (0, 3)
    vehicle_speed: tuple[float, float] = (0.0, 8.0)
    vru_speed: tuple[float, float] = (0.0, 2.0)
    vehicle_length: tuple[float, float] = (3.5, 5.5)
    vehicle_width: tuple[float, float] = (1.6, 2.2)
    vehicle_height: tuple[float, float] = (1.4, 2.0)
    vru_length: tuple[float, float] = (0.5, 1.0)
    vru_width: tuple[float, float] = (0.5, 0.8)
    vru_height: tuple[float, float] = (1.5, 1.9)
    max_yaw_rate: float = 0.0
    # agents are placed at t0 uniformly in this ego-frame window (x, y half extents)
    spawn_half_extent: tuple[float, float] = (8.0, 12.0)
    # keep-out square around the ego at t0
    ego_clearance: float = 3.0
    ego_mode: str = "constant_velocity"  # static | constant_velocity
    ego_speed: tuple[float, float] = (0.0, 5.0)
    ego_yaw_rate: tuple[float, float] = (0.0, 0.0)
    world_extent: float = 50.0

    def validate(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple) and len(v) == 2 and v[0] > v[1]:
                raise ConfigError(f"{f.name}: lower bound {v[0]} exceeds upper bound {v[1]}")
        if self.n_vehicles[0] < 0 or self.n_vrus[0] < 0:
            raise ConfigError("agent counts must be non-negative")
        if self.vehicle_speed[0] < 0 or self.vehicle_speed[1] > VEHICLE_MAX_SPEED:
            raise ConfigError(f"vehicle_speed must lie in [0, {VEHICLE_MAX_SPEED}]")
        if self.vru_speed[0] < 0 or self.vru_speed[1] > VRU_MAX_SPEED:
            raise ConfigError(f"vru_speed must lie in [0, {VRU_MAX_SPEED}]")
        if self.vru_length[1] > 1.0 or self.vru_width[1] > 1.0 or self.vru_length[0] <= 0 or self.vru_width[0] <= 0:
            raise ConfigError("VRU footprints must lie within 1 x 1 m")
        if self.vehicle_width[0] < 1.5 or self.vehicle_width[1] > 3.0:
            raise ConfigError("vehicle_width must lie in [1.5, 3]")
        if self.vehicle_length[0] < 3.0 or self.vehicle_length[1] > 6.0:
            raise ConfigError("vehicle_length must lie in [3, 6]")
        if self.ego_mode not in ("static", "constant_velocity"):
            raise ConfigError(f"unknown ego_mode {self.ego_mode!r}")
        if self.max_yaw_rate < 0:
            raise ConfigError("max_yaw_rate must be non-negative")


@dataclass(frozen=True)
class Agent:
    """Constant speed and yaw rate motion anchored at its t0 pose (world frame)."""

    cls: SemClass
    pose_t0: Pose2
    speed: float
    yaw_rate: float
    length: float
    width: float
    height: float

    def pose_at(self, t: float) -> Pose2:
        return _ctrv_pose(self.pose_t0, self.speed, self.yaw_rate, t)

    def velocity_at(self, t: float) -> np.ndarray:
        yaw = self.pose_t0.yaw + self.yaw_rate * t
        return self.speed * np.array([math.cos(yaw), math.sin(yaw)])

    def point_velocity(self, t: float, xy: np.ndarray) -> np.ndarray:
        """World velocity of rigidly attached points ``xy`` (N, 2) at time t."""
        pose = self.pose_at(t)
        r = np.asarray(xy, dtype=np.float64).reshape(-1, 2) - np.array([pose.x, pose.y])
        v = self.velocity_at(t)
        # omega x r for rotation about z
        return v + self.yaw_rate * np.stack([-r[:, 1], r[:, 0]], axis=1)

    def box_at(self, t: float) -> OrientedBox:
        p = self.pose_at(t)
        return OrientedBox((p.x, p.y), self.length, self.width, p.yaw, self.cls)


@dataclass(frozen=True)
class EgoTrajectory:
    pose_t0: Pose2
    speed: float
    yaw_rate: float

    def pose_at(self, t: float) -> Pose2:
        return _ctrv_pose(self.pose_t0, self.speed, self.yaw_rate, t)

    def velocity_at(self, t: float) -> np.ndarray:
        yaw = self.pose_t0.yaw + self.yaw_rate * t
        return self.speed * np.array([math.cos(yaw), math.sin(yaw)])

    def velocity_in_ego_frame(self, t: float) -> np.ndarray:
        # heading is always along the velocity, so only the forward component is nonzero
        return np.array([self.speed, 0.0])


def _ctrv_pose(p0: Pose2, speed: float, yaw_rate: float, t: float) -> Pose2:
    if abs(yaw_rate) < 1e-12:
        return Pose2(p0.x + speed * t * math.cos(p0.yaw), p0.y + speed * t * math.sin(p0.yaw), p0.yaw)
    yaw = p0.yaw + yaw_rate * t
    r = speed / yaw_rate
    return Pose2(p0.x + r * (math.sin(yaw) - math.sin(p0.yaw)),
                 p0.y - r * (math.cos(yaw) - math.cos(p0.yaw)), yaw)


@dataclass(frozen=True)
class Scene:
    ego: EgoTrajectory
    agents: tuple[Agent, ...]
    rng_seed: int
    times: tuple[float, ...] = field(default=TIMES)

    @property
    def ego_trajectory(self) -> list[Pose2]:
        return [self.ego.pose_at(t) for t in self.times]

    def ego_pose(self, k: int) -> Pose2:
        return self.ego.pose_at(self.times[k])

    def boxes_at(self, k: int) -> list[OrientedBox]:
        """Agent boxes at timestep index k, world frame."""
        return [a.box_at(self.times[k]) for a in self.agents]

    def boxes_in_ego_t0(self, k: int) -> list[OrientedBox]:
        """Agent boxes at timestep index k, expressed in the ego-at-t0 frame."""
        to_ego = inverse(self.ego_pose(T0_INDEX))
        out = []
        for a in self.agents:
            p = compose(to_ego, a.pose_at(self.times[k]))
            out.append(OrientedBox((p.x, p.y), a.length, a.width, p.yaw, a.cls))
        return out


def _uniform(rng: np.random.Generator, lohi: tuple[float, float]) -> float:
    lo, hi = lohi
    return float(lo) if lo == hi else float(rng.uniform(lo, hi))


def generate_scene(config: SceneConfig, seed: int) -> Scene:
    """Deterministic scene for ``(config, seed)``."""
    config.validate()
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, 0x5CE7E])

    ego_p0 = Pose2(rng.uniform(-config.world_extent, config.world_extent),
                   rng.uniform(-config.world_extent, config.world_extent),
                   rng.uniform(-math.pi, math.pi))
    if config.ego_mode == "static":
        ego = EgoTrajectory(ego_p0, 0.0, 0.0)
    else:
        ego = EgoTrajectory(ego_p0, _uniform(rng, config.ego_speed), _uniform(rng, config.ego_yaw_rate))

    n_veh = int(rng.integers(config.n_vehicles[0], config.n_vehicles[1] + 1))
    n_vru = int(rng.integers(config.n_vrus[0], config.n_vrus[1] + 1))
    agents = []
    hx, hy = config.spawn_half_extent
    for cls in [SemClass.VEHICLE] * n_veh + [SemClass.VRU] * n_vru:
        while True:
            x, y = rng.uniform(-hx, hx), rng.uniform(-hy, hy)
            if max(abs(x), abs(y)) >= config.ego_clearance or (hx < config.ego_clearance and hy < config.ego_clearance):
                break
        yaw = rng.uniform(-math.pi, math.pi)
        if cls == SemClass.VEHICLE:
            length, width = _uniform(rng, config.vehicle_length), _uniform(rng, config.vehicle_width)
            height, speed = _uniform(rng, config.vehicle_height), _uniform(rng, config.vehicle_speed)
        else:
            length, width = _uniform(rng, config.vru_length), _uniform(rng, config.vru_width)
            height, speed = _uniform(rng, config.vru_height), _uniform(rng, config.vru_speed)
        yaw_rate = float(rng.uniform(-config.max_yaw_rate, config.max_yaw_rate)) if config.max_yaw_rate > 0 else 0.0
        pose_t0 = compose(ego_p0, Pose2(x, y, yaw))
        agents.append(Agent(cls, pose_t0, speed, yaw_rate, length, width, height))
    return Scene(ego, tuple(agents), int(seed))
