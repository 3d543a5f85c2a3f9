"""Lidar and radar simulation on scene boxes.

Lidar points are returned in the world frame. Radar returns are expressed in
the sensing frame (the ego frame at the scan time) and carry range rate with
positive meaning the target recedes from the sensor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from fishingnet.geometry import world_to_local
from fishingnet.grid import SemClass
from fishingnet.config import ConfigError, ConfigMixin
from fishingnet.sim.scene import Agent, Scene

_LIDAR_STREAM = 0x11DA
_RADAR_STREAM = 0x7ADA


@dataclass
class LidarConfig(ConfigMixin):
    points_per_m2: float = 20.0
    max_range: float = 60.0
    ground: bool = False
    ground_points_per_m2: float = 1.0
    jitter_std: float = 0.0
    dropout: float = 0.0

    def validate(self) -> None:
        if self.points_per_m2 <= 0 or self.max_range <= 0:
            raise ConfigError("lidar density and range must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("lidar dropout must be in [0, 1)")


@dataclass
class RadarConfig(ConfigMixin):
    returns_per_vehicle: int = 4
    returns_per_vru: int = 1
    max_range: float = 80.0
    vehicle_rcs: tuple[float, float] = (5.0, 15.0)
    vru_rcs: tuple[float, float] = (-10.0, 0.0)
    snr_scale: float = 1000.0
    doppler_interval: float = 30.0
    ambiguity: bool = False
    velocity_noise_std: float = 0.0

    def validate(self) -> None:
        if self.doppler_interval <= 0:
            raise ConfigError("doppler_interval must be positive")
        if self.returns_per_vehicle < 0 or self.returns_per_vru < 0:
            raise ConfigError("radar return counts must be non-negative")


def _rng(scene: Scene, k: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([scene.rng_seed & 0xFFFFFFFFFFFFFFFF, k, stream])


def _sample_box_surface(agent: Agent, t: float, density: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform points on the four side faces and the top face of an agent box."""
    L, W, H = agent.length, agent.width, agent.height
    pts = []
    # (fixed local coordinate, which axis is fixed, face extent along free horizontal axis)
    for axis, fixed, span in ((0, L / 2, W), (0, -L / 2, W), (1, W / 2, L), (1, -W / 2, L)):
        n = max(1, int(round(density * span * H)))
        free = rng.uniform(-span / 2, span / 2, n)
        z = rng.uniform(0.0, H, n)
        local = np.empty((n, 2))
        local[:, axis] = fixed
        local[:, 1 - axis] = free
        pts.append(np.column_stack([local, z]))
    n = max(1, int(round(density * L * W)))
    top = np.column_stack([rng.uniform(-L / 2, L / 2, n), rng.uniform(-W / 2, W / 2, n), np.full(n, H)])
    pts.append(top)
    local = np.concatenate(pts)
    pose = agent.pose_at(t)
    out = local.copy()
    out[:, :2] = local[:, :2] @ pose.rotation().T + np.array([pose.x, pose.y])
    return out


def simulate_lidar(scene: Scene, k: int, config: LidarConfig | None = None) -> np.ndarray:
    """World-frame (N, 3) lidar points at timestep index ``k``."""
    config = config or LidarConfig()
    rng = _rng(scene, k, _LIDAR_STREAM)
    t = scene.times[k]
    ego = scene.ego_pose(k)
    chunks = []
    for agent in scene.agents:
        p = agent.pose_at(t)
        if math.hypot(p.x - ego.x, p.y - ego.y) > config.max_range:
            continue
        chunks.append(_sample_box_surface(agent, t, config.points_per_m2, rng))
    if config.ground:
        r = config.max_range
        n = int(round(config.ground_points_per_m2 * math.pi * r * r))
        rho = r * np.sqrt(rng.uniform(0, 1, n))
        phi = rng.uniform(-math.pi, math.pi, n)
        g = np.column_stack([ego.x + rho * np.cos(phi), ego.y + rho * np.sin(phi), np.zeros(n)])
        chunks.append(g)
    if not chunks:
        return np.zeros((0, 3))
    pts = np.concatenate(chunks)
    if config.dropout > 0:
        pts = pts[rng.uniform(0, 1, len(pts)) >= config.dropout]
    if config.jitter_std > 0:
        pts = pts + rng.normal(0, config.jitter_std, pts.shape)
    return pts


@dataclass
class RadarReturns:
    """A set of radar returns as parallel arrays.

    ``position`` is (N, 2) in the sensing frame, ``azimuth`` the bearing of
    each return in that frame.
    """

    position: np.ndarray
    radial_velocity: np.ndarray
    azimuth: np.ndarray
    rcs: np.ndarray
    snr: np.ndarray
    doppler_interval: np.ndarray

    COLUMNS = ("x", "y", "radial_velocity", "azimuth", "rcs", "snr", "doppler_interval")

    def __len__(self) -> int:
        return len(self.radial_velocity)

    def to_array(self) -> np.ndarray:
        return np.column_stack([self.position.reshape(-1, 2), self.radial_velocity, self.azimuth,
                                self.rcs, self.snr, self.doppler_interval]).astype(np.float64)

    @classmethod
    def from_array(cls, a: np.ndarray) -> "RadarReturns":
        a = np.asarray(a, dtype=np.float64).reshape(-1, 7)
        return cls(a[:, 0:2].copy(), a[:, 2].copy(), a[:, 3].copy(), a[:, 4].copy(),
                   a[:, 5].copy(), a[:, 6].copy())

    @classmethod
    def empty(cls) -> "RadarReturns":
        return cls.from_array(np.zeros((0, 7)))


def _perimeter_points(agent: Agent, t: float, n: int, rng: np.random.Generator) -> np.ndarray:
    L, W = agent.length, agent.width
    s = rng.uniform(0, 2 * (L + W), n)
    local = np.empty((n, 2))
    for i, u in enumerate(s):
        if u < L:
            local[i] = (u - L / 2, W / 2)
        elif u < L + W:
            local[i] = (L / 2, W / 2 - (u - L))
        elif u < 2 * L + W:
            local[i] = (L / 2 - (u - L - W), -W / 2)
        else:
            local[i] = (-L / 2, -W / 2 + (u - 2 * L - W))
    pose = agent.pose_at(t)
    return local @ pose.rotation().T + np.array([pose.x, pose.y])


def wrap_doppler(v: np.ndarray, interval: float) -> np.ndarray:
    """Fold radial velocities into [-interval/2, interval/2)."""
    return (np.asarray(v) + interval / 2) % interval - interval / 2


def simulate_radar(scene: Scene, k: int, config: RadarConfig | None = None) -> RadarReturns:
    """Sparse radar returns on agent outlines at timestep index ``k``."""
    config = config or RadarConfig()
    rng = _rng(scene, k, _RADAR_STREAM)
    t = scene.times[k]
    ego = scene.ego_pose(k)
    ego_v = scene.ego.velocity_at(t)
    rows = []
    for agent in scene.agents:
        p = agent.pose_at(t)
        if math.hypot(p.x - ego.x, p.y - ego.y) > config.max_range:
            continue
        is_vehicle = agent.cls == SemClass.VEHICLE
        n = config.returns_per_vehicle if is_vehicle else config.returns_per_vru
        if n == 0:
            continue
        world_xy = _perimeter_points(agent, t, n, rng)
        rel = world_xy - np.array([ego.x, ego.y])
        rng_m = np.linalg.norm(rel, axis=1)
        u = rel / np.maximum(rng_m, 1e-12)[:, None]
        radial = np.einsum("ij,ij->i", agent.point_velocity(t, world_xy) - ego_v, u)
        local = world_to_local(ego, world_xy)
        azimuth = np.arctan2(local[:, 1], local[:, 0])
        lo, hi = config.vehicle_rcs if is_vehicle else config.vru_rcs
        rcs = rng.uniform(lo, hi, n)
        snr = config.snr_scale * 10.0 ** (rcs / 10.0) / np.maximum(rng_m, 1.0) ** 2
        rows.append(np.column_stack([local, radial, azimuth, rcs, snr, np.full(n, config.doppler_interval)]))
    if not rows:
        return RadarReturns.empty()
    ret = RadarReturns.from_array(np.concatenate(rows))
    if config.velocity_noise_std > 0:
        ret.radial_velocity = ret.radial_velocity + rng.normal(0, config.velocity_noise_std, len(ret))
    if config.ambiguity:
        ret.radial_velocity = wrap_doppler(ret.radial_velocity, config.doppler_interval)
    return ret
