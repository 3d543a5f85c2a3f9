"""Training samples built from scenes, and their on-disk dataset format.

A dataset directory holds one container file per sample
(``sample_000000.fsn`` ...) plus ``index.json``. Each sample container
(magic ``FSNS``) stores:

=================  ==========================  ========
name               shape                        dtype
=================  ==========================  ========
lidar_{k}          (N_k, 3) world-frame xyz     float64
radar_{k}          (M_k, 7) see RadarReturns    float64
images             (cams, 5, H, W, 3)           uint8
labels             (5, rows, cols) class ids    uint8
ego_poses          (5, 3) x, y, yaw             float64
ego_velocities     (5, 2) in each ego frame     float64
=================  ==========================  ========

for k = 0..4 (t = -2.0 .. 0.0 s). The JSON header carries the grid spec,
scene seed, yaw bin, per-frame counts and any caller-supplied metadata.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from fishingnet import container
from fishingnet.geometry import Pose2, normalize_angle
from fishingnet.grid import GridSequence, GridSpec, rasterize_labels
from fishingnet.sim.camera import CameraRig, simulate_cameras
from fishingnet.sim.scene import FUTURE_INDICES, PAST_INDICES, T0_INDEX, Scene, SceneConfig, generate_scene
from fishingnet.sim.sensors import LidarConfig, RadarConfig, RadarReturns, simulate_lidar, simulate_radar

SAMPLE_MAGIC = b"FSNS"
N_YAW_BINS = 8
NO_AGENT_BIN = -1


@dataclass
class SensorFrameSet:
    lidar: list[np.ndarray]          # world-frame (N, 3) per past timestep
    radar: list[RadarReturns]        # sensing-frame returns per past timestep
    images: np.ndarray | None        # (cams, 5, H, W, 3) uint8


@dataclass
class Sample:
    inputs: SensorFrameSet
    labels: np.ndarray               # (5, rows, cols) class ids at t = 0 .. 2 s
    ego_poses: list[Pose2]           # t = -2 .. 0 s
    ego_velocities: np.ndarray       # (5, 2), each in its own ego frame
    spec: GridSpec
    yaw_bin: int = NO_AGENT_BIN
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def label_sequence(self) -> GridSequence:
        return GridSequence.from_labels(self.spec, self.labels.astype(np.int64))

    def to_arrays(self) -> dict[str, np.ndarray]:
        arrays = {}
        for k, pts in enumerate(self.inputs.lidar):
            arrays[f"lidar_{k}"] = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
        for k, ret in enumerate(self.inputs.radar):
            arrays[f"radar_{k}"] = ret.to_array()
        if self.inputs.images is not None:
            arrays["images"] = np.asarray(self.inputs.images, dtype=np.uint8)
        arrays["labels"] = np.asarray(self.labels, dtype=np.uint8)
        arrays["ego_poses"] = np.array([p.as_tuple() for p in self.ego_poses], dtype=np.float64)
        arrays["ego_velocities"] = np.asarray(self.ego_velocities, dtype=np.float64)
        return arrays

    def header(self) -> dict:
        return {"grid": self.spec.to_dict(), "seed": self.seed, "yaw_bin": self.yaw_bin,
                "n_lidar": [int(len(p)) for p in self.inputs.lidar],
                "n_radar": [int(len(r)) for r in self.inputs.radar],
                "meta": self.meta}

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray], header: dict) -> "Sample":
        n = len(header["n_lidar"])
        inputs = SensorFrameSet(
            lidar=[arrays[f"lidar_{k}"] for k in range(n)],
            radar=[RadarReturns.from_array(arrays[f"radar_{k}"]) for k in range(n)],
            images=arrays.get("images"))
        poses = [Pose2(*row) for row in arrays["ego_poses"]]
        return cls(inputs, arrays["labels"], poses, arrays["ego_velocities"],
                   GridSpec.from_dict(header["grid"]), int(header["yaw_bin"]), int(header["seed"]),
                   header.get("meta", {}))


def dominant_yaw_bin(scene: Scene, bins: int = N_YAW_BINS) -> int:
    """Heading bin of the agent nearest the ego at t0, in the ego-at-t0 frame."""
    boxes = scene.boxes_in_ego_t0(T0_INDEX)
    if not boxes:
        return NO_AGENT_BIN
    nearest = min(boxes, key=lambda b: math.hypot(*b.center))
    yaw = normalize_angle(nearest.yaw) % (2 * math.pi)
    return int(yaw // (2 * math.pi / bins)) % bins


def build_sample(scene: Scene, spec: GridSpec, lidar: LidarConfig | None = None,
                 radar: RadarConfig | None = None, rig: CameraRig | None = None,
                 cameras: bool = True) -> Sample:
    """Simulate inputs at t = -2..0 s and rasterize labels at t = 0..2 s.

    Labels always use the ego frame at t0, also for future horizons.
    """
    lidar_frames = [simulate_lidar(scene, k, lidar) for k in PAST_INDICES]
    radar_frames = [simulate_radar(scene, k, radar) for k in PAST_INDICES]
    images = None
    if cameras:
        images = np.stack([simulate_cameras(scene, k, rig) for k in PAST_INDICES], axis=1)
    labels = np.stack([rasterize_labels(scene.boxes_in_ego_t0(k), spec) for k in FUTURE_INDICES]).astype(np.uint8)
    poses = [scene.ego_pose(k) for k in PAST_INDICES]
    vel = np.stack([scene.ego.velocity_in_ego_frame(scene.times[k]) for k in PAST_INDICES])
    return Sample(SensorFrameSet(lidar_frames, radar_frames, images), labels, poses, vel, spec,
                  dominant_yaw_bin(scene), scene.rng_seed)


def sample_seed(base_seed: int, index: int) -> int:
    """Per-sample scene seed derived from one 64-bit base seed."""
    ss = np.random.SeedSequence([int(base_seed) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def generate_samples(n: int, spec: GridSpec, scene_config: SceneConfig, seed: int,
                     lidar: LidarConfig | None = None, radar: RadarConfig | None = None,
                     rig: CameraRig | None = None, cameras: bool = True) -> list[Sample]:
    return [build_sample(generate_scene(scene_config, sample_seed(seed, i)), spec, lidar, radar, rig, cameras)
            for i in range(n)]


def sample_filename(i: int) -> str:
    return f"sample_{i:06d}.fsn"


def write_dataset(samples: Sequence[Sample], directory: str | Path, meta: dict | None = None) -> Path:
    """Write samples and ``index.json`` into ``directory`` (created if needed)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, s in enumerate(samples):
        name = sample_filename(i)
        header = s.header()
        if meta:
            header["dataset_meta"] = meta
        container.write(directory / name, SAMPLE_MAGIC, s.to_arrays(), header)
        entries.append({"file": name, "seed": s.seed, "yaw_bin": s.yaw_bin,
                        "n_lidar": header["n_lidar"], "n_radar": header["n_radar"]})
    index = {"format": "fishingnet-dataset", "version": container.FORMAT_VERSION,
             "count": len(entries), "grid": samples[0].spec.to_dict() if samples else None,
             "meta": meta or {}, "samples": entries}
    (directory / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    return directory


def read_dataset(directory: str | Path) -> list[Sample]:
    """Read a dataset directory; an empty or missing index yields ``[]``."""
    directory = Path(directory)
    index_path = directory / "index.json"
    if index_path.exists():
        files = [e["file"] for e in json.loads(index_path.read_text())["samples"]]
    else:
        files = sorted(p.name for p in directory.glob("sample_*.fsn")) if directory.exists() else []
    out = []
    for name in files:
        arrays, header = container.read(directory / name, SAMPLE_MAGIC)
        out.append(Sample.from_arrays(arrays, header))
    return out


def iter_dataset(directory: str | Path) -> Iterable[Sample]:
    yield from read_dataset(directory)
