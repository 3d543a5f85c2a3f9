"""Synthetic driving scenes, sensor simulation and the sample dataset format."""
from fishingnet.sim.batching import yaw_balanced_batches
from fishingnet.sim.camera import CameraRig, simulate_cameras
from fishingnet.sim.sample import (Sample, SensorFrameSet, build_sample, dominant_yaw_bin,
                                   generate_samples, read_dataset, sample_seed, write_dataset)
from fishingnet.sim.scene import (DT, FUTURE_INDICES, PAST_INDICES, T0_INDEX, TIMES, Agent,
                                  EgoTrajectory, Scene, SceneConfig, generate_scene)
from fishingnet.sim.sensors import (LidarConfig, RadarConfig, RadarReturns, simulate_lidar,
                                    simulate_radar, wrap_doppler)

__all__ = [
    "Agent", "CameraRig", "DT", "EgoTrajectory", "FUTURE_INDICES", "LidarConfig", "PAST_INDICES",
    "RadarConfig", "RadarReturns", "Sample", "Scene", "SceneConfig", "SensorFrameSet", "T0_INDEX",
    "TIMES", "build_sample", "dominant_yaw_bin", "generate_samples", "generate_scene",
    "read_dataset", "sample_seed", "simulate_cameras", "simulate_lidar", "simulate_radar",
    "wrap_doppler", "write_dataset", "yaw_balanced_batches",
]
