import math

import numpy as np
import pytest

from fishingnet.geometry import FrameId, Pose2
from fishingnet.featurize import (LIDAR_CHANNELS, RADAR_CHANNELS, RadarNorm, assemble_vision_input,
                                  featurize_lidar, featurize_radar, featurize_sample, lidar_frame_features,
                                  radar_frame_features)
from fishingnet.grid import GridSpec, cell_of
from fishingnet.sim.camera import CameraRig
from fishingnet.sim.sample import build_sample
from fishingnet.sim.scene import Agent, EgoTrajectory, Scene, SceneConfig, generate_scene
from fishingnet.sim.sensors import RadarReturns, simulate_radar
from fishingnet.grid import SemClass

SPEC = GridSpec(16, 16, 0.5)
POSES = [Pose2()] * 5


def returns(rows):
    """rows of (x, y, radial, azimuth, rcs, snr, interval)"""
    return RadarReturns.from_array(np.array(rows, dtype=np.float64))


def test_channel_counts():
    assert LIDAR_CHANNELS * 5 == 40 and RADAR_CHANNELS * 5 == 30
    assert featurize_lidar([np.zeros((0, 3))] * 5, POSES, SPEC).shape == (16, 16, 40)
    assert featurize_radar([RadarReturns.empty()] * 5, POSES, np.zeros((5, 2)), SPEC).shape == (16, 16, 30)


def test_no_points_all_zero():
    assert not featurize_lidar([np.zeros((0, 3))] * 5, POSES, SPEC).any()
    assert not featurize_radar([RadarReturns.empty()] * 5, POSES, np.zeros((5, 2)), SPEC).any()


def test_single_point_features():
    f = lidar_frame_features(np.array([[1.1, -0.3, 0.7]]), SPEC)
    r, c = cell_of(SPEC, (1.1, -0.3))
    cell = f[r, c]
    assert cell[0] == 1.0
    assert cell[1] == pytest.approx(math.log(2) / math.log(65))
    assert cell[2] == pytest.approx(0.7)
    np.testing.assert_allclose(cell[3:], [0, 0.7, 0, 0, 0])
    f[r, c] = 0
    assert not f.any()


def test_point_only_at_one_timestep():
    pts = [np.zeros((0, 3))] * 5
    pts[3] = np.array([[0.3, 0.3, 1.2]])
    f = featurize_lidar(pts, POSES, SPEC)
    nz = np.nonzero(f.reshape(-1, 40).any(axis=0))[0]
    assert set(nz) <= set(range(24, 32)) and len(nz) > 0


def test_density_monotone_and_capped():
    vals = []
    for n in (1, 2, 5, 20, 64, 65, 200):
        f = lidar_frame_features(np.tile([[0.1, 0.1, 0.2]], (n, 1)), SPEC)
        vals.append(f[..., 1].max())
    assert vals == sorted(vals)
    assert vals[4] == 1.0 and vals[-1] == 1.0


def test_points_above_slices_only_touch_max_z():
    f = lidar_frame_features(np.array([[0.1, 0.1, 3.0]]), SPEC)
    cell = f[cell_of(SPEC, (0.1, 0.1))]
    assert cell[2] == 3.0 and not cell[3:].any()


def test_lidar_permutation_invariant_and_occupancy_oracle(rng):
    pts = np.column_stack([rng.uniform(-5, 5, (300, 2)), rng.uniform(-0.5, 3, 300)])
    f = lidar_frame_features(pts, SPEC)
    np.testing.assert_array_equal(f, lidar_frame_features(pts[rng.permutation(300)], SPEC))
    occ = np.zeros(SPEC.shape)
    for p in pts:
        rc = cell_of(SPEC, p[:2])
        if rc:
            occ[rc] = 1
    np.testing.assert_array_equal(f[..., 0], occ)


def test_lidar_motion_compensated_into_t0_frame():
    # the same world point seen from two ego poses lands in one t0 cell
    poses = [Pose2(-2.0, 0.0, 0.0)] * 4 + [Pose2(0.0, 0.0, 0.3)]
    world = np.array([[3.0, 1.0, 0.4]])
    f = featurize_lidar([world] * 5, poses, SPEC)
    occ = f[..., 0::8]
    assert occ.sum() == 5 and (occ.sum(axis=-1) == 5).sum() == 1
    # the same points given per-timestep in each ego frame
    local = [np.array([[5.0, 1.0, 0.4]])] * 4 + [np.array([[3.0 * math.cos(0.3) + 1.0 * math.sin(0.3),
                                                          -3.0 * math.sin(0.3) + 1.0 * math.cos(0.3), 0.4]])]
    g = featurize_lidar(local, poses, SPEC, frame=FrameId.ego_at(4))
    np.testing.assert_allclose(g, f, atol=1e-6)


def test_radar_max_snr_selection():
    norm = RadarNorm()
    rows = [[1.1, 1.1, 2.0, 0.7, 10.0, 3.0, 30.0], [1.2, 1.2, -1.0, 0.8, 0.0, 7.0, 30.0]]
    for order in (rows, rows[::-1]):
        f = radar_frame_features(returns(order), Pose2(), (0.0, 0.0), Pose2(), SPEC, norm)
        cell = f[cell_of(SPEC, (1.1, 1.1))]
        assert cell[0] == 1
        np.testing.assert_allclose(cell[1:3], [-math.cos(0.8), -math.sin(0.8)])
        assert cell[3] == pytest.approx(norm.normalize_rcs(np.array(0.0)))
        assert cell[4] == pytest.approx(norm.normalize_snr(np.array(7.0)))
        assert cell[5] == pytest.approx(30.0 / 50.0)


def test_radar_velocity_zero_where_unoccupied(rng):
    scene = generate_scene(SceneConfig(n_vehicles=(4, 4)), 3)
    s = build_sample(scene, SPEC, cameras=False)
    f = featurize_sample(s, "radar").reshape(16, 16, 5, 6)
    empty = f[..., 0] == 0
    assert not f[..., 1:3][empty].any()
    assert set(np.unique(f[..., 0])) <= {0.0, 1.0}


@pytest.mark.parametrize("seed", range(6))
def test_static_world_zero_velocity_under_ego_motion(seed):
    rng = np.random.default_rng(seed)
    agents = tuple(Agent(SemClass.VEHICLE, Pose2(*rng.uniform(-6, 6, 2), rng.uniform(-3, 3)), 0.0, 0.0, 4, 2, 1.5)
                   for _ in range(3))
    ego = EgoTrajectory(Pose2(0, 0, rng.uniform(-3, 3)), rng.uniform(2, 12), rng.uniform(-0.4, 0.4))
    scene = Scene(ego, agents, seed)
    s = build_sample(scene, SPEC, cameras=False)
    f = featurize_sample(s, "radar").reshape(16, 16, 5, 6)
    assert f[..., 0].sum() > 0
    assert np.abs(f[..., 1:3]).max() < 1e-6


def test_moving_target_velocity_in_t0_frame():
    # target moves +x at 4 m/s in the world; the ego is yawed by 0.5 rad and
    # turning, so in the t0 frame the target moves along -0.5 rad
    a = Agent(SemClass.VRU, Pose2(2.0, 1.5, 0.0), 4.0, 0.0, 0.5, 0.5, 1.7)
    ego = EgoTrajectory(Pose2(0, 0, 0.5), 2.0, 0.2)
    scene = Scene(ego, (a,), 1)
    for k in (2, 4):
        ret = simulate_radar(scene, k)
        t0_pose = scene.ego_pose(4)
        f = radar_frame_features(ret, scene.ego_pose(k), ego.velocity_in_ego_frame(scene.times[k]), t0_pose, SPEC)
        v = f[f[..., 0] == 1][:, 1:3]
        assert len(v) == 1
        # bearing of the return expressed in the t0 frame
        az = ret.azimuth[0] + scene.ego_pose(k).yaw - t0_pose.yaw
        u = np.array([math.cos(az), math.sin(az)])
        expected = np.dot([4 * math.cos(-0.5), 4 * math.sin(-0.5)], u) * u
        np.testing.assert_allclose(v[0], expected, atol=1e-9)


def test_vision_input():
    imgs = np.zeros((4, 5, 8, 12, 3), dtype=np.uint8)
    out = assemble_vision_input(imgs, (8, 12))
    assert out.shape == (4, 5, 8, 12, 3) and not out.any()
    assert out.shape[0] * out.shape[1] == 20
    imgs[1, 2, 3, 4, 0] = 255
    assert assemble_vision_input(imgs)[1, 2, 3, 4, 0] == 1.0
    with pytest.raises(ValueError):
        assemble_vision_input(imgs, (16, 16))
    with pytest.raises(ValueError):
        assemble_vision_input(np.zeros((5, 8, 12, 3)))


def test_featurize_sample_shapes():
    rig = CameraRig(height_px=16, width_px=16)
    s = build_sample(generate_scene(SceneConfig(), 2), SPEC, rig=rig)
    assert featurize_sample(s, "lidar").shape == (16, 16, 40)
    assert featurize_sample(s, "radar").shape == (16, 16, 30)
    assert featurize_sample(s, "vision").shape == (4, 5, 16, 16, 3)
    with pytest.raises(ValueError):
        featurize_sample(s, "sonar")
