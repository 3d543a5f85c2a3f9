import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fishingnet.grid import (CLASS_COLORS, FULL_GRID_10CM, FULL_GRID_20CM, GridSequence, GridSpec,
                             OrientedBox, SemanticGrid, SemClass, argmax_labels, cell_of, cells_of,
                             coverage_m2, grid_to_rgb, one_hot, rasterize, rasterize_labels, render_png)
from oracles import brute_force_labels, random_boxes


def test_cell_of_examples():
    spec = GridSpec(48, 80, 0.25)
    assert cell_of(spec, (0.0, 0.0)) == (24, 40)
    assert cell_of(spec, (spec.rows_x * spec.resolution, 0.0)) is None
    corner = GridSpec(10, 10, 0.1, origin_offset=(0.0, 0.0))
    assert cell_of(corner, (0.25, 0.05)) == (2, 0)
    assert cell_of(corner, (-0.01, 0.0)) is None


def test_cells_of_matches_scalar(rng):
    spec = GridSpec(20, 30, 0.3)
    pts = rng.uniform(-6, 6, size=(200, 2))
    r, c, inside = cells_of(spec, pts)
    for i, p in enumerate(pts):
        expected = cell_of(spec, p)
        assert (expected is not None) == inside[i]
        if expected:
            assert (r[i], c[i]) == expected


def test_coverage_matches_quoted_areas():
    assert coverage_m2(FULL_GRID_10CM) == 614.4
    assert coverage_m2(FULL_GRID_20CM) == 2457.6
    assert coverage_m2(GridSpec(1, 1, 1.0)) == 1.0


def test_gridspec_round_trip():
    spec = GridSpec(16, 24, 0.5, origin_offset=(1.0, 2.0))
    assert GridSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ValueError):
        GridSpec(0, 4, 0.1)
    with pytest.raises(ValueError):
        GridSpec(4, 4, 0.0)


def test_rasterize_empty_is_background():
    spec = GridSpec(16, 16, 0.5)
    assert (rasterize_labels([], spec) == SemClass.BACKGROUND).all()


def test_vehicle_2x4_at_10cm_gives_800_cells():
    box = OrientedBox((0.0, 0.0), 4.0, 2.0, 0.0, SemClass.VEHICLE)
    labels = rasterize_labels([box], FULL_GRID_10CM)
    assert int((labels == SemClass.VEHICLE).sum()) == 800
    assert int((brute_force_labels([box], GridSpec(60, 40, 0.1)) == SemClass.VEHICLE).sum()) == 800


def test_vru_inside_vehicle_wins():
    spec = GridSpec(20, 20, 0.25)
    veh = OrientedBox((0.0, 0.0), 4.0, 2.0, 0.3, SemClass.VEHICLE)
    vru = OrientedBox((0.2, 0.1), 0.8, 0.6, 0.0, SemClass.VRU)
    for order in ([veh, vru], [vru, veh]):
        labels = rasterize_labels(order, spec)
        assert (labels[rasterize_labels([vru], spec) == SemClass.VRU] == SemClass.VRU).all()


def test_rasterize_matches_brute_force_random_scenes():
    rng = np.random.default_rng(7)
    for _ in range(40):
        spec = GridSpec(int(rng.integers(8, 40)), int(rng.integers(8, 40)), float(rng.choice([0.2, 0.25, 0.5])))
        boxes = random_boxes(rng, int(rng.integers(0, 20)), 6.0)
        np.testing.assert_array_equal(rasterize_labels(boxes, spec), brute_force_labels(boxes, spec))


def test_rasterize_rotation_consistent():
    # rotating boxes and the grid's query points together keeps occupancy
    rng = np.random.default_rng(3)
    spec = GridSpec(40, 40, 0.25)
    xs, ys = spec.cell_centers()
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    centers = np.stack([gx.ravel(), gy.ravel()], axis=1)
    boxes = random_boxes(rng, 6, 3.0)
    theta = 0.7
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    turned = [OrientedBox(tuple(rot @ np.array(b.center)), b.length, b.width, b.yaw + theta, b.cls) for b in boxes]
    occ = rasterize_labels(boxes, spec).ravel() != SemClass.BACKGROUND
    occ_turned = np.zeros(len(centers), dtype=bool)
    for b in turned:
        occ_turned |= b.contains(centers @ rot.T)
    np.testing.assert_array_equal(occ, occ_turned)


def test_one_hot_and_argmax():
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 3, size=(12, 9))
    np.testing.assert_array_equal(argmax_labels(one_hot(labels)), labels)
    assert argmax_labels(np.full(3, 1 / 3)) == SemClass.VRU
    assert argmax_labels(np.array([0.2, 0.5, 0.3])) == SemClass.VEHICLE
    assert argmax_labels(np.array([0.1, 0.45, 0.45])) == SemClass.VEHICLE


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**31))
def test_argmax_inverts_one_hot(rows, cols, seed):
    labels = np.random.default_rng(seed).integers(0, 3, size=(rows, cols))
    np.testing.assert_array_equal(argmax_labels(one_hot(labels)), labels)


def test_semantic_grid_validation():
    spec = GridSpec(4, 4, 1.0)
    SemanticGrid(spec, one_hot(np.zeros((4, 4), dtype=int))).validate()
    with pytest.raises(ValueError):
        SemanticGrid(spec, np.full((4, 4, 3), 0.5)).validate()
    with pytest.raises(ValueError):
        SemanticGrid(spec, np.zeros((3, 4, 3))).validate()


def test_rasterize_is_one_hot_grid():
    spec = GridSpec(16, 16, 0.5)
    g = rasterize([OrientedBox((0.0, 0.0), 4.0, 2.0, 0.0, SemClass.VEHICLE)], spec, 0.5)
    g.validate()
    assert g.timestep == 0.5


def test_grid_sequence_labels_round_trip(rng):
    spec = GridSpec(6, 7, 0.5)
    labels = rng.integers(0, 3, size=(5, 6, 7))
    seq = GridSequence.from_labels(spec, labels)
    assert seq.probs.shape == (6, 7, 3, 5)
    np.testing.assert_array_equal(seq.labels(), labels)
    assert len(seq) == 5 and seq.grid(2).timestep == 1.0
    with pytest.raises(ValueError):
        GridSequence(spec, np.zeros((6, 7, 3, 4)))


def test_grid_to_rgb_colours_and_orientation():
    labels = np.full((4, 6), int(SemClass.BACKGROUND))
    rgb = grid_to_rgb(labels)
    assert (rgb == [0, 0, 255]).all()
    labels[3, 5] = SemClass.VRU      # farthest forward, leftmost
    labels[0, 0] = SemClass.VEHICLE  # farthest back, rightmost
    rgb = grid_to_rgb(labels)
    assert tuple(rgb[0, 0]) == (255, 0, 0)
    assert tuple(rgb[3, 5]) == (0, 255, 0)
    np.testing.assert_array_equal(CLASS_COLORS[SemClass.VEHICLE], [0, 255, 0])


def test_vehicle_renders_green_rectangle(tmp_path):
    import matplotlib.image as mpimg

    spec = GridSpec(20, 20, 0.5)
    g = rasterize([OrientedBox((0.0, 0.0), 4.0, 2.0, 0.0, SemClass.VEHICLE)], spec)
    path = render_png(g, tmp_path / "g.png")
    img = (mpimg.imread(path)[..., :3] * 255).round().astype(int)
    green = (img == [0, 255, 0]).all(axis=-1)
    rows, cols = np.nonzero(green)
    assert green.sum() == 8 * 4
    assert green[rows.min():rows.max() + 1, cols.min():cols.max() + 1].all()
    assert ((img == [0, 0, 255]).all(axis=-1) | green).all()
