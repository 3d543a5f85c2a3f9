import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fishingnet.config import ConfigError
from fishingnet.fusion import PriorityMap, fuse_average, fuse_priority
from fishingnet.grid import GridSequence, GridSpec, argmax_labels
from oracles import fuse_average_brute, fuse_priority_brute, random_probs


def cell(*vals):
    return np.array(vals, dtype=np.float64).reshape(1, 1, 3, 1)


def test_vru_vote_overrides_vehicle():
    a, b = cell(0.1, 0.6, 0.3), cell(0.4, 0.35, 0.25)
    np.testing.assert_array_equal(fuse_priority([a, b]), b)
    np.testing.assert_array_equal(fuse_priority([b, a]), b)


def test_same_vote_takes_larger_magnitude():
    a, b = cell(0.1, 0.6, 0.3), cell(0.05, 0.9, 0.05)
    np.testing.assert_array_equal(fuse_priority([a, b]), b)
    np.testing.assert_array_equal(fuse_priority([b, a]), b)


def test_exact_magnitude_tie_goes_to_first_modality():
    a, b = cell(0.1, 0.6, 0.3), cell(0.3, 0.6, 0.1)
    np.testing.assert_array_equal(fuse_priority([a, b]), a)
    np.testing.assert_array_equal(fuse_priority([b, a]), b)


def test_background_loses_to_any_object_vote():
    bg, veh = cell(0.0, 0.0, 1.0), cell(0.1, 0.5, 0.4)
    np.testing.assert_array_equal(fuse_priority([bg, bg, veh]), veh)


def test_identical_inputs_are_identity(rng):
    a = random_probs(rng, 1)[0]
    np.testing.assert_array_equal(fuse_priority([a, a, a]), a)
    np.testing.assert_allclose(fuse_average([a, a]), a, atol=1e-15)


def test_average_example():
    out = fuse_average([cell(0.2, 0.2, 0.6), cell(0.6, 0.2, 0.2)])
    np.testing.assert_allclose(out.ravel(), [0.4, 0.2, 0.4])


@pytest.mark.parametrize("n_mod", [2, 3])
def test_matches_brute_force(rng, n_mod):
    for _ in range(20):
        arrays = random_probs(rng, n_mod)
        np.testing.assert_array_equal(fuse_priority(arrays), fuse_priority_brute(arrays))
        np.testing.assert_allclose(fuse_average(arrays), fuse_average_brute(arrays), rtol=0, atol=1e-15)


def test_brute_force_with_quantized_ties(rng):
    # coarse probabilities force many exact magnitude ties
    for _ in range(10):
        arrays = []
        for _ in range(3):
            raw = rng.integers(0, 3, size=(8, 8, 3, 5)).astype(np.float64) + 1
            arrays.append(raw / raw.sum(axis=2, keepdims=True))
        np.testing.assert_array_equal(fuse_priority(arrays), fuse_priority_brute(arrays))


def test_custom_priority_map(rng):
    pm = PriorityMap(vru=1, vehicle=3, background=2)
    arrays = random_probs(rng, 3, 6, 6)
    expect = fuse_priority_brute(arrays, {0: 1, 1: 3, 2: 2})
    np.testing.assert_array_equal(fuse_priority(arrays, pm), expect)


def test_one_hot_background_iff_all_background(rng):
    for _ in range(20):
        arrays = []
        for _ in range(3):
            labels = rng.integers(0, 3, size=(10, 10, 5))
            arrays.append(np.moveaxis(np.eye(3)[labels], -1, 2))
        fused = np.argmax(fuse_priority(arrays), axis=2)
        all_bg = np.all([np.argmax(a, axis=2) == 2 for a in arrays], axis=0)
        np.testing.assert_array_equal(fused == 2, all_bg)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n_mod=st.integers(1, 4))
def test_average_commutative_priority_vote_order_free(seed, n_mod):
    rng = np.random.default_rng(seed)
    arrays = random_probs(rng, n_mod, 4, 5, 5)
    perm = rng.permutation(n_mod)
    shuffled = [arrays[i] for i in perm]
    np.testing.assert_allclose(fuse_average(arrays), fuse_average(shuffled), atol=1e-15)
    # with continuous inputs there are no ties, so the priority pool ignores order
    np.testing.assert_array_equal(fuse_priority(arrays), fuse_priority(shuffled))
    # fused output is always still a distribution
    np.testing.assert_allclose(fuse_priority(arrays).sum(axis=2), 1, atol=1e-12)
    np.testing.assert_allclose(fuse_average(arrays).sum(axis=2), 1, atol=1e-12)


def test_grid_sequences_round_trip():
    spec = GridSpec(4, 6, 0.5)
    rng = np.random.default_rng(3)
    seqs = [GridSequence(spec, a) for a in random_probs(rng, 2, 4, 6)]
    out = fuse_priority(seqs)
    assert isinstance(out, GridSequence) and out.spec == spec
    avg = fuse_average(seqs)
    assert isinstance(avg, GridSequence)
    assert argmax_labels(avg.probs[..., 0]).shape == (4, 6)


def test_mismatched_inputs_rejected():
    with pytest.raises(ValueError):
        fuse_average([])
    with pytest.raises(ValueError):
        fuse_priority([np.ones((2, 2, 3, 5)), np.ones((2, 3, 3, 5))])
    a = GridSequence(GridSpec(4, 6, 0.5), np.full((4, 6, 3, 5), 1 / 3))
    b = GridSequence(GridSpec(4, 6, 0.25), np.full((4, 6, 3, 5), 1 / 3))
    with pytest.raises(ValueError):
        fuse_average([a, b])


def test_priority_map_validation():
    with pytest.raises(ConfigError):
        PriorityMap(vru=2, vehicle=2, background=1).validate()
    with pytest.raises(ConfigError):
        PriorityMap(vru=3, vehicle=0, background=1).validate()
    with pytest.raises(ConfigError):
        PriorityMap.from_dict({"vru": 1, "vehicle": 1, "background": 1})
