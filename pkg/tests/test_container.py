import struct

import numpy as np
import pytest

from fishingnet import container


def sample_arrays():
    rng = np.random.default_rng(0)
    return {"f32": rng.normal(size=(3, 4)).astype(np.float32), "f64": rng.normal(size=(5,)),
            "u8": rng.integers(0, 255, size=(2, 2, 3), dtype=np.uint8),
            "i64": np.arange(6, dtype=np.int64).reshape(2, 3), "empty": np.zeros((0, 7)),
            "scalar": np.float64(2.5)}


def test_round_trip_preserves_dtype_shape_values():
    arrays = sample_arrays()
    blob = container.encode(b"TEST", arrays, {"a": [1, 2], "b": "x"})
    back, meta = container.decode(blob, b"TEST")
    assert meta == {"a": [1, 2], "b": "x"}
    assert list(back) == list(arrays)
    for k, v in arrays.items():
        v = np.asarray(v)
        assert back[k].dtype == v.dtype and back[k].shape == v.shape
        np.testing.assert_array_equal(back[k], v)


def test_encoding_is_deterministic():
    a = sample_arrays()
    assert container.encode(b"TEST", a, {"z": 1, "a": 2}) == container.encode(b"TEST", a, {"a": 2, "z": 1})


def test_bad_magic():
    with pytest.raises(container.ContainerError):
        container.decode(container.encode(b"TEST", {}), b"OTHR")


def test_truncation_detected():
    blob = container.encode(b"TEST", sample_arrays())
    with pytest.raises(container.TruncatedError):
        container.decode(blob[:-10], b"TEST")
    with pytest.raises(container.TruncatedError):
        container.decode(blob[:6], b"TEST")


@pytest.mark.parametrize("pos", [20, 60, -2])
def test_corruption_detected(pos):
    blob = bytearray(container.encode(b"TEST", sample_arrays()))
    blob[pos] ^= 0x01
    with pytest.raises(container.ChecksumError):
        container.decode(bytes(blob), b"TEST")


def test_future_version_rejected():
    blob = container.encode(b"TEST", {"x": np.ones(2)}, version=container.FORMAT_VERSION + 1)
    with pytest.raises(container.VersionError):
        container.decode(blob, b"TEST")


def test_header_layout():
    blob = container.encode(b"TEST", {"x": np.ones(2)})
    magic, version, total = struct.unpack_from("<4sIQ", blob)
    assert (magic, version, total) == (b"TEST", container.FORMAT_VERSION, len(blob))


def test_unsupported_dtype():
    with pytest.raises(TypeError):
        container.encode(b"TEST", {"x": np.ones(2, dtype=np.complex64)})


def test_file_round_trip(tmp_path):
    p = container.write(tmp_path / "a.bin", b"TEST", {"x": np.arange(3, dtype=np.int64)}, {"k": 1})
    arrays, meta = container.read(p, b"TEST")
    np.testing.assert_array_equal(arrays["x"], [0, 1, 2])
    assert meta == {"k": 1}
