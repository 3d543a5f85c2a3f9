"""Self-describing binary container for named arrays.

Layout (all integers little-endian)::

    magic        4 bytes   kind tag, e.g. b"FSNS" (sample), b"FSNC" (checkpoint)
    version      u32
    total_len    u64       length of the whole file in bytes, CRC included
    meta_len     u32
    meta         meta_len bytes of UTF-8 JSON
    n_arrays     u32
    per array:
      name_len   u16
      name       UTF-8
      dtype      u8        0=float32 1=float64 2=uint8 3=int64
      ndim       u8
      dims       u32 * ndim
      payload    little-endian, C order
    crc32        u32       zlib.crc32 of every preceding byte

Readers check, in order: magic, declared length (truncation), CRC, version.
"""
from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1

_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("u1"), 3: np.dtype("<i8")}
_CODES = {np.dtype(v).newbyteorder("=").str: k for k, v in _DTYPES.items()}
_PREFIX = struct.Struct("<4sIQ")


class ContainerError(Exception):
    """Malformed or unreadable container."""


class VersionError(ContainerError):
    pass


class TruncatedError(ContainerError):
    pass


class ChecksumError(ContainerError):
    pass


def _dtype_code(a: np.ndarray) -> int:
    key = a.dtype.newbyteorder("=").str
    if key not in _CODES:
        raise TypeError(f"unsupported dtype {a.dtype}")
    return _CODES[key]


def encode(magic: bytes, arrays: dict[str, np.ndarray], meta: dict | None = None,
           version: int = FORMAT_VERSION) -> bytes:
    if len(magic) != 4:
        raise ValueError("magic must be 4 bytes")
    body = bytearray()
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    body += struct.pack("<I", len(meta_bytes)) + meta_bytes
    body += struct.pack("<I", len(arrays))
    for name, a in arrays.items():
        a = np.asarray(a)
        code = _dtype_code(a)
        name_b = name.encode("utf-8")
        body += struct.pack("<H", len(name_b)) + name_b
        body += struct.pack("<BB", code, a.ndim)
        body += struct.pack(f"<{a.ndim}I", *a.shape)
        body += np.ascontiguousarray(a, dtype=_DTYPES[code]).tobytes()
    total = _PREFIX.size + len(body) + 4
    head = _PREFIX.pack(magic, version, total)
    crc = zlib.crc32(head + body) & 0xFFFFFFFF
    return bytes(head + body + struct.pack("<I", crc))


def decode(blob: bytes, magic: bytes) -> tuple[dict[str, np.ndarray], dict]:
    if len(blob) < _PREFIX.size:
        raise TruncatedError("file shorter than the fixed header")
    got_magic, version, total = _PREFIX.unpack_from(blob, 0)
    if got_magic != magic:
        raise ContainerError(f"bad magic {got_magic!r}, expected {magic!r}")
    if len(blob) < total:
        raise TruncatedError(f"file has {len(blob)} bytes, header declares {total}")
    if len(blob) > total:
        raise ContainerError(f"trailing bytes after declared length {total}")
    (crc,) = struct.unpack_from("<I", blob, total - 4)
    if zlib.crc32(blob[: total - 4]) & 0xFFFFFFFF != crc:
        raise ChecksumError("CRC32 mismatch")
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported format version {version} (reader supports {FORMAT_VERSION})")

    off = _PREFIX.size
    (meta_len,) = struct.unpack_from("<I", blob, off)
    off += 4
    meta = json.loads(blob[off: off + meta_len].decode("utf-8"))
    off += meta_len
    (n,) = struct.unpack_from("<I", blob, off)
    off += 4
    arrays = {}
    for _ in range(n):
        (name_len,) = struct.unpack_from("<H", blob, off)
        off += 2
        name = blob[off: off + name_len].decode("utf-8")
        off += name_len
        code, ndim = struct.unpack_from("<BB", blob, off)
        off += 2
        shape = struct.unpack_from(f"<{ndim}I", blob, off)
        off += 4 * ndim
        dt = _DTYPES[code]
        count = int(np.prod(shape)) if ndim else 1
        nbytes = count * dt.itemsize
        arrays[name] = np.frombuffer(blob, dtype=dt, count=count, offset=off).reshape(shape).astype(dt.newbyteorder("="))
        off += nbytes
    return arrays, meta


def write(path: str | Path, magic: bytes, arrays: dict[str, np.ndarray], meta: dict | None = None) -> Path:
    path = Path(path)
    path.write_bytes(encode(magic, arrays, meta))
    return path


def read(path: str | Path, magic: bytes) -> tuple[dict[str, np.ndarray], dict]:
    return decode(Path(path).read_bytes(), magic)
