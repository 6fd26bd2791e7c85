"""Binary checkpoint format.

Layout (all integers little-endian)::

    b"TCPV"  u32 version=1  u32 count
    count x { u16 name_len, name (UTF-8), u8 ndim, ndim x u64 dims, float64 values }
    u32 CRC32 (IEEE) of every preceding byte
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import CheckpointError

MAGIC = b"TCPV"
VERSION = 1


def dumps(arrays: dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(arrays))]
    for name, arr in arrays.items():
        raw = name.encode("utf-8")
        arr = np.asarray(arr, dtype=np.float64)
        if len(raw) > 0xFFFF or arr.ndim > 0xFF:
            raise CheckpointError(f"cannot encode tensor {name!r}")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def loads(buf: bytes) -> dict[str, np.ndarray]:
    if len(buf) < 16 or buf[:4] != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    body, (crc,) = buf[:-4], struct.unpack("<I", buf[-4:])
    if zlib.crc32(body) != crc:
        raise CheckpointError("checkpoint CRC mismatch")
    version, count = struct.unpack_from("<II", body, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    off = 12
    out: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<H", body, off)
            off += 2
            name = body[off : off + n].decode("utf-8")
            off += n
            (ndim,) = struct.unpack_from("<B", body, off)
            off += 1
            dims = struct.unpack_from(f"<{ndim}Q", body, off)
            off += 8 * ndim
            size = int(np.prod(dims, dtype=np.int64))
            if off + 8 * size > len(body):
                raise CheckpointError(f"tensor {name!r} runs past end of file")
            out[name] = np.frombuffer(body, dtype="<f8", count=size, offset=off).reshape(dims).astype(np.float64)
            off += 8 * size
    except struct.error as exc:
        raise CheckpointError(f"truncated checkpoint: {exc}") from None
    if off != len(body):
        raise CheckpointError("trailing bytes after last tensor")
    return out


def save(path, arrays: dict[str, np.ndarray]) -> None:
    Path(path).write_bytes(dumps(arrays))


def load(path) -> dict[str, np.ndarray]:
    p = Path(path)
    if not p.is_file():
        raise CheckpointError(f"checkpoint not found: {p}")
    return loads(p.read_bytes())
