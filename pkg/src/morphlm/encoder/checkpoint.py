"""Binary checkpoint format.

Layout (all integers little-endian):
    magic   8 bytes  b"MORPHLM\\x00"
    version uint32
    config  uint32 length + UTF-8 JSON
    count   uint32
    records count x (uint16 name length, UTF-8 name, uint8 ndim, ndim x uint32 dims,
                     prod(dims) x float64 values)
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"MORPHLM\x00"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, config: Mapping, params: Mapping[str, np.ndarray]):
    path = Path(path)
    cfg = json.dumps(config, sort_keys=True).encode("utf-8")
    chunks = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(cfg)), cfg,
              struct.pack("<I", len(params))]
    for name, arr in params.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw)) + raw + struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(b"".join(chunks))
    tmp.replace(path)


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    buf = Path(path).read_bytes()
    if buf[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    off = 8

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(buf):
            raise CheckpointError(f"{path}: truncated at byte {off}")
        vals = struct.unpack_from(fmt, buf, off)
        off += size
        return vals

    (version,) = take("<I")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    (n,) = take("<I")
    config = json.loads(buf[off:off + n].decode("utf-8"))
    off += n
    (count,) = take("<I")
    params = {}
    for _ in range(count):
        (ln,) = take("<H")
        name = buf[off:off + ln].decode("utf-8")
        off += ln
        (ndim,) = take("<B")
        dims = take(f"<{ndim}I")
        size = int(np.prod(dims)) * 8
        if off + size > len(buf):
            raise CheckpointError(f"{path}: truncated record {name!r}")
        params[name] = np.frombuffer(buf, dtype="<f8", count=size // 8, offset=off).reshape(dims).astype(np.float64)
        off += size
    if off != len(buf):
        raise CheckpointError(f"{path}: {len(buf) - off} trailing bytes")
    return config, params
