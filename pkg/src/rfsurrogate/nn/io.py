"""Model file format (layout version 1).

    offset 0   magic   b"RFSNN\\x00"           (6 bytes)
    offset 6   version uint16 little-endian    (= 1)
    offset 8   hlen    uint32 little-endian
    offset 12  header  UTF-8 JSON, hlen bytes, keys sorted:
                 {"arch": {...ArchSpec fields...},
                  "params": [{"name": str, "shape": [int, ...]}, ...],
                  "train_meta": {...}}
    then       parameters as float64 little-endian, C order, in header order

Nothing time-dependent is written, so saving the same model twice gives
identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .model import ArchSpec, Model

MAGIC = b"RFSNN\x00"
LAYOUT_VERSION = 1


class ModelFormatError(ValueError):
    pass


def dumps(m: Model) -> bytes:
    header = {
        "arch": m.arch.to_dict(),
        "params": [{"name": n, "shape": list(s)} for n, s in m.arch.param_shapes()],
        "train_meta": m.train_meta,
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    body = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in m.params)
    return MAGIC + struct.pack("<HI", LAYOUT_VERSION, len(hbytes)) + hbytes + body


def loads(buf: bytes) -> Model:
    if len(buf) < 12 or buf[:6] != MAGIC:
        raise ModelFormatError("not a model file (bad magic)")
    version, hlen = struct.unpack_from("<HI", buf, 6)
    if version != LAYOUT_VERSION:
        raise ModelFormatError(f"unsupported layout version {version}")
    try:
        header = json.loads(buf[12 : 12 + hlen].decode())
        arch = ArchSpec(**header["arch"])
    except (UnicodeDecodeError, ValueError, KeyError, TypeError) as exc:
        raise ModelFormatError(f"corrupt header: {exc}") from None
    off = 12 + hlen
    params = []
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape))
        if off + 8 * n > len(buf):
            raise ModelFormatError("truncated parameter data")
        params.append(np.frombuffer(buf, dtype="<f8", count=n, offset=off).reshape(shape).astype(np.float64))
        off += 8 * n
    if off != len(buf):
        raise ModelFormatError("trailing or missing parameter bytes")
    return Model(arch, params, header.get("train_meta"))


def save_model(m: Model, path) -> None:
    Path(path).write_bytes(dumps(m))


def load_model(path) -> Model:
    return loads(Path(path).read_bytes())
