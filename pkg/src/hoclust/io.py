"""File formats: binary ``.ten`` tensors, JSON tensors and JSON hypergraphs.

``.ten`` layout: magic ``b"TEN1"``, little-endian ``u32 d``, ``u32 dims[d]``,
then ``f64`` entries in C order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from hoclust.errors import ShapeError

MAGIC = b"TEN1"


def tensor_to_bytes(T) -> bytes:
    T = np.ascontiguousarray(T, dtype="<f8")
    head = MAGIC + struct.pack(f"<I{T.ndim}I", T.ndim, *T.shape)
    return head + T.tobytes(order="C")


def tensor_from_bytes(buf: bytes) -> np.ndarray:
    if buf[:4] != MAGIC:
        raise ShapeError("not a TEN1 file")
    (d,) = struct.unpack_from("<I", buf, 4)
    dims = struct.unpack_from(f"<{d}I", buf, 8)
    off = 8 + 4 * d
    count = int(np.prod(dims, dtype=np.int64))
    if len(buf) - off != 8 * count:
        raise ShapeError(f"payload holds {(len(buf) - off) // 8} entries, dims need {count}")
    return np.frombuffer(buf, dtype="<f8", count=count, offset=off).astype(float).reshape(dims)


def write_ten(path, T) -> None:
    Path(path).write_bytes(tensor_to_bytes(T))


def read_ten(path) -> np.ndarray:
    return tensor_from_bytes(Path(path).read_bytes())


def tensor_to_json(T) -> dict:
    T = np.asarray(T, dtype=float)
    return {"dims": list(T.shape), "data": T.ravel().tolist()}


def tensor_from_json(obj: dict) -> np.ndarray:
    dims = tuple(int(n) for n in obj["dims"])
    data = np.asarray(obj["data"], dtype=float)
    if data.size != int(np.prod(dims, dtype=np.int64)):
        raise ShapeError("data length does not match dims")
    return data.reshape(dims)


def read_tensor(path) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".json":
        return tensor_from_json(json.loads(path.read_text()))
    return read_ten(path)


def dump_json(obj, path=None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=_default)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")
