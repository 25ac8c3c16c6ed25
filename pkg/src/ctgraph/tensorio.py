"""Versioned little-endian tensor container used for checkpoints and spectral bases.

Layout::

    magic      8 bytes   b"CTGTNSR\\x00"
    version    uint32
    count      uint32    number of entries
    meta_len   uint32    length of the UTF-8 JSON metadata blob
    meta       bytes
    entries    count x {
        name_len  uint16, name (UTF-8)
        dtype     uint8   (0 float64, 1 int64, 2 float32, 3 bool)
        ndim      uint8
        shape     ndim x uint64
        data      row-major, little-endian
    }

Entries are written in sorted name order so identical content produces identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any, Mapping

import numpy as np

MAGIC = b"CTGTNSR\x00"
VERSION = 1

_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<i8"), 2: np.dtype("<f4"), 3: np.dtype("|b1")}
_CODES = {np.dtype("float64"): 0, np.dtype("int64"): 1, np.dtype("float32"): 2, np.dtype("bool"): 3}


class TensorFormatError(ValueError):
    pass


def dumps(tensors: Mapping[str, Any], meta: Mapping[str, Any] | None = None) -> bytes:
    meta_blob = json.dumps(dict(meta or {}), sort_keys=True).encode("utf-8")
    out = [MAGIC, struct.pack("<III", VERSION, len(tensors), len(meta_blob)), meta_blob]
    for name in sorted(tensors):
        arr = np.asarray(_to_numpy(tensors[name]))
        if arr.dtype not in _CODES:
            arr = arr.astype(np.float64) if arr.dtype.kind == "f" else arr.astype(np.int64)
        code = _CODES[arr.dtype]
        arr = np.ascontiguousarray(arr, dtype=_DTYPES[code])
        raw = name.encode("utf-8")
        out.append(struct.pack("<H", len(raw)))
        out.append(raw)
        out.append(struct.pack("<BB", code, arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        out.append(arr.tobytes(order="C"))
    return b"".join(out)


def loads(blob: bytes) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    try:
        return _parse(blob)
    except (struct.error, ValueError, KeyError, UnicodeDecodeError) as err:
        if isinstance(err, TensorFormatError):
            raise
        raise TensorFormatError(f"corrupt tensor file: {err}") from err


def _parse(blob: bytes) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    if blob[:8] != MAGIC:
        raise TensorFormatError("bad magic bytes; not a ctgraph tensor file")
    version, count, meta_len = struct.unpack_from("<III", blob, 8)
    if version != VERSION:
        raise TensorFormatError(f"unsupported tensor file version {version}")
    pos = 20
    meta = json.loads(blob[pos : pos + meta_len].decode("utf-8"))
    pos += meta_len
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        name = blob[pos : pos + name_len].decode("utf-8")
        pos += name_len
        code, ndim = struct.unpack_from("<BB", blob, pos)
        pos += 2
        shape = struct.unpack_from(f"<{ndim}Q", blob, pos)
        pos += 8 * ndim
        dtype = _DTYPES[code]
        size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        tensors[name] = np.frombuffer(blob, dtype=dtype, count=size // dtype.itemsize, offset=pos).reshape(shape).copy()
        pos += size
    if pos != len(blob):
        raise TensorFormatError("trailing bytes after last entry")
    return tensors, meta


def save(path: str | Path, tensors: Mapping[str, Any], meta: Mapping[str, Any] | None = None) -> None:
    Path(path).write_bytes(dumps(tensors, meta))


def load(path: str | Path) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    return loads(Path(path).read_bytes())


def _to_numpy(x: Any) -> np.ndarray:
    if hasattr(x, "detach"):
        return x.detach().cpu().numpy()
    return np.asarray(x)
