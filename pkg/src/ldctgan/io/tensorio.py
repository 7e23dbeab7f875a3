"""Minimal binary tensor container.

Layout (all integers little-endian u32)::

    b"LDCTTNSR" | ndim | dims[ndim] | dtype_code | payload (row-major)

dtype_code 0 is float32, 1 is float64.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from ..errors import BadMagic, DimMismatch, TensorFormatError, TruncatedPayload

MAGIC = b"LDCTTNSR"
DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODE_OF = {np.dtype("float32"): 0, np.dtype("float64"): 1}


def _as_numpy(t) -> np.ndarray:
    if hasattr(t, "detach"):  # torch tensor
        t = t.detach().cpu().numpy()
    return np.asarray(t)


def encode_tensor(t) -> bytes:
    arr = _as_numpy(t)
    if arr.ndim == 0:
        raise DimMismatch("tensor must have at least one dimension")
    code = _CODE_OF.get(arr.dtype.newbyteorder("=")) if arr.dtype.kind == "f" else None
    if code is None:
        raise TensorFormatError(f"unsupported dtype {arr.dtype}; use float32 or float64")
    header = MAGIC + struct.pack(f"<I{arr.ndim}II", arr.ndim, *arr.shape, code)
    payload = np.ascontiguousarray(arr, dtype=DTYPE_CODES[code]).tobytes(order="C")
    return header + payload


def decode_tensor(data: bytes) -> np.ndarray:
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise BadMagic("not an LDCTTNSR tensor container")
    pos = len(MAGIC)
    if len(data) < pos + 4:
        raise DimMismatch("header ends before ndim")
    (ndim,) = struct.unpack_from("<I", data, pos)
    pos += 4
    if ndim == 0 or len(data) < pos + 4 * (ndim + 1):
        raise DimMismatch(f"header declares ndim={ndim} but is too short")
    dims = struct.unpack_from(f"<{ndim}I", data, pos)
    pos += 4 * ndim
    (code,) = struct.unpack_from("<I", data, pos)
    pos += 4
    if code not in DTYPE_CODES:
        raise TensorFormatError(f"unknown dtype code {code}")
    dtype = DTYPE_CODES[code]
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    got = len(data) - pos
    if got < expected:
        raise TruncatedPayload(f"payload has {got} bytes, header implies {expected}")
    if got > expected:
        raise DimMismatch(f"payload has {got} bytes, header implies {expected}")
    arr = np.frombuffer(data, dtype=dtype, count=expected // dtype.itemsize, offset=pos)
    return arr.reshape(dims).astype(dtype.newbyteorder("="), copy=True)


def write_tensor(t, path: str | os.PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_tensor(t))
    return path


def read_tensor(path: str | os.PathLike) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes())
