"""Binary `.cten` tensor files.

Layout (little-endian throughout):

    magic   4 bytes  b"CTEN"
    version u8       1
    dtype   u8       0 = (re, im) float64 pairs, 1 = (re, im) float32 pairs,
                     2 = u8 mask values 0/1
    ndim    u8       3
    reserved u8      0
    dims    3 x u64  (N_r, N_t, N_f)
    payload row-major with the third index fastest

The byte layout is a bit-exact contract shared with external consumers;
interleaved (re, im) pairs written from C-order complex arrays need no
transform.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"CTEN"
VERSION = 1

DTYPE_COMPLEX128 = 0
DTYPE_COMPLEX64 = 1
DTYPE_MASK = 2

_HEADER = struct.Struct("<4sBBBB3Q")

_NUMPY_DTYPES = {
    DTYPE_COMPLEX128: np.dtype("<c16"),
    DTYPE_COMPLEX64: np.dtype("<c8"),
    DTYPE_MASK: np.dtype("u1"),
}


class CtenFormatError(ValueError):
    """Raised for malformed `.cten` files."""


def dtype_code_for(array: np.ndarray) -> int:
    if array.dtype == np.complex128:
        return DTYPE_COMPLEX128
    if array.dtype == np.complex64:
        return DTYPE_COMPLEX64
    if array.dtype == np.uint8 or array.dtype == bool:
        return DTYPE_MASK
    raise CtenFormatError(f"no dtype code for array dtype {array.dtype}")


def write_cten(path, array: np.ndarray, dtype_code: int | None = None) -> None:
    """Write an order-3 array; dtype code inferred from the array unless given."""
    a = np.asarray(array)
    if a.ndim != 3:
        raise CtenFormatError(f"expected an order-3 array, got ndim={a.ndim}")
    if dtype_code is None:
        dtype_code = dtype_code_for(a)
    if dtype_code not in _NUMPY_DTYPES:
        raise CtenFormatError(f"unknown dtype code {dtype_code}")
    if dtype_code == DTYPE_MASK:
        payload = np.ascontiguousarray(a.astype(np.uint8))
        if not np.isin(payload, (0, 1)).all():
            raise CtenFormatError("mask payload must contain only 0/1")
    else:
        payload = np.ascontiguousarray(a.astype(_NUMPY_DTYPES[dtype_code]))
    header = _HEADER.pack(MAGIC, VERSION, dtype_code, 3, 0, *a.shape)
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def read_cten(path) -> np.ndarray:
    """Read a `.cten` file; complex payloads keep their stored precision,
    masks come back as uint8."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise CtenFormatError(f"cannot read {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise CtenFormatError(f"{path}: truncated header")
    magic, version, dtype_code, ndim, _, n1, n2, n3 = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CtenFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CtenFormatError(f"{path}: unsupported version {version}")
    if ndim != 3:
        raise CtenFormatError(f"{path}: unsupported ndim {ndim}")
    if dtype_code not in _NUMPY_DTYPES:
        raise CtenFormatError(f"{path}: unknown dtype code {dtype_code}")
    dt = _NUMPY_DTYPES[dtype_code]
    expected = n1 * n2 * n3 * dt.itemsize
    body = raw[_HEADER.size:]
    if len(body) != expected:
        raise CtenFormatError(
            f"{path}: payload size {len(body)} != expected {expected}")
    data = np.frombuffer(body, dtype=dt).reshape(n1, n2, n3)
    return np.ascontiguousarray(data)
