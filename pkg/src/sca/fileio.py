"""Binary file formats (all integers and floats little-endian).

Matrix file::

    b"SCAM" | version u32 | n_dims u64 | n_points u64 | n_dims*n_points f64, column-major

Sparse code file::

    b"SCAC" | version u32 | L u64 | count u64 | count x (nnz u32, nnz x (index u32, value f64))
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .codes import SparseCode
from .errors import FormatError

MATRIX_MAGIC = b"SCAM"
CODES_MAGIC = b"SCAC"
VERSION = 1

_HEADER = struct.Struct("<4sIQQ")
_NNZ = struct.Struct("<I")
_PAIR = np.dtype([("index", "<u4"), ("value", "<f8")])


def _header(buf, magic, kind):
    if len(buf) < _HEADER.size:
        raise FormatError(
            f"{kind} header truncated: expected {_HEADER.size} bytes, got {len(buf)}", len(buf)
        )
    got, version, a, b = _HEADER.unpack_from(buf, 0)
    if got != magic:
        raise FormatError(f"bad magic {got!r}, expected {magic!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported {kind} version {version}", 4)
    return a, b


def matrix_to_bytes(x) -> bytes:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {x.shape}")
    n, m = x.shape
    return _HEADER.pack(MATRIX_MAGIC, VERSION, n, m) + x.astype("<f8").tobytes(order="F")


def matrix_from_bytes(buf: bytes) -> np.ndarray:
    n, m = _header(buf, MATRIX_MAGIC, "matrix")
    expected = 8 * n * m
    actual = len(buf) - _HEADER.size
    if actual != expected:
        what = "truncated" if actual < expected else "has trailing bytes"
        raise FormatError(
            f"matrix payload {what}: expected {expected} bytes for {n}x{m}, got {actual}",
            _HEADER.size + min(actual, expected),
        )
    flat = np.frombuffer(buf, dtype="<f8", offset=_HEADER.size)
    return np.ascontiguousarray(flat.reshape((n, m), order="F"), dtype=np.float64)


def codes_to_bytes(codes, length: int) -> bytes:
    codes = list(codes)
    parts = [_HEADER.pack(CODES_MAGIC, VERSION, length, len(codes))]
    for c in codes:
        if c.length != length:
            raise ValueError(f"code length {c.length} differs from file length {length}")
        pairs = np.empty(c.nnz, dtype=_PAIR)
        pairs["index"] = c.indices
        pairs["value"] = c.values
        parts.append(_NNZ.pack(c.nnz))
        parts.append(pairs.tobytes())
    return b"".join(parts)


def codes_from_bytes(buf: bytes) -> tuple[int, list[SparseCode]]:
    """Parse a code file; returns ``(L, codes)``."""
    length, count = _header(buf, CODES_MAGIC, "code")
    if length < 1:
        raise FormatError("code length L must be positive", 8)
    off = _HEADER.size
    codes = []
    for k in range(count):
        if len(buf) - off < _NNZ.size:
            raise FormatError(
                f"truncated before code {k} of {count}: expected {_NNZ.size} more bytes, "
                f"got {len(buf) - off}", off,
            )
        (nnz,) = _NNZ.unpack_from(buf, off)
        if nnz > length:
            raise FormatError(f"code {k} declares nnz={nnz} > L={length}", off)
        off += _NNZ.size
        need = nnz * _PAIR.itemsize
        if len(buf) - off < need:
            raise FormatError(
                f"code {k} truncated: expected {need} bytes of entries, got {len(buf) - off}", off
            )
        pairs = np.frombuffer(buf, dtype=_PAIR, count=nnz, offset=off)
        idx = pairs["index"].astype(np.int64)
        val = pairs["value"].astype(np.float64)
        if nnz:
            bad = np.flatnonzero(idx >= length)
            if bad.size:
                raise FormatError(f"code {k}: index {idx[bad[0]]} >= L={length}",
                                  off + bad[0] * _PAIR.itemsize)
            bad = np.flatnonzero(np.diff(idx) <= 0)
            if bad.size:
                raise FormatError(f"code {k}: indices not strictly increasing",
                                  off + (bad[0] + 1) * _PAIR.itemsize)
            bad = np.flatnonzero((val == 0) | ~np.isfinite(val))
            if bad.size:
                raise FormatError(f"code {k}: zero or non-finite value",
                                  off + bad[0] * _PAIR.itemsize + 4)
        codes.append(SparseCode(length, idx, val))
        off += need
    if off != len(buf):
        raise FormatError(f"{len(buf) - off} trailing bytes after {count} codes", off)
    return length, codes


def write_matrix(path, x):
    Path(path).write_bytes(matrix_to_bytes(x))


def read_matrix(path) -> np.ndarray:
    return matrix_from_bytes(Path(path).read_bytes())


def write_codes(path, codes, length: int):
    Path(path).write_bytes(codes_to_bytes(codes, length))


def read_codes(path) -> tuple[int, list[SparseCode]]:
    return codes_from_bytes(Path(path).read_bytes())
