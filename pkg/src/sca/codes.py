"""Sparse code containers shared by the codec, ambiguation and search layers.

A code of length ``L`` is stored as two parallel arrays: strictly increasing
int64 indices and nonzero float64 values.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _frozen(arr, dtype):
    out = np.array(arr, dtype=dtype, copy=True).reshape(-1)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class SparseCode:
    length: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = _frozen(self.indices, np.int64)
        val = _frozen(self.values, np.float64)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        if self.length < 1:
            raise ValueError(f"code length must be positive, got {self.length}")
        if idx.shape != val.shape:
            raise ValueError("indices and values differ in size")
        if idx.size > self.length:
            raise ValueError("more entries than code length")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.length:
                raise ValueError(f"index out of range [0, {self.length})")
            if np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly increasing")
        if np.any(val == 0) or not np.all(np.isfinite(val)):
            raise ValueError("stored values must be finite and nonzero")

    @classmethod
    def from_dense(cls, vec, **kwargs):
        vec = np.asarray(vec, dtype=np.float64).reshape(-1)
        idx = np.flatnonzero(vec)
        return cls(vec.size, idx, vec[idx], **kwargs)

    @classmethod
    def empty(cls, length, **kwargs):
        return cls(length, np.empty(0, np.int64), np.empty(0), **kwargs)

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    @property
    def support(self) -> frozenset:
        return frozenset(self.indices.tolist())

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.length)
        out[self.indices] = self.values
        return out

    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.indices.tolist(), self.values.tolist()))

    def __eq__(self, other):
        # Bit-exact comparison of content; the concrete subclass is ignored.
        if not isinstance(other, SparseCode):
            return NotImplemented
        return (
            self.length == other.length
            and np.array_equal(self.indices, other.indices)
            and self.values.tobytes() == other.values.tobytes()
        )

    def __hash__(self):
        return hash((self.length, self.indices.tobytes(), self.values.tobytes()))

    def __repr__(self):
        return f"{type(self).__name__}(length={self.length}, entries={self.entries()})"


@dataclass(frozen=True, eq=False, repr=False)
class TernaryCode(SparseCode):
    def __post_init__(self):
        super().__post_init__()
        if not np.all(np.abs(self.values) == 1.0):
            raise ValueError("ternary code values must be +1 or -1")


@dataclass(frozen=True, eq=False, repr=False)
class AmbiguatedCode(SparseCode):
    """A released code: true entries plus ``noise_count`` decoy entries.

    ``noise_count`` is ``None`` when the code was read back from disk and the
    declared budget is unknown.
    """

    noise_count: int | None = field(default=None)
