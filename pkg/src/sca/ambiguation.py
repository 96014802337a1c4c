"""Release mechanisms: decoy entries on the support complement.

Database codes get ``s_p`` decoys, query probes get ``s_q <= s_p``.  Decoy
magnitudes are resampled from the codebook's own magnitudes with random
signs, so true and decoy entries share one marginal law.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codes import AmbiguatedCode, SparseCode
from .errors import (
    AmbiguationBudgetExceeded,
    EmptyCodebook,
    QueryNoiseExceedsDatabaseNoise,
)
from .transform import Codebook


@dataclass(frozen=True, eq=False)
class NoiseModel:
    magnitude_pool: np.ndarray | None = None
    ternary: bool = False

    def __post_init__(self):
        if self.ternary:
            return
        pool = np.array(self.magnitude_pool, dtype=np.float64).reshape(-1)
        if pool.size == 0:
            raise EmptyCodebook("magnitude pool is empty")
        if np.any(pool <= 0) or not np.all(np.isfinite(pool)):
            raise ValueError("magnitude pool must hold positive finite values")
        pool.setflags(write=False)
        object.__setattr__(self, "magnitude_pool", pool)

    def draw(self, n, rng) -> np.ndarray:
        signs = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        if self.ternary:
            return signs
        return signs * self.magnitude_pool[rng.integers(0, self.magnitude_pool.size, n)]


def build_noise_model(codes=None, ternary: bool = False) -> NoiseModel:
    """Noise model matching ``codes`` (a Codebook, dense array or list of codes)."""
    if ternary:
        return NoiseModel(ternary=True)
    if codes is None:
        raise EmptyCodebook("no codebook given")
    if isinstance(codes, Codebook):
        vals = codes.values[codes.values != 0]
    elif isinstance(codes, np.ndarray):
        vals = codes[codes != 0]
    else:
        codes = list(codes)
        vals = np.concatenate([c.values for c in codes]) if codes else np.empty(0)
    if vals.size == 0:
        raise EmptyCodebook("codebook holds no nonzero entries")
    return NoiseModel(np.abs(vals))


def ambiguate(a: SparseCode, s_p: int, nm: NoiseModel, rng) -> AmbiguatedCode:
    free = a.length - a.nnz
    if s_p < 0:
        raise ValueError(f"noise count must be nonnegative, got {s_p}")
    if s_p > free:
        raise AmbiguationBudgetExceeded(
            f"s_p={s_p} exceeds the {free} free positions (L={a.length}, nnz={a.nnz})"
        )
    if s_p == 0:
        return AmbiguatedCode(a.length, a.indices, a.values, noise_count=0)
    mask = np.ones(a.length, dtype=bool)
    mask[a.indices] = False
    complement = np.flatnonzero(mask)
    pos = rng.choice(complement, size=s_p, replace=False)
    vals = nm.draw(s_p, rng)
    idx = np.concatenate([a.indices, pos])
    allv = np.concatenate([a.values, vals])
    order = np.argsort(idx, kind="stable")
    return AmbiguatedCode(a.length, idx[order], allv[order], noise_count=s_p)


def ambiguate_query(b: SparseCode, s_q: int, nm: NoiseModel, rng, s_p: int) -> AmbiguatedCode:
    """Probe release; ``s_q = 0`` sends the clear sparse code."""
    if s_q > s_p:
        raise QueryNoiseExceedsDatabaseNoise(f"s_q={s_q} exceeds the database budget s_p={s_p}")
    return ambiguate(b, s_q, nm, rng)


def ambiguation_levels(code_len: int, s_x: int) -> tuple[int, int]:
    """(half, full) decoy budgets: floor((L - S_x)/2) and L - S_x."""
    if not 0 <= s_x <= code_len:
        raise ValueError(f"s_x={s_x} must lie in [0, {code_len}]")
    full = code_len - s_x
    return full // 2, full
