"""Latent-space near neighbor search over released codes.

Everything is a linear scan: distances from the probe to every stored code,
an r-ball filter, and a uniform draw from the ball.  Ties are broken by
ascending id throughout.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .codec import codes_to_dense
from .codes import SparseCode
from .errors import DimensionMismatch, EmptyGroundTruth, EmptyNeighborhood


class LatentMetric(str, Enum):
    SUPPORT_OVERLAP = "support_overlap"
    MASKED_EUCLIDEAN = "masked_euclidean"


def _row_norms(diff: np.ndarray) -> np.ndarray:
    # fixed left-to-right accumulation so the scalar metric and the index scan
    # agree to the last bit (numpy's reductions reorder by array shape)
    acc = np.zeros(diff.shape[0])
    for j in range(diff.shape[1]):
        acc += diff[:, j] * diff[:, j]
    return np.sqrt(acc)


def latent_distance(q: SparseCode, p: SparseCode, metric=LatentMetric.MASKED_EUCLIDEAN) -> float:
    """Distance measured on the probe's support only.

    SUPPORT_OVERLAP counts probe positions missing from ``p``;
    MASKED_EUCLIDEAN is the l2 difference restricted to ``supp(q)``.
    """
    if q.length != p.length:
        raise DimensionMismatch(f"code lengths differ: {q.length} vs {p.length}")
    metric = LatentMetric(metric)
    pos = np.searchsorted(p.indices, q.indices)
    pos = np.minimum(pos, max(p.nnz - 1, 0))
    hit = (p.indices[pos] == q.indices) if p.nnz else np.zeros(q.nnz, dtype=bool)
    if metric is LatentMetric.SUPPORT_OVERLAP:
        return float(q.nnz - np.count_nonzero(hit))
    pv = np.where(hit, p.values[pos] if p.nnz else 0.0, 0.0)
    return float(_row_norms((q.values - pv)[None, :])[0])


@dataclass(frozen=True)
class QueryResult:
    chosen_id: int
    neighborhood_size: int
    candidates: tuple


class SearchIndex:
    """Immutable server-side index of released codes."""

    def __init__(self, codes, ids=None, metric=LatentMetric.MASKED_EUCLIDEAN,
                 radius: float = 0.0, epsilon: float = 0.0):
        codes = list(codes)
        if not codes:
            raise ValueError("cannot index an empty code list")
        ids = np.arange(len(codes)) if ids is None else np.asarray(ids, dtype=np.int64)
        if ids.size != len(codes):
            raise ValueError("ids and codes differ in number")
        if np.unique(ids).size != ids.size:
            raise ValueError("ids must be unique")
        if radius < 0 or epsilon < 0:
            raise ValueError("radius and epsilon must be nonnegative")
        self.code_len = codes[0].length
        self.metric = LatentMetric(metric)
        self.radius = float(radius)
        self.epsilon = float(epsilon)
        self.codes = tuple(codes)
        order = np.argsort(ids, kind="stable")
        self._ids = ids[order]
        # rows = stored points, so per-point reductions run over contiguous memory
        self._values = np.ascontiguousarray(codes_to_dense(codes, self.code_len).T[order])
        self._mask = self._values != 0
        self._ids.setflags(write=False)
        self._values.setflags(write=False)

    @property
    def ids(self) -> np.ndarray:
        return self._ids

    def __len__(self):
        return self._ids.size

    def distances(self, q: SparseCode) -> np.ndarray:
        """Distances from ``q`` to every stored code, in ascending id order."""
        if q.length != self.code_len:
            raise DimensionMismatch(f"probe length {q.length} != index length {self.code_len}")
        if self.metric is LatentMetric.SUPPORT_OVERLAP:
            hits = np.count_nonzero(self._mask[:, q.indices], axis=1)
            return (q.nnz - hits).astype(np.float64)
        return _row_norms(q.values[None, :] - self._values[:, q.indices])

    def ball_query(self, q: SparseCode, radius: float | None = None) -> list[int]:
        r = self.radius if radius is None else radius
        return self._ids[self.distances(q) <= r].tolist()

    def knn(self, q: SparseCode, k: int) -> list[int]:
        if not 1 <= k <= len(self):
            raise ValueError(f"k must lie in [1, {len(self)}], got {k}")
        d = self.distances(q)
        order = np.lexsort((self._ids, d))
        return self._ids[order[:k]].tolist()

    def query(self, q: SparseCode, rng, radius: float | None = None) -> QueryResult:
        """r-ball retrieval followed by a fair draw; raises EmptyNeighborhood."""
        return fair_sample(self.ball_query(q, radius), rng)


def fair_sample(candidates, rng) -> QueryResult:
    cands = tuple(int(c) for c in candidates)
    if not cands:
        raise EmptyNeighborhood("no stored point within the search radius")
    return QueryResult(cands[int(rng.integers(len(cands)))], len(cands), cands)


def fairness_band(size: int, epsilon: float) -> tuple[float, float]:
    """Admissible selection probabilities for a neighborhood of ``size`` points."""
    return 1.0 / (size * (1.0 + epsilon)), (1.0 + epsilon) / size


def recall_at_T(ground_truth, retrieved) -> float:
    gt = set(int(i) for i in ground_truth)
    if not gt:
        raise EmptyGroundTruth("ground-truth neighbor list is empty")
    return len(gt & set(int(i) for i in retrieved)) / len(gt)


def radius_from_quantile(index: SearchIndex, probes, quantile: float) -> float:
    """Radius equal to the given quantile of probe-to-code distances."""
    if not 0 <= quantile <= 1:
        raise ValueError(f"quantile must lie in [0, 1], got {quantile}")
    d = np.concatenate([index.distances(q) for q in probes])
    return float(np.quantile(d, quantile))
