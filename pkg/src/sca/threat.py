"""Leakage measurements for the released representation.

Covers reconstruction by authorized vs. curious parties, support stability
under query noise, distortion/sparsity sweeps, clustering leakage through
pairwise-distance statistics, and the (beta, gamma)-recoverability check.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import pdist

from .ambiguation import ambiguate, ambiguate_query, build_noise_model
from .codec import (
    Decoder,
    codes_to_dense,
    decode,
    encode,
    encode_matrix,
    encode_ternary,
    learn_decoder,
    purify,
    rescale,
)
from .codes import SparseCode
from .errors import (
    DegenerateDistances,
    DimensionMismatch,
    EmptyNeighborhood,
    EmptyQuerySet,
    ZeroReference,
)
from .search import LatentMetric, SearchIndex
from .transform import (
    LearningConfig,
    SparsifyingTransform,
    TopS,
    as_data_matrix,
    learn_transform,
)

KL_BINS = 64


def normalized_mse(x, xhat) -> float:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    xhat = np.asarray(xhat, dtype=np.float64).reshape(-1)
    if x.shape != xhat.shape:
        raise DimensionMismatch(f"lengths differ: {x.size} vs {xhat.size}")
    ref = float(x @ x)
    if ref == 0:
        raise ZeroReference("reference vector has zero norm")
    d = x - xhat
    return float(d @ d) / ref


def support_match_probabilities(x, y, t: SparsifyingTransform) -> tuple[float, float]:
    """Fraction of support atoms of phi(x) recovered by phi(y), paired by column."""
    if not isinstance(t.policy, TopS):
        raise ValueError("support statistics need a top-S policy")
    x = as_data_matrix(x)
    y = as_data_matrix(y)
    if x.shape != y.shape:
        raise DimensionMismatch(f"x is {x.shape} but y is {y.shape}")
    hits = 0
    for m in range(x.shape[1]):
        sx = encode(t, x[:, m]).indices
        sy = encode(t, y[:, m]).indices
        hits += np.intersect1d(sx, sy, assume_unique=True).size
    p_c = hits / (x.shape[1] * t.policy.s_x)
    return p_c, 1.0 - p_c


def reconstruction_attack(p_codes, d: Decoder, keys=None) -> np.ndarray:
    """Decode released codes; with ``keys`` each code is purified first."""
    p_codes = list(p_codes)
    if keys is not None:
        keys = list(keys)
        if len(keys) != len(p_codes):
            raise DimensionMismatch("one key support is needed per code")
        p_codes = [purify(p, k) for p, k in zip(p_codes, keys)]
    out = np.empty((d.n_dims, len(p_codes)))
    for m, p in enumerate(p_codes):
        out[:, m] = decode(d, p)
    return out


@dataclass(frozen=True)
class PipelineConfig:
    """Everything needed to go from raw data to released codes and back."""

    code_len: int
    learning: LearningConfig = field(default_factory=LearningConfig)
    ternary: bool = False
    beta_r: float = 1.0
    beta: float = 0.0
    decoder_mode: str | None = None
    rescale: bool = False
    # multiply beta1 by the number of training points so the regulariser keeps
    # pace with the data term, which grows linearly in M
    scale_beta1: bool = True
    fixed_w: np.ndarray | None = None
    seed: int = 0


@dataclass
class Deployment:
    """A fitted pipeline plus the server-side state built from it."""

    x: np.ndarray
    transform: SparsifyingTransform
    decoder: Decoder
    clean_codes: list
    released: list
    noise_model: object
    s_p: int
    index: SearchIndex | None = None
    ternary: bool = False

    def encode(self, y) -> SparseCode:
        return (encode_ternary if self.ternary else encode)(self.transform, y)


def fit_transform(x, s_x: int, cfg: PipelineConfig) -> SparsifyingTransform:
    if cfg.fixed_w is not None:
        return SparsifyingTransform(cfg.fixed_w, TopS(s_x))
    beta1 = cfg.learning.beta1 * (x.shape[1] if cfg.scale_beta1 else 1)
    t, _, _ = learn_transform(x, cfg.code_len, replace(cfg.learning, s_x=s_x, beta1=beta1))
    return t


def deploy(x, s_x: int, s_p: int, cfg: PipelineConfig, metric=None, radius=0.0,
           epsilon=0.0, rng=None, transform=None) -> Deployment:
    """Owner side: learn W, encode, fit R on the clean codebook, ambiguate."""
    x = as_data_matrix(x)
    t = transform if transform is not None else fit_transform(x, s_x, cfg)
    clean = encode_matrix(t, x, ternary=cfg.ternary)
    real = clean if not cfg.ternary else encode_matrix(t, x)
    a = codes_to_dense(real, t.rows)
    dec = learn_decoder(t.w, a, x, cfg.beta_r, cfg.beta, cfg.decoder_mode)
    nm = build_noise_model(clean, ternary=cfg.ternary)
    rng = np.random.default_rng([cfg.seed, s_x, s_p]) if rng is None else rng
    released = [ambiguate(c, s_p, nm, rng) for c in clean]
    if metric is None:
        metric = LatentMetric.SUPPORT_OVERLAP if cfg.ternary else LatentMetric.MASKED_EUCLIDEAN
    index = SearchIndex(released, metric=metric, radius=radius, epsilon=epsilon)
    return Deployment(x, t, dec, clean, released, nm, s_p, index, cfg.ternary)


def _mse_columns(x, xhat, scale=False):
    out = np.empty(x.shape[1])
    for m in range(x.shape[1]):
        est = rescale(xhat[:, m], x[:, m]) if scale else xhat[:, m]
        out[m] = normalized_mse(x[:, m], est)
    return out


def distortion_sparsity_curve(x, sweep, cfg: PipelineConfig) -> list[dict]:
    """Mean normalized MSE for both parties at each (S_x, S_p) point.

    The authorized party purifies with the true support; the unauthorized
    party decodes the released code as is.  W is learned once per S_x.
    """
    x = as_data_matrix(x)
    transforms = {}
    rows = []
    for s_x, s_p in sweep:
        if s_x > cfg.code_len or s_p > cfg.code_len - s_x:
            raise ValueError(f"infeasible sweep point (S_x={s_x}, S_p={s_p}) for L={cfg.code_len}")
        if s_x not in transforms:
            transforms[s_x] = fit_transform(x, s_x, cfg)
        dep = deploy(x, s_x, s_p, cfg, transform=transforms[s_x])
        keys = [c.indices for c in dep.clean_codes]
        auth = reconstruction_attack(dep.released, dep.decoder, keys)
        unauth = reconstruction_attack(dep.released, dep.decoder)
        rows.append({
            "s_x": s_x,
            "s_p": s_p,
            "authorized_mse": float(np.mean(_mse_columns(x, auth, cfg.rescale))),
            "unauthorized_mse": float(np.mean(_mse_columns(x, unauth, cfg.rescale))),
        })
    return rows


def kl_histogram(p_samples, q_samples, bins: int = KL_BINS) -> float:
    """D(P||Q) in nats from shared-bin histograms with add-one smoothing."""
    p_samples = np.asarray(p_samples, dtype=np.float64).reshape(-1)
    q_samples = np.asarray(q_samples, dtype=np.float64).reshape(-1)
    if p_samples.size == 0 or q_samples.size == 0:
        raise ValueError("both samples must be nonempty")
    pooled = np.concatenate([p_samples, q_samples])
    lo, hi = float(pooled.min()), float(pooled.max())
    if lo == hi:
        raise DegenerateDistances(f"all distances equal {lo}")
    p, _ = np.histogram(p_samples, bins=bins, range=(lo, hi))
    q, _ = np.histogram(q_samples, bins=bins, range=(lo, hi))
    p = (p + 1.0) / (p.sum() + bins)
    q = (q + 1.0) / (q.sum() + bins)
    return float(np.sum(p * np.log(p / q)))


def _as_point_matrix(points):
    if isinstance(points, np.ndarray):
        return as_data_matrix(points)
    points = list(points)
    if points and isinstance(points[0], SparseCode):
        return codes_to_dense(points)
    return as_data_matrix(np.column_stack(points))


def cluster_leakage(points, labels, bins: int = KL_BINS) -> float:
    """KL(intra-cluster || inter-cluster) of pairwise Euclidean distances.

    ``points`` is an N x M matrix (one point per column) or a list of codes,
    which are compared as dense vectors.
    """
    pts = _as_point_matrix(points)
    labels = np.asarray(labels).reshape(-1)
    if labels.size != pts.shape[1]:
        raise DimensionMismatch("one label is needed per point")
    uniq, counts = np.unique(labels, return_counts=True)
    if uniq.size < 2 or counts.min() < 2:
        raise ValueError("need at least two clusters with two members each")
    d = pdist(pts.T)
    i, j = np.triu_indices(pts.shape[1], k=1)
    same = labels[i] == labels[j]
    return kl_histogram(d[same], d[~same], bins)


@dataclass(frozen=True)
class Recoverability:
    p_e_auth: float
    p_e_unauth: float
    beta: float
    gamma: float
    passes_i: bool
    passes_ii: bool
    # Condition (i) is evaluated literally as P_auth < gamma.  Under the
    # reading "authorized users succeed" one would expect >=; both raw
    # probabilities are reported so either orientation can be checked.
    orientation_note: str = "condition (i) evaluated literally: p_e_auth < gamma"


def query_distortion(dep: Deployment, y, s_q: int, rng, authorized: bool,
                     radius=None) -> float:
    """One protocol round; returns the normalized MSE against the returned point.

    An empty neighborhood yields ``inf`` (nothing was recovered).
    """
    b = dep.encode(y)
    probe = ambiguate_query(b, s_q, dep.noise_model, rng, dep.s_p)
    try:
        res = dep.index.query(probe, rng, radius)
    except EmptyNeighborhood:
        return np.inf
    pos = int(np.searchsorted(dep.index.ids, res.chosen_id))
    returned = dep.index.codes[pos]
    code = purify(returned, b.indices) if authorized else returned
    xhat = decode(dep.decoder, code)
    return normalized_mse(dep.x[:, res.chosen_id], xhat)


def recoverability_test(dep: Deployment, auth_queries, unauth_queries, beta: float,
                        gamma: float, s_q: int = 0, rng=None, radius=None,
                        n_redraws: int = 1) -> Recoverability:
    """Empirical P[d(x, xhat) <= beta] for authorized and unauthorized probes.

    Queries are columns of the given matrices.  With ``n_redraws > 1`` each
    query's distortion is averaged over fresh probe noise and fair draws.
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if not 0 <= gamma <= 1:
        raise ValueError("gamma must lie in [0, 1]")
    rng = np.random.default_rng(0) if rng is None else rng

    def success_rate(queries, authorized):
        q = np.asarray(queries, dtype=np.float64)
        if q.ndim == 1:
            q = q[:, None]
        if q.size == 0 or q.shape[1] == 0:
            raise EmptyQuerySet("no queries given")
        ok = 0
        for m in range(q.shape[1]):
            d = np.mean([
                query_distortion(dep, q[:, m], s_q, rng, authorized, radius)
                for _ in range(n_redraws)
            ])
            ok += d <= beta
        return ok / q.shape[1]

    p_auth = success_rate(auth_queries, True)
    p_unauth = success_rate(unauth_queries, False)
    return Recoverability(p_auth, p_unauth, beta, gamma, p_auth < gamma, p_unauth >= gamma)


@dataclass
class LeakageReport:
    rows: list = field(default_factory=list)
    p_c: float | None = None
    p_m: float | None = None
    kl_intra_inter: float | None = None
    recoverability: Recoverability | None = None

    def __post_init__(self):
        if self.p_c is not None:
            if self.p_m is None:
                self.p_m = 1.0 - self.p_c
            if abs(self.p_c + self.p_m - 1.0) > 1e-12:
                raise ValueError("p_c + p_m must equal 1")
        for r in self.rows:
            if r["authorized_mse"] < 0 or r["unauthorized_mse"] < 0:
                raise ValueError("MSE values must be nonnegative")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s_x", "s_p", "authorized_mse", "unauthorized_mse"])
        for r in self.rows:
            w.writerow([r["s_x"], r["s_p"], repr(r["authorized_mse"]), repr(r["unauthorized_mse"])])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [f"sweep points: {len(self.rows)}"]
        if self.p_c is not None:
            lines.append(f"P_c = {self.p_c:.6f}  P_m = {self.p_m:.6f}")
        if self.kl_intra_inter is not None:
            lines.append(f"KL(intra||inter) = {self.kl_intra_inter:.6f}")
        rec = self.recoverability
        if rec is not None:
            lines.append(
                f"P_e^auth = {rec.p_e_auth:.4f}  P_e^unauth = {rec.p_e_unauth:.4f}  "
                f"(beta={rec.beta:g}, gamma={rec.gamma:g})  "
                f"(i): {'pass' if rec.passes_i else 'fail'}  (ii): {'pass' if rec.passes_ii else 'fail'}"
            )
            lines.append(f"note: {rec.orientation_note}")
        return "\n".join(lines)
