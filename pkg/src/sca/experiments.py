"""Studies run by ``sca experiment``; each returns a header and CSV rows."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from .ambiguation import ambiguate_query
from .codec import encode, encode_ternary, purify
from .config import ExperimentConfig
from .datagen import CLUSTERS, gen_authorized_query, generate
from .errors import ConfigError
from .search import LatentMetric, fairness_band, latent_distance, recall_at_T
from .threat import (
    cluster_leakage,
    deploy,
    distortion_sparsity_curve,
    fit_transform,
    reconstruction_attack,
    support_match_probabilities,
)
from .transform import SparsifyingTransform, TopS

STUDIES = (
    "distance-preservation",
    "support-robustness",
    "distortion-sparsity",
    "clustering-leakage",
    "recall",
    "fairness",
)


def _f(v):
    return repr(float(v))


def _rng(cfg, study):
    return np.random.default_rng([cfg.seed, STUDIES.index(study)])


def _data(cfg):
    return generate(cfg.data)


def near_far_spearman(d_s, d_t):
    """Spearman correlation of (d_S, d_T) below and above the median d_S."""
    d_s = np.asarray(d_s)
    d_t = np.asarray(d_t)
    near = d_s <= np.median(d_s)
    return spearmanr(d_s[near], d_t[near])[0], spearmanr(d_s[~near], d_t[~near])[0]


def distance_pairs(t, x, n_pairs, sigma_max, rng, ternary=True,
                   metric=LatentMetric.SUPPORT_OVERLAP):
    """Original and latent distances of pairs (x, x + s z), s ~ U(0, sigma_max)."""
    enc = encode_ternary if ternary else encode
    cols = rng.integers(0, x.shape[1], n_pairs)
    scales = rng.uniform(0.0, sigma_max, n_pairs)
    d_s = np.empty(n_pairs)
    d_t = np.empty(n_pairs)
    for k, (m, s) in enumerate(zip(cols, scales)):
        y = x[:, m] + s * rng.standard_normal(x.shape[0])
        d_s[k] = np.linalg.norm(x[:, m] - y)
        d_t[k] = latent_distance(enc(t, y), enc(t, x[:, m]), metric)
    return d_s, d_t


def study_distance_preservation(cfg: ExperimentConfig):
    rng = _rng(cfg, "distance-preservation")
    x, _ = _data(cfg)
    t = fit_transform(x, cfg.s_x, cfg.pipeline())
    metric = cfg.metric or (LatentMetric.SUPPORT_OVERLAP if cfg.ternary else LatentMetric.MASKED_EUCLIDEAN)
    d_s, d_t = distance_pairs(t, x, cfg.n_pairs, 2 * max(cfg.sigma_z_sweep), rng, cfg.ternary, metric)
    near, far = near_far_spearman(d_s, d_t)
    rows = [[k, _f(a), _f(b)] for k, (a, b) in enumerate(zip(d_s, d_t))]
    return ["pair", "d_s", "d_t"], rows, f"spearman near={near:.4f} far={far:.4f}"


def study_support_robustness(cfg: ExperimentConfig):
    rng = _rng(cfg, "support-robustness")
    data, _ = _data(cfg)
    learned = fit_transform(data, cfg.s_x, cfg.pipeline())
    x = data[:, : cfg.n_queries]
    ident = None
    if cfg.code_len == cfg.data.n_dims:
        ident = SparsifyingTransform(np.eye(cfg.code_len), TopS(cfg.s_x))
    rows = []
    for sz in cfg.sigma_z_sweep:
        y = x + sz * rng.standard_normal(x.shape)
        pc, pm = support_match_probabilities(x, y, learned)
        row = [_f(float(sz)), _f(pc), _f(pm)]
        if ident is not None:
            ic, im = support_match_probabilities(x, y, ident)
            row += [_f(ic), _f(im)]
        else:
            row += ["", ""]
        rows.append(row)
    header = ["sigma_z", "p_c_learned", "p_m_learned", "p_c_identity", "p_m_identity"]
    return header, rows, f"{len(rows)} noise levels"


def study_distortion_sparsity(cfg: ExperimentConfig):
    cfg.check_sweep()
    x, _ = _data(cfg)
    sweep = [(sx, sp) for sx in cfg.s_x_sweep for sp in cfg.s_p_sweep]
    res = distortion_sparsity_curve(x, sweep, cfg.pipeline())
    rows = [[r["s_x"], r["s_p"], _f(r["authorized_mse"]), _f(r["unauthorized_mse"])] for r in res]
    return ["s_x", "s_p", "authorized_mse", "unauthorized_mse"], rows, f"{len(rows)} sweep points"


def study_clustering_leakage(cfg: ExperimentConfig):
    if cfg.data.kind != CLUSTERS:
        raise ConfigError("data.kind: clustering-leakage needs kind 'clusters'")
    x, labels = _data(cfg)
    dep = deploy(x, cfg.s_x, cfg.s_p, cfg.pipeline())
    keys = [c.indices for c in dep.clean_codes]
    purified = [purify(p, k) for p, k in zip(dep.released, keys)]
    domains = [
        ("original", x),
        ("sparse_clean", dep.clean_codes),
        ("sparse_ambiguated", dep.released),
        ("sparse_purified", purified),
        ("reconstruction_authorized", reconstruction_attack(dep.released, dep.decoder, keys)),
        ("reconstruction_unauthorized", reconstruction_attack(dep.released, dep.decoder)),
    ]
    rows = [[name, _f(cluster_leakage(pts, labels))] for name, pts in domains]
    return ["domain", "kl_intra_inter"], rows, f"S_p={cfg.s_p}"


def study_recall(cfg: ExperimentConfig):
    rng = _rng(cfg, "recall")
    x, _ = _data(cfg)
    dep = deploy(x, cfg.s_x, cfg.s_p, cfg.pipeline(), metric=cfg.metric)
    n_points = x.shape[1]
    if max(cfg.recall_t) > n_points or max(cfg.recall_r) > n_points:
        raise ConfigError(f"recall_t: values must not exceed n_points={n_points}")
    t_values = sorted(set(cfg.recall_t) | {n_points})
    r_values = sorted(cfg.recall_r)
    hits = {(r, t): 0.0 for r in r_values for t in t_values}
    for _ in range(cfg.n_queries):
        m = int(rng.integers(n_points))
        y = gen_authorized_query(x[:, m], cfg.sigma_z, rng)
        probe = ambiguate_query(dep.encode(y), cfg.s_q, dep.noise_model, rng, dep.s_p)
        ranked = dep.index.knn(probe, n_points)
        truth = np.lexsort((np.arange(n_points), np.linalg.norm(x - y[:, None], axis=0)))
        for r in r_values:
            for t in t_values:
                hits[(r, t)] += recall_at_T(truth[:r], ranked[:t])
    rows = [[r, t, _f(hits[(r, t)] / cfg.n_queries)] for r in r_values for t in t_values]
    return ["R", "T", "recall"], rows, f"{cfg.n_queries} queries"


def study_fairness(cfg: ExperimentConfig):
    rng = _rng(cfg, "fairness")
    x, _ = _data(cfg)
    dep = deploy(x, cfg.s_x, cfg.s_p, cfg.pipeline(), metric=cfg.metric)
    y = gen_authorized_query(x[:, 0], cfg.sigma_z, rng)
    probe = ambiguate_query(dep.encode(y), cfg.s_q, dep.noise_model, rng, dep.s_p)
    if cfg.radius is not None:
        radius = cfg.radius
    else:
        d = np.sort(dep.index.distances(probe))
        radius = float(d[cfg.fairness_candidates - 1])
    cands = dep.index.ball_query(probe, radius)
    counts = dict.fromkeys(cands, 0)
    for _ in range(cfg.fairness_draws):
        counts[dep.index.query(probe, rng, radius).chosen_id] += 1
    lo, hi = fairness_band(len(cands), cfg.epsilon)
    rows = [[i, c, _f(c / cfg.fairness_draws), _f(lo), _f(hi)] for i, c in counts.items()]
    freq = np.array(list(counts.values())) / cfg.fairness_draws
    summary = f"{len(cands)} candidates, max/min frequency ratio {freq.max() / freq.min():.4f}"
    return ["id", "count", "frequency", "lower_band", "upper_band"], rows, summary


RUNNERS = {
    "distance-preservation": study_distance_preservation,
    "support-robustness": study_support_robustness,
    "distortion-sparsity": study_distortion_sparsity,
    "clustering-leakage": study_clustering_leakage,
    "recall": study_recall,
    "fairness": study_fairness,
}


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        w.writerows(rows)


def run_study(name: str, cfg: ExperimentConfig, out_dir=None) -> tuple[Path, str]:
    if name not in RUNNERS:
        raise ConfigError(f"study: unknown study {name!r}; choose from {', '.join(STUDIES)}")
    header, rows, summary = RUNNERS[name](cfg)
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{name}.csv"
    write_csv(path, header, rows)
    return path, summary
