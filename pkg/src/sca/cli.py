"""Command-line front end: the three protocol parties plus the experiment runner.

Exit codes: 0 success (including an empty neighborhood), 1 configuration
error, 2 I/O or file-format error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .ambiguation import ambiguate, ambiguate_query, ambiguation_levels, build_noise_model
from .codec import Decoder, codes_to_dense, decode, encode, encode_matrix, encode_ternary, learn_decoder, purify
from .config import ExperimentConfig
from .datagen import gen_authorized_query, gen_unauthorized_query, generate
from .errors import (
    AmbiguationBudgetExceeded,
    ConfigError,
    EmptyCodebook,
    EmptyNeighborhood,
    FormatError,
    QueryNoiseExceedsDatabaseNoise,
    SCAError,
    ShapeUnsupported,
    SingularSystem,
    SingularTransform,
)
from .experiments import STUDIES, run_study
from .search import LatentMetric, SearchIndex, radius_from_quantile
from .threat import fit_transform, normalized_mse
from .transform import SparsifyingTransform, Threshold, TopS

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3

TRANSFORM_FILE = "transform.scam"
TRANSFORM_META = "transform.json"
DECODER_FILE = "decoder.scam"
CODEBOOK_FILE = "codebook.scac"
DATA_FILE = "data.scam"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _meta_path(transform_path) -> Path:
    return Path(transform_path).with_suffix(".json")


def load_transform(path):
    """Read W and its sidecar metadata; returns ``(transform, meta)``."""
    w = fileio.read_matrix(path)
    meta_path = _meta_path(path)
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{meta_path}: invalid JSON ({exc.msg})", exc.pos) from exc
    try:
        if meta["policy"] == "top_s":
            policy = TopS(int(meta["s_x"]))
        else:
            policy = Threshold(float(meta["threshold"]))
        meta["s_p"] = int(meta["s_p"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{meta_path}: missing or invalid field {exc}", 0) from exc
    return SparsifyingTransform(w, policy), meta


def cmd_owner_prepare(args) -> int:
    cfg = ExperimentConfig.load(args.config, args.seed)
    out = Path(args.out or cfg.out_dir)
    if args.data:
        x = fileio.read_matrix(args.data)
        if x.shape[0] > cfg.code_len:
            raise ConfigError(f"code_len: must be >= data dimension {x.shape[0]}")
    else:
        x, _ = generate(cfg.data)
    pipe = cfg.pipeline()
    t = fit_transform(x, cfg.s_x, pipe)
    if cfg.policy == "threshold":
        t = SparsifyingTransform(t.w, Threshold(cfg.threshold))
    clean = encode_matrix(t, x, ternary=cfg.ternary)
    a = codes_to_dense(clean if not cfg.ternary else encode_matrix(t, x), t.rows)
    dec = learn_decoder(t.w, a, x, cfg.beta_r, cfg.decoder_beta)
    nm = build_noise_model(clean, ternary=cfg.ternary)
    rng = np.random.default_rng([cfg.seed, 0xA11])
    released = [ambiguate(c, cfg.s_p, nm, rng) for c in clean]

    out.mkdir(parents=True, exist_ok=True)
    fileio.write_matrix(out / DATA_FILE, x)
    fileio.write_matrix(out / TRANSFORM_FILE, t.w)
    fileio.write_matrix(out / DECODER_FILE, dec.r)
    fileio.write_codes(out / CODEBOOK_FILE, released, t.rows)
    metric = cfg.metric or (LatentMetric.SUPPORT_OVERLAP.value if cfg.ternary
                            else LatentMetric.MASKED_EUCLIDEAN.value)
    meta = {
        "code_len": t.rows,
        "n_dims": t.cols,
        "policy": cfg.policy,
        "s_x": cfg.s_x,
        "threshold": cfg.threshold,
        "ternary": cfg.ternary,
        "s_p": cfg.s_p,
        "metric": metric,
        "decoder_mode": dec.mode,
    }
    (out / TRANSFORM_META).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    half, full = ambiguation_levels(t.rows, cfg.s_x)
    print(f"owner: N={t.cols} M={x.shape[1]} L={t.rows} S_x={cfg.s_x} S_p={cfg.s_p} "
          f"(half={half}, full={full})")
    print(f"owner: wrote {', '.join([DATA_FILE, TRANSFORM_FILE, TRANSFORM_META, DECODER_FILE, CODEBOOK_FILE])} to {out}")
    return EXIT_OK


def cmd_server_index(args) -> int:
    length, codes = fileio.read_codes(args.codebook)
    if not codes:
        raise EmptyCodebook(f"{args.codebook}: codebook holds no codes (M=0)")
    nnz = np.array([c.nnz for c in codes])
    print(f"server: M={len(codes)} L={length} mean_nnz={nnz.mean():.4f} "
          f"min_nnz={nnz.min()} max_nnz={nnz.max()}")
    return EXIT_OK


def cmd_user_query(args) -> int:
    t, meta = load_transform(args.transform)
    length, stored = fileio.read_codes(args.codebook)
    if not stored:
        raise EmptyCodebook(f"{args.codebook}: codebook holds no codes (M=0)")
    if length != t.rows:
        raise FormatError(f"codebook L={length} but transform has {t.rows} rows", 8)
    y = fileio.read_matrix(args.query)
    if not 0 <= args.column < y.shape[1]:
        raise ConfigError(f"--column: {args.column} outside [0, {y.shape[1]})")
    y = y[:, args.column]
    if y.size != t.cols:
        raise ConfigError(f"query has {y.size} dimensions, transform expects {t.cols}")
    ternary = bool(meta.get("ternary", False))
    s_p = meta["s_p"]
    rng = np.random.default_rng(args.seed)

    b = (encode_ternary if ternary else encode)(t, y)
    nm = build_noise_model(stored, ternary=ternary)
    probe = ambiguate_query(b, args.s_q, nm, rng, s_p)
    metric = LatentMetric(args.metric or meta.get("metric", "masked_euclidean"))
    index = SearchIndex(stored, metric=metric)
    if args.radius is not None:
        radius = args.radius
    else:
        radius = radius_from_quantile(index, [probe], args.radius_quantile)

    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        fileio.write_codes(out / "probe.scac", [probe], length)
    print(f"user: probe nnz={probe.nnz} (S_q={args.s_q}) radius={radius!r} mode={args.mode}")
    try:
        res = index.query(probe, rng, radius)
    except EmptyNeighborhood:
        print("server: no such point (empty neighborhood)")
        return EXIT_OK
    returned = stored[res.chosen_id]
    print(f"server: chosen_id={res.chosen_id} neighborhood_size={res.neighborhood_size}")
    if out is not None:
        fileio.write_codes(out / "response.scac", [returned], length)
    if args.decoder:
        dec_r = fileio.read_matrix(args.decoder)
        dec = Decoder(dec_r, meta.get("decoder_mode", "orthonormal"))
        code = purify(returned, b.indices) if args.mode == "authorized" else returned
        xhat = decode(dec, code)
        print(f"user: reconstruction distortion (normalized MSE vs query) = {normalized_mse(y, xhat)!r}")
        if out is not None:
            fileio.write_matrix(out / "reconstruction.scam", xhat[:, None])
    return EXIT_OK


def cmd_make_query(args) -> int:
    rng = np.random.default_rng(args.seed)
    x = fileio.read_matrix(args.data)
    if args.unauthorized:
        y = gen_unauthorized_query(x.shape[0], args.sigma, rng)
    else:
        if not 0 <= args.column < x.shape[1]:
            raise ConfigError(f"--column: {args.column} outside [0, {x.shape[1]})")
        y = gen_authorized_query(x[:, args.column], args.sigma_z, rng)
    fileio.write_matrix(args.out, y[:, None])
    print(f"query: wrote {args.out}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig.load(args.config, args.seed)
    studies = STUDIES if args.study == "all" else [args.study]
    for name in studies:
        if args.study == "all" and name == "clustering-leakage" and cfg.data.kind != "clusters":
            print(f"{name}: skipped (needs data.kind 'clusters')")
            continue
        path, summary = run_study(name, cfg, args.out)
        print(f"{name}: {summary} -> {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sca", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    o = sub.add_parser("owner-prepare", help="learn W, encode, ambiguate, write public files")
    o.add_argument("--config", required=True)
    o.add_argument("--seed", type=int)
    o.add_argument("--out")
    o.add_argument("--data", help="matrix file to use instead of the configured synthetic data")
    o.set_defaults(func=cmd_owner_prepare)

    s = sub.add_parser("server-index", help="load and validate a released codebook")
    s.add_argument("codebook")
    s.set_defaults(func=cmd_server_index)

    u = sub.add_parser("user-query", help="encode a query, search, and reconstruct")
    u.add_argument("--query", required=True, help="matrix file holding query vectors as columns")
    u.add_argument("--column", type=int, default=0)
    u.add_argument("--transform", required=True)
    u.add_argument("--codebook", required=True)
    u.add_argument("--decoder")
    u.add_argument("--s-q", type=int, default=0)
    g = u.add_mutually_exclusive_group(required=True)
    g.add_argument("--radius", type=float)
    g.add_argument("--radius-quantile", type=float)
    u.add_argument("--metric", choices=[m.value for m in LatentMetric])
    u.add_argument("--mode", choices=["authorized", "unauthorized"], default="authorized")
    u.add_argument("--seed", type=int, default=0)
    u.add_argument("--out")
    u.set_defaults(func=cmd_user_query)

    q = sub.add_parser("make-query", help="write an authorized or unauthorized query vector")
    q.add_argument("--data", required=True)
    q.add_argument("--column", type=int, default=0)
    q.add_argument("--sigma-z", type=float, default=0.1, help="noise standard deviation")
    q.add_argument("--unauthorized", action="store_true")
    q.add_argument("--sigma", type=float, default=1.0, help="std of an unauthorized probe")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_make_query)

    e = sub.add_parser("experiment", help="run a study and write its CSV")
    e.add_argument("--config", required=True)
    e.add_argument("--study", required=True, choices=list(STUDIES) + ["all"])
    e.add_argument("--seed", type=int)
    e.add_argument("--out")
    e.set_defaults(func=cmd_experiment)
    return p


def _limit_threads():
    n = os.environ.get("SCA_THREADS")
    if not n:
        return None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(n))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _limit_threads()
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QueryNoiseExceedsDatabaseNoise as exc:
        print(f"config error: s_q: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, EmptyCodebook, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SingularTransform, SingularSystem, ShapeUnsupported, AmbiguationBudgetExceeded,
            np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SCAError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
