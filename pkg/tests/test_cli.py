import json

import numpy as np
import pytest

from sca import fileio
from sca.cli import main
from sca.codes import SparseCode

SMALL = {
    "data": {"kind": "gaussian", "n_dims": 8, "n_points": 32},
    "code_len": 8,
    "s_x": 2,
    "s_p": 3,
    "learning": {"max_iters": 20},
    "seed": 7,
}


def _config(tmp_path, **overrides):
    cfg = {**SMALL, **overrides}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def _owner(tmp_path, name="owner", **overrides):
    out = tmp_path / name
    assert main(["owner-prepare", "--config", str(_config(tmp_path, **overrides)), "--out", str(out)]) == 0
    return out


def _snapshot(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_owner_prepare_smoke(tmp_path, capsys):
    out = _owner(tmp_path)
    assert (out / "transform.scam").read_bytes()[:4] == b"SCAM"
    assert (out / "decoder.scam").read_bytes()[:4] == b"SCAM"
    assert (out / "codebook.scac").read_bytes()[:4] == b"SCAC"
    length, codes = fileio.read_codes(out / "codebook.scac")
    assert length == 8 and len(codes) == 32
    assert all(c.nnz == 5 for c in codes)
    text = capsys.readouterr().out
    assert "L=8" in text and "S_x=2" in text and "S_p=3" in text


def test_owner_prepare_deterministic(tmp_path):
    a = _snapshot(_owner(tmp_path, "a"))
    b = _snapshot(_owner(tmp_path, "b"))
    assert a == b


def test_seed_flag_overrides_config(tmp_path):
    cfg = _config(tmp_path)
    main(["owner-prepare", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["owner-prepare", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "2"])
    assert _snapshot(tmp_path / "a") != _snapshot(tmp_path / "b")


def test_owner_prepare_bad_budget(tmp_path, capsys):
    code = main(["owner-prepare", "--config", str(_config(tmp_path, s_p=7)), "--out", str(tmp_path / "o")])
    assert code == 1
    assert "s_p" in capsys.readouterr().err


def test_unknown_config_key(tmp_path, capsys):
    assert main(["experiment", "--config", str(_config(tmp_path, bogus=1)), "--study", "recall"]) == 1
    assert "bogus" in capsys.readouterr().err


def test_missing_file_is_io_error(tmp_path):
    assert main(["server-index", str(tmp_path / "nope.scac")]) == 2


def test_server_index_summary(tmp_path, capsys):
    out = _owner(tmp_path)
    capsys.readouterr()
    assert main(["server-index", str(out / "codebook.scac")]) == 0
    text = capsys.readouterr().out
    assert "M=32" in text and "L=8" in text and "mean_nnz=5.0000" in text


def test_server_index_truncated(tmp_path, capsys):
    out = _owner(tmp_path)
    buf = (out / "codebook.scac").read_bytes()
    bad = tmp_path / "bad.scac"
    bad.write_bytes(buf[:-4])
    assert main(["server-index", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "expected" in err and "got" in err and "offset" in err


def test_server_index_empty(tmp_path, capsys):
    empty = tmp_path / "empty.scac"
    fileio.write_codes(empty, [], 8)
    assert main(["server-index", str(empty)]) == 2
    assert "M=0" in capsys.readouterr().err


def _user(out, query, *extra):
    return main(["user-query", "--query", str(query), "--transform", str(out / "transform.scam"),
                 "--codebook", str(out / "codebook.scac"), "--decoder", str(out / "decoder.scam"),
                 *extra])


def _field(text, key):
    return next(tok.split("=", 1)[1] for tok in text.split() if tok.startswith(key + "="))


def _distortion(text):
    line = next((l for l in text.splitlines() if "distortion" in l), None)
    return None if line is None else float(line.rsplit("=", 1)[1])


def test_user_query_exact_match(tmp_path, capsys):
    out = _owner(tmp_path, s_p=0)
    capsys.readouterr()
    assert _user(out, out / "data.scam", "--column", "5", "--radius", "0", "--out", str(tmp_path / "u")) == 0
    text = capsys.readouterr().out
    assert _field(text, "chosen_id") == "5"
    _, probe = fileio.read_codes(tmp_path / "u" / "probe.scac")
    assert probe[0].nnz == 2
    assert fileio.read_matrix(tmp_path / "u" / "reconstruction.scam").shape == (8, 1)


def test_user_query_probe_in_the_clear(tmp_path, capsys):
    out = _owner(tmp_path)
    assert _user(out, out / "data.scam", "--column", "3", "--radius-quantile", "0.1",
                 "--s-q", "0", "--out", str(tmp_path / "u")) == 0
    _, probe = fileio.read_codes(tmp_path / "u" / "probe.scac")
    assert probe[0].nnz == 2


def test_user_query_s_q_above_s_p(tmp_path, capsys):
    out = _owner(tmp_path)
    assert _user(out, out / "data.scam", "--radius", "1", "--s-q", "4") == 1


def test_user_query_empty_neighborhood(tmp_path, capsys):
    out = _owner(tmp_path)
    q = tmp_path / "q.scam"
    fileio.write_matrix(q, np.full((8, 1), 100.0))
    capsys.readouterr()
    assert _user(out, q, "--radius", "0") == 0
    assert "no such point" in capsys.readouterr().out


def test_unauthorized_distortion_not_below_authorized(tmp_path, capsys):
    out = _owner(tmp_path, s_p=6)
    worse = compared = 0
    for col in range(16):
        q = tmp_path / f"q{col}.scam"
        main(["make-query", "--data", str(out / "data.scam"), "--column", str(col),
              "--sigma-z", "0.05", "--seed", str(col), "--out", str(q)])
        capsys.readouterr()
        d = {}
        for mode in ("authorized", "unauthorized"):
            # same seed: identical probe noise and fair draw in both modes
            assert _user(out, q, "--radius-quantile", "0.05", "--mode", mode, "--seed", "3") == 0
            text = capsys.readouterr().out
            d[mode] = _distortion(text)
        if d["authorized"] is not None:
            compared += 1
            worse += d["unauthorized"] >= d["authorized"]
    assert compared >= 12
    assert worse == compared


def test_make_query_unauthorized(tmp_path):
    out = _owner(tmp_path)
    q = tmp_path / "q.scam"
    assert main(["make-query", "--data", str(out / "data.scam"), "--unauthorized", "--out", str(q)]) == 0
    assert fileio.read_matrix(q).shape == (8, 1)


EXP = {
    "data": {"kind": "gaussian", "n_dims": 8, "n_points": 60},
    "code_len": 16,
    "s_x": 4,
    "s_x_sweep": [1, 2, 4],
    "s_p_sweep": [0, 4, 8],
    "recall_r": [1, 5],
    "recall_t": [1, 10],
    "n_queries": 30,
    "n_pairs": 300,
    "learning": {"max_iters": 20},
    "seed": 3,
}


def _experiment(tmp_path, study, name="exp", **overrides):
    cfg = tmp_path / f"{name}.json"
    cfg.write_text(json.dumps({**EXP, **overrides}))
    out = tmp_path / name
    assert main(["experiment", "--config", str(cfg), "--study", study, "--out", str(out)]) == 0
    return out


def _csv(path):
    raw = path.read_bytes()
    assert raw.endswith(b"\r\n")
    lines = raw.decode().split("\r\n")[:-1]
    return lines[0].split(","), [l.split(",") for l in lines[1:]]


def test_experiment_distortion_shape(tmp_path):
    header, rows = _csv(_experiment(tmp_path, "distortion-sparsity") / "distortion-sparsity.csv")
    assert header == ["s_x", "s_p", "authorized_mse", "unauthorized_mse"]
    assert len(rows) == 3 * 3


def test_experiment_infeasible_sweep(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({**EXP, "s_p_sweep": [0, 20]}))
    assert main(["experiment", "--config", str(cfg), "--study", "distortion-sparsity",
                 "--out", str(tmp_path / "o")]) == 1
    assert "s_p_sweep" in capsys.readouterr().err


def test_experiment_fairness_band(tmp_path):
    header, rows = _csv(_experiment(tmp_path, "fairness", epsilon=0.05) / "fairness.csv")
    assert header[:3] == ["id", "count", "frequency"]
    freq = np.array([float(r[2]) for r in rows])
    assert len(freq) == 10
    assert freq.max() / freq.min() <= 1.05 ** 2


def test_experiment_recall_full_list(tmp_path):
    header, rows = _csv(_experiment(tmp_path, "recall") / "recall.csv")
    assert header == ["R", "T", "recall"]
    full = [r for r in rows if int(r[1]) == 60]
    assert full and all(float(r[2]) == 1.0 for r in full)


@pytest.mark.parametrize("study", ["distance-preservation", "support-robustness", "clustering-leakage"])
def test_experiment_other_studies(tmp_path, study):
    data = {"kind": "clusters", "n_dims": 8, "n_points": 60}
    header, rows = _csv(_experiment(tmp_path, study, data=data) / f"{study}.csv")
    assert header and rows


def test_experiment_deterministic(tmp_path):
    a = _experiment(tmp_path, "recall", name="a")
    b = _experiment(tmp_path, "recall", name="b")
    assert (a / "recall.csv").read_bytes() == (b / "recall.csv").read_bytes()
