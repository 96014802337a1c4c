import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sca.errors import DimensionMismatch, InfeasibleCodebook, LineSearchFailed, SingularTransform
from sca.datagen import SyntheticSpec, gen_ar1
from sca.transform import (
    Codebook,
    LearningConfig,
    SparsifyingTransform,
    Threshold,
    TopS,
    learn_transform,
    objective,
    objective_gradient_w,
    omega1,
    sparse_coding_step,
    transform_update_step,
)

UNIT = LearningConfig(beta1=1.0, beta11=1.0, beta12=1.0, beta13=1.0, s_x=1)


def _objective_by_loops(w, a, x, cfg):
    # elementwise summation, independent of the vectorised path
    L, N = w.shape
    M = x.shape[1]
    err = 0.0
    for l in range(L):
        for m in range(M):
            v = sum(w[l, n] * x[n, m] for n in range(N)) - a[l, m]
            err += v * v
    fro = sum(w[l, n] ** 2 for l in range(L) for n in range(N))
    wwt = [[sum(w[i, n] * w[j, n] for n in range(N)) - (i == j) for j in range(L)] for i in range(L)]
    orth = sum(v * v for row in wwt for v in row)
    gram = np.array([[sum(w[l, i] * w[l, j] for l in range(L)) for j in range(N)] for i in range(N)])
    logdet = np.log(abs(np.linalg.det(gram)))
    return err + cfg.beta1 * (fro / cfg.beta11 + orth / cfg.beta12 - logdet / cfg.beta13)


def _random_full_rank(rng, L, N):
    return rng.standard_normal((L, N))


def test_omega1_identity():
    assert omega1(np.eye(2), UNIT) == pytest.approx(2.0, abs=1e-15)


def test_omega1_scaled_identity():
    # ||2I||^2 = 8, ||4I - I||^2 = 18, log det(4I) = log 16
    assert omega1(2 * np.eye(2), UNIT) == pytest.approx(8 + 18 - np.log(16.0), rel=1e-14)
    assert omega1(2 * np.eye(2), UNIT) == pytest.approx(23.227411277760218, rel=1e-14)


def test_omega1_singular():
    with pytest.raises(SingularTransform):
        omega1(np.array([[1.0, 0.0], [0.0, 0.0]]), UNIT)


def test_omega1_orthonormal_rows(rng):
    q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    # orthonormal square W: ||W||^2 = L, WW^T - I = 0, det(W^T W) = 1
    assert omega1(q, UNIT) == pytest.approx(5.0, abs=1e-12)


def test_objective_zero_error():
    cfg = LearningConfig(s_x=1)
    assert objective(np.eye(2), np.eye(2), np.eye(2), cfg) == pytest.approx(2.0)


def test_objective_rejects_infeasible_codebook():
    with pytest.raises(InfeasibleCodebook):
        objective(np.eye(2), Codebook(np.zeros((2, 2))), np.eye(2), LearningConfig(s_x=1))


def test_objective_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        objective(np.eye(3), np.eye(2), np.eye(2), LearningConfig(s_x=1))


def test_objective_matches_loop_oracle(rng):
    w = _random_full_rank(rng, 4, 3)
    x = rng.standard_normal((3, 5))
    cfg = LearningConfig(beta1=0.1, s_x=2)
    a = sparse_coding_step(w, x, 2)
    expected = _objective_by_loops(w, a.values, x, cfg)
    assert objective(w, a, x, cfg) == pytest.approx(expected, rel=1e-12)


def test_sparse_coding_step_top2():
    a = sparse_coding_step(np.eye(3), np.array([[3.0], [-1.0], [0.5]]), 2)
    np.testing.assert_array_equal(a.values[:, 0], [3.0, -1.0, 0.0])


def test_sparse_coding_step_full(rng):
    w = rng.standard_normal((4, 3))
    x = rng.standard_normal((3, 6))
    np.testing.assert_array_equal(sparse_coding_step(w, x, 4).values, w @ x)


def _best_support(z, s):
    best, best_err = None, np.inf
    for sup in itertools.combinations(range(z.size), s):
        kept = np.zeros_like(z)
        kept[list(sup)] = z[list(sup)]
        err = np.sum((z - kept) ** 2)
        if err < best_err - 1e-15:
            best, best_err = kept, err
    return best


@given(st.integers(1, 8), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_sparse_coding_step_matches_enumeration(L, s, seed):
    s = min(s, L)
    r = np.random.default_rng(seed)
    w = r.standard_normal((L, 3))
    x = r.standard_normal((3, 4))
    a = sparse_coding_step(w, x, s)
    z = w @ x
    for m in range(x.shape[1]):
        np.testing.assert_array_equal(a.values[:, m], _best_support(z[:, m], s))


def test_sparse_coding_step_random_5x4(rng):
    w = rng.standard_normal((5, 4))
    x = rng.standard_normal((4, 1))
    a = sparse_coding_step(w, x, 2)
    z = (w @ x)[:, 0]
    np.testing.assert_array_equal(a.values[:, 0], _best_support(z, 2))


def test_sparse_coding_step_bad_shape():
    with pytest.raises(DimensionMismatch):
        sparse_coding_step(np.eye(3), np.ones((2, 2)), 1)


def _finite_difference(w, a, x, cfg, h=1e-6):
    g = np.zeros_like(w)
    for idx in np.ndindex(*w.shape):
        e = np.zeros_like(w)
        e[idx] = h
        g[idx] = (objective(w + e, a, x, cfg) - objective(w - e, a, x, cfg)) / (2 * h)
    return g


def test_gradient_zero_at_identity():
    cfg = LearningConfig(beta1=0.0, s_x=1)
    np.testing.assert_array_equal(objective_gradient_w(np.eye(2), np.eye(2), np.eye(2), cfg), 0.0)


def test_gradient_zero_data():
    cfg = LearningConfig(beta1=0.0, s_x=1)
    a = np.array([[1.0, 0.0], [0.0, -2.0]])
    np.testing.assert_array_equal(objective_gradient_w(np.eye(2), a, np.zeros((2, 2)), cfg), 0.0)


def test_gradient_matches_finite_differences(rng):
    w = rng.standard_normal((3, 2))
    x = rng.standard_normal((2, 4))
    cfg = LearningConfig(beta1=0.7, beta11=2.0, beta12=0.5, beta13=1.5, s_x=2)
    a = sparse_coding_step(w, x, 2)
    g = objective_gradient_w(w, a, x, cfg)
    fd = _finite_difference(w, a, x, cfg)
    assert np.max(np.abs(g - fd)) / np.max(np.abs(fd)) < 1e-5


def test_update_step_decreases(rng):
    w = rng.standard_normal((4, 3))
    x = rng.standard_normal((3, 20))
    cfg = LearningConfig(beta1=0.5, s_x=2)
    a = sparse_coding_step(w, x, 2)
    w2 = transform_update_step(w, a, x, cfg)
    assert objective(w2, a, x, cfg) < objective(w, a, x, cfg)


def test_update_step_fixed_point():
    cfg = LearningConfig(beta1=0.0, s_x=2)
    w = np.eye(2)
    out = transform_update_step(w, np.eye(2), np.eye(2), cfg)
    np.testing.assert_array_equal(out, w)


def test_update_step_rank_deficient():
    with pytest.raises(SingularTransform):
        transform_update_step(np.array([[1.0, 0.0], [0.0, 0.0]]), np.eye(2), np.eye(2), LearningConfig(s_x=1))


def test_update_step_warns_when_no_descent_possible(rng, monkeypatch):
    import sca.transform as tr

    w = rng.standard_normal((3, 2))
    x = rng.standard_normal((2, 5))
    cfg = LearningConfig(s_x=1)
    a = sparse_coding_step(w, x, 1)
    monkeypatch.setattr(tr, "_try_objective", lambda *args: np.inf)
    with pytest.warns(LineSearchFailed):
        out = transform_update_step(w, a, x, cfg)
    np.testing.assert_array_equal(out, w)


def test_learn_identity_data_descends():
    cfg = LearningConfig(s_x=1, max_iters=30, rng_seed=3)
    x = np.eye(4)
    t, a, trace = learn_transform(x, 4, cfg)
    assert trace.objective[-1] <= trace.objective[0]
    assert a.values.shape == (4, 4)
    assert np.all(np.count_nonzero(a.support, axis=0) == 1)


def test_learn_ar1_trace_non_increasing():
    x = gen_ar1(SyntheticSpec(kind="ar1", n_dims=64, n_points=1000, rho=0.5, rng_seed=7))
    cfg = LearningConfig(s_x=8, max_iters=40, rng_seed=7)
    _, _, trace = learn_transform(x, 64, cfg)
    assert np.all(np.diff(trace.objective) <= 1e-9)


def test_learn_deterministic(rng):
    x = rng.standard_normal((6, 50))
    cfg = LearningConfig(s_x=2, max_iters=20, rng_seed=11)
    t1, a1, _ = learn_transform(x, 8, cfg)
    t2, a2, _ = learn_transform(x, 8, cfg)
    assert t1.w.tobytes() == t2.w.tobytes()
    assert a1.values.tobytes() == a2.values.tobytes()


def test_learn_refuses_undercomplete(rng):
    with pytest.raises(SingularTransform):
        learn_transform(rng.standard_normal((6, 20)), 4, LearningConfig(s_x=2))


def test_transform_validation():
    with pytest.raises(ValueError):
        SparsifyingTransform(np.eye(3), TopS(4))
    with pytest.raises(ValueError):
        SparsifyingTransform(np.eye(3), Threshold(-1.0))
    with pytest.raises(SingularTransform):
        SparsifyingTransform(np.zeros((3, 3)), TopS(1))


def test_config_validation():
    with pytest.raises(ValueError):
        LearningConfig(max_iters=0)
    with pytest.raises(ValueError):
        LearningConfig(obj_tol=0.0)
    with pytest.raises(ValueError):
        LearningConfig(beta12=0.0)
