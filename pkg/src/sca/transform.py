"""Sparsifying transform learning.

Jointly fits a linear map ``W`` (L x N) and an S_x-sparse codebook ``A``
(L x M) by alternating an exact l0 sparse coding step with a gradient
transform update, minimising

    ||W X - A||_F^2 + beta1 * Omega1(W)

    Omega1(W) = ||W||_F^2 / b11 + ||W W^T - I||_F^2 / b12 - log|det(W^T W)| / b13

subject to ||a(m)||_0 <= S_x for every column.  Data matrices hold one point
per column (N x M).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .codes import SparseCode
from .errors import (
    DimensionMismatch,
    InfeasibleCodebook,
    LineSearchFailed,
    SingularTransform,
)

SINGULAR_TOL = 1e-10
MAX_HALVINGS = 30
ARMIJO_C = 1e-4


def as_data_matrix(x) -> np.ndarray:
    """Validate and return ``x`` as a finite float64 N x M matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise DimensionMismatch(f"expected a non-empty N x M matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("data matrix contains non-finite values")
    return x


@dataclass(frozen=True)
class TopS:
    """Keep the ``s_x`` largest-magnitude transform coefficients."""

    s_x: int


@dataclass(frozen=True)
class Threshold:
    """Keep coefficients with magnitude at least ``lam``."""

    lam: float


@dataclass(frozen=True, eq=False)
class SparsifyingTransform:
    w: np.ndarray
    policy: TopS | Threshold

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64, copy=True, order="C")
        if w.ndim != 2:
            raise DimensionMismatch(f"W must be 2-D, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("W contains non-finite entries")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        check_full_column_rank(w)
        if isinstance(self.policy, TopS):
            if not 1 <= self.policy.s_x <= self.rows:
                raise ValueError(f"s_x must lie in [1, {self.rows}], got {self.policy.s_x}")
        elif isinstance(self.policy, Threshold):
            if not self.policy.lam >= 0:
                raise ValueError(f"threshold must be nonnegative, got {self.policy.lam}")
        else:
            raise TypeError(f"unknown encoding policy {self.policy!r}")

    @property
    def rows(self) -> int:
        return self.w.shape[0]

    @property
    def cols(self) -> int:
        return self.w.shape[1]

    @property
    def s_x(self) -> int | None:
        return self.policy.s_x if isinstance(self.policy, TopS) else None


@dataclass(frozen=True, eq=False)
class Codebook:
    """Sparse codes of a whole database, one column per point.

    ``support`` marks the positions chosen by the encoder.  It can contain a
    position whose value happens to be exactly zero, which is why it is kept
    separately from ``values != 0``.
    """

    values: np.ndarray
    support: np.ndarray = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64, copy=True)
        if vals.ndim != 2:
            raise DimensionMismatch(f"codebook must be L x M, got shape {vals.shape}")
        sup = vals != 0 if self.support is None else np.array(self.support, dtype=bool)
        if sup.shape != vals.shape:
            raise DimensionMismatch("support mask shape differs from values")
        if np.any(vals[~sup] != 0):
            raise ValueError("nonzero value outside the declared support")
        vals.setflags(write=False)
        sup.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "support", sup)

    @property
    def code_len(self) -> int:
        return self.values.shape[0]

    @property
    def n_points(self) -> int:
        return self.values.shape[1]

    @property
    def columns(self) -> list[SparseCode]:
        return [SparseCode.from_dense(self.values[:, m]) for m in range(self.n_points)]

    def __len__(self):
        return self.n_points

    def __getitem__(self, m) -> SparseCode:
        return SparseCode.from_dense(self.values[:, m])


@dataclass(frozen=True)
class LearningConfig:
    beta1: float = 1.0
    beta2: float = 0.0  # the sparsity term is enforced as a hard constraint
    beta11: float = 1.0
    beta12: float = 1.0
    beta13: float = 1.0
    s_x: int = 8
    max_iters: int = 200
    inner_steps: int = 1
    step_init: float = 1.0
    obj_tol: float = 1e-6
    rng_seed: int = 0

    def __post_init__(self):
        if self.beta1 < 0 or self.beta2 < 0:
            raise ValueError("beta1 and beta2 must be nonnegative")
        if min(self.beta11, self.beta12, self.beta13) <= 0:
            raise ValueError("beta11, beta12, beta13 must be positive")
        if self.max_iters < 1 or self.inner_steps < 1:
            raise ValueError("max_iters and inner_steps must be >= 1")
        if not self.obj_tol > 0 or not self.step_init > 0:
            raise ValueError("obj_tol and step_init must be positive")
        if self.s_x < 1:
            raise ValueError("s_x must be >= 1")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be an unsigned 64-bit integer")


def check_full_column_rank(w):
    sv = np.linalg.svd(w, compute_uv=False)
    if w.shape[0] < w.shape[1] or sv.size == 0 or sv.min() <= SINGULAR_TOL:
        smin = 0.0 if w.shape[0] < w.shape[1] else float(sv.min())
        raise SingularTransform(
            f"W ({w.shape[0]}x{w.shape[1]}) is not full column rank: "
            f"smallest singular value {smin:.3e}"
        )


def omega1(w, cfg: LearningConfig) -> float:
    """Information-loss regulariser on W; finite only for full column rank."""
    w = np.asarray(w, dtype=np.float64)
    check_full_column_rank(w)
    gram = w.T @ w
    ortho = w @ w.T - np.eye(w.shape[0])
    _, logdet = np.linalg.slogdet(gram)
    return (
        np.sum(w * w) / cfg.beta11
        + np.sum(ortho * ortho) / cfg.beta12
        - logdet / cfg.beta13
    )


def _check_shapes(w, a, x):
    if w.shape[1] != x.shape[0]:
        raise DimensionMismatch(f"W is {w.shape} but X has {x.shape[0]} rows")
    if a.shape != (w.shape[0], x.shape[1]):
        raise DimensionMismatch(
            f"A must be {(w.shape[0], x.shape[1])} to match W and X, got {a.shape}"
        )


def _codebook_array(a, s_x, check=True):
    if isinstance(a, Codebook):
        if check:
            counts = a.support.sum(axis=0)
            target = min(s_x, a.code_len)
            bad = np.flatnonzero(counts != target)
            if bad.size:
                raise InfeasibleCodebook(
                    f"column {bad[0]} has {counts[bad[0]]} support entries, expected {target}"
                )
        return a.values
    a = np.asarray(a, dtype=np.float64)
    if check:
        counts = np.count_nonzero(a, axis=0)
        target = min(s_x, a.shape[0])
        bad = np.flatnonzero(counts != target)
        if bad.size:
            raise InfeasibleCodebook(
                f"column {bad[0]} has {counts[bad[0]]} nonzeros, expected {target}"
            )
    return a


def _objective(w, a, x, cfg):
    r = w @ x - a
    return float(np.sum(r * r)) + cfg.beta1 * omega1(w, cfg)


def objective(w, a, x, cfg: LearningConfig) -> float:
    """Sparsification error plus weighted Omega1.

    ``a`` must satisfy the S_x constraint exactly (``min(s_x, L)`` support
    entries per column); the sparsity term then contributes zero.
    """
    w = np.asarray(w, dtype=np.float64)
    x = as_data_matrix(x)
    a = _codebook_array(a, cfg.s_x)
    _check_shapes(w, a, x)
    return _objective(w, a, x, cfg)


def sparse_coding_step(w, x, s_x: int) -> Codebook:
    """Exact l0-constrained minimiser of ||W X - A||_F^2 over A.

    Each column keeps the ``s_x`` largest-magnitude entries of ``W x(m)``;
    ties go to the lower index.
    """
    w = np.asarray(w, dtype=np.float64)
    x = as_data_matrix(x)
    if w.ndim != 2 or w.shape[1] != x.shape[0]:
        raise DimensionMismatch(f"W is {w.shape} but X has {x.shape[0]} rows")
    n_rows = w.shape[0]
    if not 1 <= s_x <= n_rows:
        raise ValueError(f"s_x must lie in [1, {n_rows}], got {s_x}")
    z = w @ x
    order = np.argsort(-np.abs(z), axis=0, kind="stable")
    keep = order[:s_x]
    support = np.zeros(z.shape, dtype=bool)
    np.put_along_axis(support, keep, True, axis=0)
    return Codebook(np.where(support, z, 0.0), support)


def objective_gradient_w(w, a, x, cfg: LearningConfig) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    x = as_data_matrix(x)
    a = _codebook_array(a, cfg.s_x, check=False)
    _check_shapes(w, a, x)
    check_full_column_rank(w)
    grad = 2.0 * (w @ x - a) @ x.T
    if cfg.beta1:
        eye = np.eye(w.shape[0])
        reg = (
            (2.0 / cfg.beta11) * w
            + (4.0 / cfg.beta12) * (w @ w.T - eye) @ w
            - (2.0 / cfg.beta13) * w @ np.linalg.inv(w.T @ w)
        )
        grad = grad + cfg.beta1 * reg
    return grad


def _try_objective(w, a, x, cfg):
    try:
        val = _objective(w, a, x, cfg)
    except SingularTransform:
        return np.inf
    return val if np.isfinite(val) else np.inf


def _descend(w, a, x, cfg, step):
    """Armijo descent on W; returns ``(w, last accepted step or None)``."""
    f0 = _objective(w, a, x, cfg)
    accepted = None
    for _ in range(cfg.inner_steps):
        g = objective_gradient_w(w, a, x, cfg)
        gnorm2 = float(np.sum(g * g))
        if np.sqrt(gnorm2) < 1e-12:
            break
        t = step
        for _ in range(MAX_HALVINGS + 1):
            cand = w - t * g
            f1 = _try_objective(cand, a, x, cfg)
            if f1 <= f0 - ARMIJO_C * t * gnorm2:
                w, f0, accepted = cand, f1, t
                break
            t *= 0.5
        else:
            warnings.warn(
                f"no objective decrease after {MAX_HALVINGS} halvings; W unchanged",
                LineSearchFailed,
                stacklevel=3,
            )
            break
        step = t
    return w, accepted


def transform_update_step(w, a, x, cfg: LearningConfig, step=None) -> np.ndarray:
    """Backtracking gradient descent on W with A held fixed.

    Runs ``cfg.inner_steps`` Armijo steps.  The starting step is
    ``cfg.step_init`` scaled by the data term's curvature bound unless
    ``step`` is given.  If no decrease is found within 30 halvings a
    :class:`LineSearchFailed` warning is issued and the current W is kept.
    """
    w = np.asarray(w, dtype=np.float64)
    x = as_data_matrix(x)
    a = _codebook_array(a, cfg.s_x, check=False)
    _check_shapes(w, a, x)
    check_full_column_rank(w)
    if step is None:
        step = _initial_step(x, cfg)
    return _descend(w, a, x, cfg, step)[0]


def _initial_step(x, cfg):
    return cfg.step_init / (2.0 * np.linalg.norm(x, 2) ** 2 + 1.0)


def init_transform(code_len: int, n_dims: int, rng) -> np.ndarray:
    """Gaussian matrix with orthonormalised columns (W^T W = I_N)."""
    g = rng.standard_normal((code_len, n_dims))
    q, r = np.linalg.qr(g)
    # fix the sign ambiguity of QR so the draw is a deterministic function of g
    return q * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))


@dataclass
class LearningTrace:
    objective: list[float] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0


def learn_transform(x, code_len: int, cfg: LearningConfig):
    """Alternating minimisation from a seeded random start.

    Returns ``(transform, codebook, trace)`` where ``trace.objective`` holds
    the objective after every sparse coding step and is non-increasing.
    """
    x = as_data_matrix(x)
    n_dims = x.shape[0]
    if code_len < n_dims:
        raise SingularTransform(
            f"code length L={code_len} < N={n_dims}: det(W^T W) would vanish"
        )
    if cfg.s_x > code_len:
        raise ValueError(f"s_x={cfg.s_x} exceeds code length {code_len}")

    seq = np.random.SeedSequence(cfg.rng_seed)
    for attempt in range(5):
        rng = np.random.default_rng(seq.spawn(1)[0] if attempt else seq)
        w = init_transform(code_len, n_dims, rng)
        try:
            check_full_column_rank(w)
            break
        except SingularTransform:
            continue
    else:
        raise SingularTransform("initialisation failed after 5 reseeds")

    step = _initial_step(x, cfg)
    trace = LearningTrace()
    a = sparse_coding_step(w, x, cfg.s_x)
    prev = _objective(w, a.values, x, cfg)
    trace.objective.append(prev)
    for it in range(cfg.max_iters):
        w, used = _descend(w, a.values, x, cfg, step)
        # let the step grow back after shrinking; halvings bound any overshoot
        step = 2.0 * used if used is not None else step
        a = sparse_coding_step(w, x, cfg.s_x)
        cur = _objective(w, a.values, x, cfg)
        trace.objective.append(cur)
        trace.iterations = it + 1
        if (prev - cur) < cfg.obj_tol * max(abs(prev), 1e-300):
            trace.converged = True
            break
        prev = cur
    return SparsifyingTransform(w, TopS(cfg.s_x)), a, trace
