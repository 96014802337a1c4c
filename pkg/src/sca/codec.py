"""Encoder, decoder and purification.

The encoder is a learned linear map followed by an elementwise
nonlinearity (top-S selection or hard thresholding).  The decoder is an
N x L map ``R`` fitted either as an orthonormal Procrustes solution or as the
ridge pseudo-inverse of ``W``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codes import SparseCode, TernaryCode
from .errors import DimensionMismatch, ShapeUnsupported, SingularSystem
from .transform import Codebook, SparsifyingTransform, Threshold, TopS, as_data_matrix

ORTHONORMAL = "orthonormal"
RIDGE = "ridge"


def _project(t: SparsifyingTransform, x):
    # contiguous copy: BLAS rounding can depend on the input stride, and codes
    # must be bit-identical however the caller sliced the vector
    x = np.ascontiguousarray(x, dtype=np.float64).reshape(-1)
    if x.size != t.cols:
        raise DimensionMismatch(f"expected a vector of length {t.cols}, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input vector contains non-finite values")
    return t.w @ x


def _top_indices(z, s):
    # stable sort on -|z|: equal magnitudes keep ascending index order
    order = np.argsort(-np.abs(z), kind="stable")
    order = order[: min(s, z.size)]
    order = order[z[order] != 0]
    return np.sort(order)


def encode(t: SparsifyingTransform, x) -> SparseCode:
    z = _project(t, x)
    if isinstance(t.policy, TopS):
        idx = _top_indices(z, t.policy.s_x)
    else:
        idx = np.flatnonzero((np.abs(z) >= t.policy.lam) & (z != 0))
    return SparseCode(z.size, idx, z[idx])


def encode_ternary(t: SparsifyingTransform, x) -> TernaryCode:
    """Sign of the top-S coefficients.

    Coefficients that are exactly zero carry no sign and are never kept, so
    the code can be shorter than S_x when ``W x`` has fewer nonzeros.
    """
    if not isinstance(t.policy, TopS):
        raise ValueError("ternary encoding requires a top-S policy")
    z = _project(t, x)
    idx = _top_indices(z, t.policy.s_x)
    return TernaryCode(z.size, idx, np.sign(z[idx]))


def encode_matrix(t: SparsifyingTransform, x, ternary=False) -> list[SparseCode]:
    x = as_data_matrix(x)
    fn = encode_ternary if ternary else encode
    return [fn(t, x[:, m]) for m in range(x.shape[1])]


def codes_to_dense(codes, length=None) -> np.ndarray:
    """Stack codes as columns of a dense L x M array."""
    codes = list(codes)
    if length is None:
        if not codes:
            raise ValueError("cannot infer code length from an empty list")
        length = codes[0].length
    out = np.zeros((length, len(codes)))
    for m, c in enumerate(codes):
        if c.length != length:
            raise DimensionMismatch(f"code {m} has length {c.length}, expected {length}")
        out[c.indices, m] = c.values
    return out


@dataclass(frozen=True, eq=False)
class Decoder:
    r: np.ndarray
    mode: str
    beta_r: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        r = np.array(self.r, dtype=np.float64, copy=True, order="C")
        if r.ndim != 2:
            raise DimensionMismatch(f"R must be N x L, got shape {r.shape}")
        if self.mode not in (ORTHONORMAL, RIDGE):
            raise ValueError(f"unknown decoder mode {self.mode!r}")
        r.setflags(write=False)
        object.__setattr__(self, "r", r)

    @property
    def n_dims(self) -> int:
        return self.r.shape[0]

    @property
    def code_len(self) -> int:
        return self.r.shape[1]


def ridge_inverse(w, beta: float) -> np.ndarray:
    """C = (W^T W + beta I)^{-1} W^T."""
    w = np.asarray(w, dtype=np.float64)
    sys = w.T @ w + beta * np.eye(w.shape[1])
    if np.linalg.cond(sys) > 1e12:
        raise SingularSystem(f"W^T W + {beta} I is numerically singular")
    return np.linalg.solve(sys, w.T)


def learn_decoder(w, a, x, beta_r: float = 1.0, beta: float = 0.0, mode: str | None = None) -> Decoder:
    """Fit the reconstruction map R (N x L).

    Orthonormal mode maximises ``tr[(A X^T + beta_r C^T) R]`` subject to
    ``R^T R = I`` via the thin SVD ``G = U S V^T``, giving ``R = V U^T``.
    Ridge mode returns ``C`` itself.  ``mode=None`` picks orthonormal when
    ``L <= N`` and ridge otherwise.
    """
    if isinstance(w, SparsifyingTransform):
        w = w.w
    w = np.asarray(w, dtype=np.float64)
    x = as_data_matrix(x)
    a = a.values if isinstance(a, Codebook) else np.asarray(a, dtype=np.float64)
    n_rows, n_dims = w.shape
    if x.shape[0] != n_dims or a.shape != (n_rows, x.shape[1]):
        raise DimensionMismatch(f"shapes W{w.shape}, A{a.shape}, X{x.shape} are inconsistent")
    if mode is None:
        mode = ORTHONORMAL if n_rows <= n_dims else RIDGE
    if mode == ORTHONORMAL and n_rows > n_dims:
        raise ShapeUnsupported(f"R^T R = I_L is infeasible for L={n_rows} > N={n_dims}")
    if beta < 0 or beta_r < 0:
        raise ValueError("beta and beta_r must be nonnegative")

    c = ridge_inverse(w, beta)
    if mode == RIDGE:
        return Decoder(c, RIDGE, beta_r, beta)
    g = a @ x.T + beta_r * c.T
    u, _, vt = np.linalg.svd(g, full_matrices=False)
    return Decoder(vt.T @ u.T, ORTHONORMAL, beta_r, beta)


def decode(d: Decoder, code: SparseCode) -> np.ndarray:
    if code.length != d.code_len:
        raise DimensionMismatch(f"code length {code.length} != decoder length {d.code_len}")
    return d.r[:, code.indices] @ code.values


def decode_many(d: Decoder, codes) -> np.ndarray:
    """Decode a list of codes into an N x M matrix."""
    return d.r @ codes_to_dense(codes, d.code_len)


def rescale(xhat, x) -> np.ndarray:
    """Least-squares gain alpha = <xhat, x>/<xhat, xhat> applied to xhat.

    Opt-in evaluation aid for ternary codes, whose unit values lose scale.
    """
    xhat = np.asarray(xhat, dtype=np.float64)
    den = float(xhat @ xhat)
    return xhat if den == 0 else xhat * (float(xhat @ np.asarray(x)) / den)


def purify(p: SparseCode, key_support) -> SparseCode:
    """Restrict ``p`` to the indices in ``key_support``."""
    key = np.fromiter((int(k) for k in key_support), dtype=np.int64)
    keep = np.isin(p.indices, key)
    cls = TernaryCode if isinstance(p, TernaryCode) else SparseCode
    return cls(p.length, p.indices[keep], p.values[keep])
