"""Vectorization calculus for symmetric matrices.

All packing and unpacking of symmetric matrices goes through
:func:`hvec_index`, which fixes the column-stacked lower-triangle order
``(a11, a21, ..., an1, a22, ..., an2, ..., ann)``.  Matrices are plain
``numpy.ndarray`` objects in C (row-major) order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SYM_TOL = 1e-12


def half_dim(n: int) -> int:
    """Length of the half-vectorization of an ``n x n`` matrix."""
    return n * (n + 1) // 2


def lifted_dim(n: int) -> int:
    """Length of ``z = [hvec(W); b]`` for ``n`` features."""
    return half_dim(n) + n


def hvec_index(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column indices of the lower triangle in hvec order.

    Entry ``k`` of ``hvec(A)`` is ``A[rows[k], cols[k]]``.
    """
    cols, rows = np.triu_indices(n)
    # triu_indices walks row by row over the upper triangle; swapping the roles
    # gives the lower triangle column by column.
    return rows, cols


@dataclass(frozen=True)
class SymHalfVec:
    """Half-vectorized symmetric matrix."""

    n: int
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float).reshape(-1)
        if data.size != half_dim(self.n):
            raise ValueError(
                f"half-vector of a {self.n}x{self.n} matrix needs {half_dim(self.n)} "
                f"entries, got {data.size}"
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_matrix(cls, A) -> "SymHalfVec":
        A = np.asarray(A, dtype=float)
        return cls(A.shape[0], hvec(A))

    def to_matrix(self) -> np.ndarray:
        return unhvec(self.data, self.n)


def _check_square(A: np.ndarray) -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")


def vec(A) -> np.ndarray:
    """Stack the columns of a square matrix."""
    A = np.asarray(A, dtype=float)
    _check_square(A)
    return A.reshape(-1, order="F").copy()


def unvec(v, n: int) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape((n, n), order="F").copy()


def symmetrize(A, tol: float = SYM_TOL) -> np.ndarray:
    """Average ``A`` with its transpose, refusing visibly asymmetric input.

    The tolerance is relative to the largest entry so that accumulation noise
    in products such as ``x x^T`` is absorbed.
    """
    A = np.asarray(A, dtype=float)
    _check_square(A)
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if A.size and np.max(np.abs(A - A.T)) > tol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    return 0.5 * (A + A.T)


def hvec(A) -> np.ndarray:
    """Half-vectorization of a symmetric matrix."""
    A = symmetrize(A)
    rows, cols = hvec_index(A.shape[0])
    return A[rows, cols].copy()


def unhvec(h, n: int) -> np.ndarray:
    """Inverse of :func:`hvec`: rebuild the full symmetric matrix."""
    h = np.asarray(h, dtype=float).reshape(-1)
    if h.size != half_dim(n):
        raise ValueError(f"expected {half_dim(n)} entries for n={n}, got {h.size}")
    rows, cols = hvec_index(n)
    A = np.zeros((n, n))
    A[rows, cols] = h
    A[cols, rows] = h
    return A


def duplication_matrix(n: int) -> np.ndarray:
    """``D_n`` with ``D_n @ hvec(A) == vec(A)`` for symmetric ``A``."""
    if n < 1:
        raise ValueError("n must be positive")
    rows, cols = hvec_index(n)
    D = np.zeros((n * n, half_dim(n)))
    k = np.arange(half_dim(n))
    # vec position of (i, j) in column-major order is j*n + i
    D[cols * n + rows, k] = 1.0
    D[rows * n + cols, k] = 1.0
    return D


def elimination_matrix(n: int) -> np.ndarray:
    """``L_n`` with ``L_n @ vec(A) == hvec(A)``."""
    if n < 1:
        raise ValueError("n must be positive")
    rows, cols = hvec_index(n)
    L = np.zeros((half_dim(n), n * n))
    L[np.arange(half_dim(n)), cols * n + rows] = 1.0
    return L


def kronecker(A, B) -> np.ndarray:
    """Block matrix ``[a_ij * B]``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    m, n = A.shape
    p, q = B.shape
    out = np.empty((m * p, n * q))
    for i in range(m):
        for j in range(n):
            out[i * p:(i + 1) * p, j * q:(j + 1) * q] = A[i, j] * B
    return out


@dataclass(frozen=True)
class FeatureEmbedding:
    """Quadratic lift of a point: ``r = [s; x]``.

    ``s = D_n' vec(x x') / 2``, i.e. ``x_i^2 / 2`` on the diagonal positions
    and ``x_i x_j`` on the off-diagonal ones, so that
    ``hvec(W)' s = x'Wx / 2`` for every symmetric ``W``.
    """

    s: np.ndarray
    x: np.ndarray

    @property
    def r(self) -> np.ndarray:
        return np.concatenate([self.s, self.x])


def _as_point(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise ValueError("point has non-finite entries")
    return x


def _offdiag_weights(n: int) -> np.ndarray:
    rows, cols = hvec_index(n)
    return np.where(rows == cols, 0.5, 1.0)


def embed_point(x) -> FeatureEmbedding:
    x = _as_point(x)
    s = _offdiag_weights(x.size) * hvec(np.outer(x, x))
    return FeatureEmbedding(s=s, x=x.copy())


def embed_points(X) -> np.ndarray:
    """Row-wise lift of a point table; row ``i`` is ``r_i``.

    Vectorized equivalent of stacking ``embed_point(x).r``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not np.all(np.isfinite(X)):
        raise ValueError("points have non-finite entries")
    n = X.shape[1]
    rows, cols = hvec_index(n)
    S = _offdiag_weights(n) * X[:, rows] * X[:, cols]
    return np.hstack([S, X])


def build_H(x, n: int | None = None) -> np.ndarray:
    """``H = [M | I_n]`` with ``M = (I_n kron x^T) D_n``, so ``H z = W x + b``."""
    x = _as_point(x)
    if n is None:
        n = x.size
    if x.size != n:
        raise ValueError(f"point has dimension {x.size}, expected {n}")
    X_i = kronecker(np.eye(n), x[None, :])
    M = X_i @ duplication_matrix(n)
    return np.hstack([M, np.eye(n)])


def build_G(samples) -> np.ndarray:
    """``G = 2 sum_i H_i^T H_i`` so that ``z^T G z / 2 = sum_i ||W x_i + b||^2``."""
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    if X.shape[0] == 0 or X.size == 0:
        raise ValueError("build_G needs at least one sample")
    n = X.shape[1]
    D = duplication_matrix(n)
    d = lifted_dim(n)
    G = np.zeros((d, d))
    eye = np.eye(n)
    for x in X:
        # H_i built inline: the per-sample matrices are not kept around.
        H = np.empty((n, d))
        H[:, :half_dim(n)] = kronecker(eye, x[None, :]) @ D
        H[:, half_dim(n):] = eye
        G += H.T @ H
    G *= 2.0
    return 0.5 * (G + G.T)


def split_z(z, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Unpack ``z = [hvec(W); b]`` into ``(W, b)``."""
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.size != lifted_dim(n):
        raise ValueError(f"z must have {lifted_dim(n)} entries for n={n}, got {z.size}")
    return unhvec(z[:half_dim(n)], n), z[half_dim(n):].copy()


def pack_z(W, b) -> np.ndarray:
    return np.concatenate([hvec(W), np.asarray(b, dtype=float).reshape(-1)])


def selector_V(n: int) -> np.ndarray:
    """``V = [I | 0]`` picking the ``hvec(W)`` part of ``z``."""
    V = np.zeros((half_dim(n), lifted_dim(n)))
    V[:, :half_dim(n)] = np.eye(half_dim(n))
    return V


def is_positive_definite(G, rel_pivot: float = 1e-10) -> bool:
    """Cholesky test with pivots bounded away from zero.

    A pivot counts as positive only if it exceeds ``rel_pivot`` times the
    largest diagonal entry.
    """
    G = np.asarray(G, dtype=float)
    _check_square(G)
    scale = max(1.0, float(np.max(np.abs(G)))) if G.size else 1.0
    if G.size and np.max(np.abs(G - G.T)) > 1e-10 * scale:
        raise ValueError("is_positive_definite needs a symmetric matrix")
    n = G.shape[0]
    if n == 0:
        return True
    max_diag = float(np.max(np.diag(G)))
    if max_diag <= 0:
        return False
    floor = rel_pivot * max_diag
    L = np.zeros_like(G)
    for j in range(n):
        pivot = G[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > floor:
            return False
        L[j, j] = np.sqrt(pivot)
        L[j + 1:, j] = (G[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return True
