"""Small dense linear-algebra helpers with explicit rank tolerances."""

from __future__ import annotations

import numpy as np

# singular values below RANK_RTOL * (largest) are treated as zero
RANK_RTOL = 1e-10


def _as_2d(m, n: int | None = None) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim == 1:
        m = m.reshape(1, -1) if m.size else np.zeros((0, n or 0))
    if n is not None and m.size == 0:
        m = np.zeros((0, n))
    return m


def numerical_rank(m, rtol: float = RANK_RTOL) -> int:
    m = _as_2d(m)
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def null_space(m, n: int | None = None, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis (as columns) of ``{x : m x = 0}``."""
    m = _as_2d(m, n)
    n = m.shape[1] if n is None else n
    if m.shape[0] == 0:
        return np.eye(n)
    u, s, vt = np.linalg.svd(m, full_matrices=True)
    if s.size == 0 or s[0] == 0:
        return np.eye(n)
    r = int(np.sum(s > rtol * s[0]))
    return vt[r:].T.copy()


def orth(m, n: int | None = None, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis (as columns) of the column space of ``m``."""
    m = np.asarray(m, dtype=float)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.size == 0:
        return np.zeros((n if n is not None else m.shape[0], 0))
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    if s[0] == 0:
        return np.zeros((m.shape[0], 0))
    r = int(np.sum(s > rtol * s[0]))
    return u[:, :r].copy()


def row_space(m, n: int | None = None, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal rows spanning the row space of ``m``."""
    m = _as_2d(m, n)
    if m.shape[0] == 0:
        return np.zeros((0, m.shape[1]))
    return orth(m.T, rtol=rtol).T


def normalize_rows(m) -> tuple[np.ndarray, np.ndarray]:
    """Scale rows to unit norm; returns the scaled matrix and the original norms."""
    m = np.asarray(m, dtype=float)
    norms = np.linalg.norm(m, axis=1) if m.size else np.zeros(m.shape[0])
    safe = np.where(norms > 0, norms, 1.0)
    return m / safe[:, None], norms
