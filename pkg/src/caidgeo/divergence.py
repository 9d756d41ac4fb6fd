"""Finite-alphabet probability objects and information functionals.

All logarithms are natural, so every divergence is reported in nats.
Divergences that are infinite (because absolute continuity fails) are
returned as ``math.inf`` rather than raised as errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

NORMALIZATION_TOL = 1e-12

__all__ = [
    "Distribution",
    "Channel",
    "as_distribution",
    "kl_divergence",
    "total_variation",
    "chi_alpha",
    "output_distribution",
    "mutual_information",
    "topsoe_expansion",
    "divergence_vector",
]


def as_distribution(weights, tol: float = NORMALIZATION_TOL) -> np.ndarray:
    """Validate ``weights`` as a probability vector and return it as a float array.

    Vectors that fail the checks are rejected; nothing is renormalized.
    """
    p = np.asarray(weights, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("a distribution must be a non-empty 1-D vector")
    if not np.all(np.isfinite(p)):
        raise ValueError("distribution has non-finite entries")
    if np.any(p < 0):
        raise ValueError("distribution has negative entries")
    total = math.fsum(p)
    if abs(total - 1.0) > tol:
        raise ValueError(f"distribution sums to {total!r}, not 1 within {tol:g}")
    return p


@dataclass(frozen=True)
class Distribution:
    """A validated probability vector.

    Instances behave like arrays under ``np.asarray``.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = as_distribution(self.weights)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __array__(self, dtype=None, copy=None):
        return self.weights if dtype is None else self.weights.astype(dtype)

    def __len__(self):
        return self.weights.size


@dataclass(frozen=True)
class Channel:
    """A row-stochastic matrix with row ``x`` equal to the output law ``W(x)``.

    Parameters
    ----------
    matrix : array_like, shape (n, m)
        Transition probabilities. Each row must be a distribution.
    input_labels, output_labels : sequence of str, optional
        Display names. Defaults are ``"0", "1", ...``.
    """

    matrix: np.ndarray
    input_labels: tuple = field(default=())
    output_labels: tuple = field(default=())

    def __post_init__(self):
        w = np.array(self.matrix, dtype=float)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise ValueError("channel matrix must be 2-D with at least one row and column")
        for x, row in enumerate(w):
            try:
                as_distribution(row)
            except ValueError as exc:
                raise ValueError(f"row {x} of the channel: {exc}") from None
        w.setflags(write=False)
        object.__setattr__(self, "matrix", w)
        n, m = w.shape
        ins = tuple(self.input_labels) or tuple(str(i) for i in range(n))
        outs = tuple(self.output_labels) or tuple(str(j) for j in range(m))
        if len(ins) != n or len(outs) != m:
            raise ValueError("label counts do not match the channel shape")
        object.__setattr__(self, "input_labels", ins)
        object.__setattr__(self, "output_labels", outs)

    @property
    def n_inputs(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.matrix.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def restrict_inputs(self, support: Sequence[int]) -> "Channel":
        idx = list(support)
        return Channel(self.matrix[idx], tuple(self.input_labels[i] for i in idx), self.output_labels)


def _matrix(w) -> np.ndarray:
    if isinstance(w, Channel):
        return w.matrix
    return np.asarray(w, dtype=float)


def _pair(w, q) -> tuple[np.ndarray, np.ndarray]:
    w = np.asarray(w, dtype=float)
    q = np.asarray(q, dtype=float)
    if w.shape != q.shape:
        raise ValueError(f"dimension mismatch: {w.shape} vs {q.shape}")
    return w, q


def kl_divergence(w, q) -> float:
    """Kullback-Leibler divergence ``D(w||q)`` in nats.

    ``w`` may be any nonnegative measure on the alphabet of ``q``. Terms with
    ``w(y) = 0`` contribute nothing; a term with ``w(y) > 0 = q(y)`` makes the
    result infinite.

    Examples
    --------
    >>> round(kl_divergence([0.75, 0.25], [0.5, 0.5]), 7)
    0.1307688
    """
    w, q = _pair(w, q)
    if np.any(w < 0):
        raise ValueError("first argument must be nonnegative")
    pos = w > 0
    if np.any(q[pos] <= 0):
        return math.inf
    wp, qp = w[pos], q[pos]
    # log1p keeps full relative accuracy when w is close to q
    terms = wp * np.log1p((wp - qp) / qp)
    return float(math.fsum(terms))


def total_variation(mu) -> float:
    """The l1 norm of a finite signed measure."""
    return float(math.fsum(np.abs(np.asarray(mu, dtype=float))))


def chi_alpha(w, q, alpha: float) -> float:
    """Vajda's chi^alpha divergence, ``sum_y q(y) |w(y)/q(y) - 1|^alpha``.

    Infinite when ``w`` puts mass where ``q`` does not.
    """
    if not alpha > 1:
        raise ValueError("alpha must exceed 1")
    w, q = _pair(w, q)
    pos = q > 0
    if np.any(w[~pos] != 0):
        return math.inf
    qp = q[pos]
    d = np.abs(w[pos] - qp)
    return float(math.fsum(d ** alpha / qp ** (alpha - 1)))


def output_distribution(v, w) -> np.ndarray:
    """The output measure ``q_v = sum_x v(x) W(x)`` induced by an input vector."""
    v = np.asarray(v, dtype=float)
    mat = _matrix(w)
    if v.shape != (mat.shape[0],):
        raise ValueError(f"input vector has shape {v.shape}, channel has {mat.shape[0]} inputs")
    return v @ mat


def divergence_vector(w, q) -> np.ndarray:
    """Vector of ``D(W(x)||q)`` over the channel rows."""
    mat = _matrix(w)
    return np.array([kl_divergence(row, q) for row in mat])


def mutual_information(p, w) -> float:
    """Mutual information ``I(p; W) = sum_x p(x) D(W(x)||q_p)``."""
    p = np.asarray(p, dtype=float)
    mat = _matrix(w)
    q = output_distribution(p, mat)
    terms = []
    for px, row in zip(p, mat):
        if px > 0:
            terms.append(px * kl_divergence(row, q))
    total = math.fsum(terms)
    return float(max(total, 0.0))


def topsoe_expansion(p, pbar, c: float, q, w) -> tuple[float, float]:
    """Split ``I(p;W)`` around a capacity-achieving input ``pbar``.

    Returns ``(linear_term, kl_term)`` with
    ``linear_term = (p - pbar)^T D(W||q)`` and ``kl_term = D(q_p||q)``, so that
    ``I(p;W) = c + linear_term - kl_term``.

    Raises
    ------
    ValueError
        If the reconstruction misses ``I(p;W)`` by more than 1e-8, which means
        ``c``, ``q`` or ``pbar`` are not a consistent capacity solution.
    """
    p = np.asarray(p, dtype=float)
    pbar = np.asarray(pbar, dtype=float)
    mat = _matrix(w)
    grad = divergence_vector(mat, q)
    diff = p - pbar
    mask = diff != 0
    linear = float(math.fsum(diff[mask] * grad[mask])) if np.any(mask) else 0.0
    kl = kl_divergence(output_distribution(p, mat), q)
    residual = abs(mutual_information(p, mat) - (c + linear - kl))
    if not residual <= 1e-8:
        raise ValueError(f"inconsistent capacity data: reconstruction residual {residual:.3g}")
    return linear, kl
