"""Constrained channel capacity, the Shannon center and the set of optimal inputs.

The solver is a Frank-Wolfe iteration with away steps over the vertices of
the constraint polytope, with an exact line search (bisection on the
directional derivative). Once the active vertex set settles, a Newton
iteration on the stationarity system of that face drives the duality gap to
machine precision; the downstream geometry (the affine set of optimal inputs
and its tangent space) needs the center to far better than the square root
of the gap that plain Frank-Wolfe delivers.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .divergence import Channel
from .polyhedral import AffineSubspace, Polyhedron, Subspace, InfeasibleError

log = logging.getLogger(__name__)

LINE_SEARCH_STEPS = 60


class ConvergenceError(RuntimeError):
    """The solver hit its iteration cap before certifying the requested gap."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class ClassicalModel:
    """Input-side interface of a discrete memoryless channel.

    The capacity and constant computations only touch a channel through
    this interface; the classical-quantum model in :mod:`caidgeo.quantum`
    provides the same methods.
    """

    def __init__(self, matrix):
        W = np.array(matrix, dtype=float)
        if W.ndim != 2:
            raise ValueError("channel matrix must be 2-D")
        self.W = W
        self.n, self.m = W.shape

    def output(self, p) -> np.ndarray:
        return np.asarray(p, dtype=float) @ self.W

    def divergences(self, q) -> np.ndarray:
        """``D(W(x)||q)`` for every input ``x``."""
        W = self.W
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(W > 0, W / q, 1.0)
            terms = np.where(W > 0, W * np.log(ratio), 0.0)
        out = terms.sum(axis=1)
        bad = np.any((W > 0) & (np.asarray(q)[None, :] <= 0), axis=1)
        out[bad] = np.inf
        return out

    def info(self, p) -> float:
        p = np.asarray(p, dtype=float)
        d = self.divergences(self.output(p))
        mask = p > 0
        return float(max(math.fsum(p[mask] * d[mask]), 0.0))

    def info_batch(self, P) -> np.ndarray:
        """Mutual information of each row of ``P``."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        Q = P @ self.W
        with np.errstate(divide="ignore", invalid="ignore"):
            hq = -np.where(Q > 0, Q * np.log(Q), 0.0).sum(axis=1)
            hw = -np.where(self.W > 0, self.W * np.log(np.where(self.W > 0, self.W, 1.0)), 0.0).sum(axis=1)
        return np.maximum(hq - P @ hw, 0.0)

    def relative_entropy(self, a, b) -> float:
        from .divergence import kl_divergence

        return kl_divergence(a, b)

    def hessian(self, q) -> np.ndarray:
        """``G(x, x') = sum_y W(y|x) W(y|x') / q(y)``; the Hessian of ``I`` is ``-G``."""
        q = np.asarray(q, dtype=float)
        keep = q > 0
        Wk = self.W[:, keep]
        return (Wk / q[keep]) @ Wk.T

    def kernel_matrix(self) -> np.ndarray:
        """Matrix ``K`` with ``vec(q_v) = K v``."""
        return self.W.T

    def center_vector(self, q) -> np.ndarray:
        return np.asarray(q, dtype=float)

    def restrict(self, support) -> "ClassicalModel":
        return ClassicalModel(self.W[list(support)])


def as_model(w):
    if isinstance(w, Channel):
        return ClassicalModel(w.matrix)
    if hasattr(w, "divergences") and hasattr(w, "kernel_matrix"):
        return w
    from .quantum import CQChannel, QuantumModel

    if isinstance(w, CQChannel):
        return QuantumModel(w)
    return ClassicalModel(w)


@dataclass
class CapacitySolution:
    """Result of :func:`solve_capacity`.

    ``maximizer`` is a distribution over all inputs. Every other input-side
    object (``gradient``, ``constraint``, ``caid_polytope``,
    ``affine_subspace``) lives on the support coordinates listed in
    ``support``; :meth:`lift` maps such vectors back.
    """

    capacity: float
    center: np.ndarray
    maximizer: np.ndarray
    caid_polytope: Polyhedron
    affine_subspace: AffineSubspace
    support: tuple
    gradient: np.ndarray
    constraint: Polyhedron
    model: object
    gap: float
    iterations: int
    n_inputs: int
    notes: list = field(default_factory=list)

    @property
    def restricted_maximizer(self) -> np.ndarray:
        return self.maximizer[list(self.support)]

    def lift(self, v) -> np.ndarray:
        out = np.zeros(self.n_inputs)
        out[list(self.support)] = v
        return out

    @property
    def tangent(self) -> Subspace:
        """``T(A) = ker_d cap ker W`` on the support coordinates."""
        return self.affine_subspace.tangent()


def support_set(w, lam: Polyhedron | None = None, tol: float = 1e-9) -> tuple[int, ...]:
    """Inputs that some member of ``lam`` uses with positive probability.

    Each coordinate is maximized over ``lam`` by linear programming.
    """
    model = as_model(w)
    n = model.n
    lam = _inside_simplex(lam, n)
    out = []
    for j in range(n):
        c = np.zeros(n)
        c[j] = -1.0
        res = linprog(c, A_ub=lam.A if lam.A.shape[0] else None, b_ub=lam.b if lam.A.shape[0] else None,
                      A_eq=lam.E if lam.E.shape[0] else None, b_eq=lam.f if lam.E.shape[0] else None,
                      bounds=[(None, None)] * n, method="highs")
        if res.status == 2:
            raise InfeasibleError("constraint set is empty")
        if res.status != 0:
            raise RuntimeError(f"support LP failed: {res.message}")
        if -res.fun > tol:
            out.append(j)
    if not out:
        raise InfeasibleError("constraint set is empty")
    return tuple(out)


def _inside_simplex(lam: Polyhedron | None, n: int) -> Polyhedron:
    simplex = Polyhedron.simplex(n)
    if lam is None:
        return simplex
    if lam.n != n:
        raise ValueError(f"constraint set lives in R^{lam.n}, channel has {n} inputs")
    return lam.intersect(simplex)


def _scores(V: np.ndarray, g: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return np.where(V > 0, V * g[None, :], 0.0).sum(axis=1)


def _line_search(model, P: np.ndarray, d: np.ndarray, gmax: float) -> float:
    def slope(t):
        val = float(np.dot(d, model.divergences(model.output(P + t * d))))
        return val if not math.isnan(val) else -math.inf

    if slope(gmax) >= 0:
        return gmax
    lo, hi = 0.0, gmax
    for _ in range(LINE_SEARCH_STEPS):
        mid = 0.5 * (lo + hi)
        if slope(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _newton_polish(model, V: np.ndarray, alpha: np.ndarray, iters: int = 40) -> np.ndarray:
    """Solve the stationarity system on the face spanned by the active vertices."""
    S = list(np.flatnonzero(alpha > 0))
    a = alpha[S] / alpha[S].sum()
    for _ in range(iters):
        VS = V[S]
        P = a @ VS
        q = model.output(P)
        g = model.divergences(q)
        if not np.all(np.isfinite(g)):
            break
        r = VS @ g
        lam = float(a @ r)
        F = np.concatenate([r - lam, [a.sum() - 1.0]])
        if np.max(np.abs(F)) < 1e-15:
            break
        H = model.hessian(q)
        k = len(S)
        J = np.zeros((k + 1, k + 1))
        J[:k, :k] = -VS @ H @ VS.T
        J[:k, k] = -1.0
        J[k, :k] = 1.0
        rhs = -np.concatenate([r - lam, [a.sum() - 1.0]])
        step = np.linalg.lstsq(J, rhs, rcond=None)[0]
        da = step[:k]
        neg = da < 0
        t = 1.0
        if np.any(a[neg] + da[neg] < 0):
            t = float(np.min(-a[neg] / da[neg]))
        a = a + t * da
        if t < 1.0:
            drop = int(np.argmin(a))
            a[drop] = 0.0
        keep = a > 0
        S = [s for s, kk in zip(S, keep) if kk]
        a = a[keep]
        a = a / a.sum()
    out = np.zeros_like(alpha)
    out[S] = a
    return out


def _gap(model, V: np.ndarray, P: np.ndarray) -> float:
    g = model.divergences(model.output(P))
    return float(np.max(_scores(V, g)) - np.dot(P[P > 0], g[P > 0]))


def _polish(model, V: np.ndarray, alpha: np.ndarray, tol: float):
    """Newton polish, shrinking the active set when the face has no stationary point.

    Near-duplicate vertices (inputs almost as good as the optimal ones) make
    the stationarity system on the full active set inconsistent; dropping the
    lowest-scoring vertex and retrying recovers the optimal face.
    """
    best_a, best_gap = alpha, _gap(model, V, alpha @ V)
    a = alpha.copy()
    for _ in range(int(np.count_nonzero(alpha))):
        cand = _newton_polish(model, V, a)
        gap_c = _gap(model, V, cand @ V)
        if gap_c < best_gap:
            best_a, best_gap = cand, gap_c
        if best_gap <= tol:
            break
        act = np.flatnonzero(cand > 0)
        if act.size <= 1:
            break
        g = model.divergences(model.output(cand @ V))
        sc = _scores(V, g)
        a = cand.copy()
        a[act[np.argmin(sc[act])]] = 0.0
        a /= a.sum()
    return best_a, best_gap


def _frank_wolfe(model, V: np.ndarray, tol: float, max_iter: int):
    nv = V.shape[0]
    alpha = np.full(nv, 1.0 / nv)
    P = alpha @ V
    gap = math.inf
    it = 0
    last_polish = -1
    for it in range(1, max_iter + 1):
        g = model.divergences(model.output(P))
        sc = _scores(V, g)
        ip = float(np.dot(P[P > 0], g[P > 0]))
        s = int(np.argmax(sc))
        gap = float(sc[s] - ip)
        if gap <= tol:
            break
        if gap < 1e-4 and it - last_polish >= 10:
            last_polish = it
            cand, gap_c = _polish(model, V, alpha, tol)
            if gap_c < gap:
                alpha, P, gap = cand, cand @ V, gap_c
                if gap <= tol:
                    break
                continue
        act = np.flatnonzero(alpha > 0)
        a = int(act[np.argmin(sc[act])])
        away_gap = ip - float(sc[a])
        if gap >= away_gap or alpha[a] >= 1.0:
            d = V[s] - P
            gamma = _line_search(model, P, d, 1.0)
            alpha *= 1.0 - gamma
            alpha[s] += gamma
        else:
            d = P - V[a]
            gmax = alpha[a] / (1.0 - alpha[a])
            gamma = _line_search(model, P, d, gmax)
            alpha *= 1.0 + gamma
            alpha[a] -= gamma
            if gamma >= gmax:
                alpha[a] = 0.0
        alpha[alpha < 1e-300] = 0.0
        alpha /= alpha.sum()
        P = alpha @ V
    # a final polish usually squeezes the last digits out
    cand, gap_c = _polish(model, V, alpha, tol)
    if gap_c <= gap:
        alpha, P, gap = cand, cand @ V, gap_c
    return alpha, P, max(gap, 0.0), it


def caid_affine_subspace(model, capacity: float, center, anchor, gradient=None,
                         rtol: float = 1e-10) -> tuple[AffineSubspace, list]:
    """``{V : V.D(W||q) = C, q_V = q}`` rank-reduced around a known optimal input."""
    g = model.divergences(center) if gradient is None else gradient
    K = model.kernel_matrix()
    S = np.vstack([g[None, :], K])
    rhs = np.concatenate([[capacity], model.center_vector(center)])
    aff = AffineSubspace.from_system(S, rhs, anchor=anchor, rtol=rtol)
    notes = []
    sv = np.linalg.svd(S, compute_uv=False)
    gray = sv[(sv > rtol * sv[0]) & (sv < 1e-6 * sv[0])]
    if gray.size:
        notes.append(f"near-degenerate optimal-input system: singular values {gray.tolist()}")
    resid = float(np.max(np.abs(S @ np.asarray(anchor) - rhs)))
    if resid > 1e-8:
        notes.append(f"optimal-input system residual {resid:.3g} at the maximizer")
    return aff, notes


def tangent_of_affine(sub: AffineSubspace, w=None, grad=None) -> Subspace:
    """Tangent space of the optimal-input affine set.

    When ``w`` and ``grad`` are given the result is checked against
    ``ker_d cap ker W`` computed independently.
    """
    T = sub.tangent()
    if w is not None and grad is not None:
        from .polyhedral import channel_kernel, gradient_kernel

        other = gradient_kernel(grad).intersect(channel_kernel(as_model(w) if not isinstance(w, np.ndarray) else w))
        if other.dim != T.dim or (T.dim and np.linalg.norm(other.projector - T.projector) > 1e-7):
            raise RuntimeError("tangent space disagrees with ker_d cap ker W")
    return T


def solve_capacity(w, lam: Polyhedron | None = None, tol: float = 1e-10, max_iter: int = 20000) -> CapacitySolution:
    """Capacity of ``w`` over the input set ``lam`` (the simplex when omitted).

    ``lam`` is always intersected with the probability simplex.

    Raises
    ------
    InfeasibleError
        The constraint set is empty.
    ConvergenceError
        The duality gap is still above ``tol`` after ``max_iter`` iterations.
    """
    model = as_model(w)
    n = model.n
    lam_full = _inside_simplex(lam, n)
    support = support_set(model, lam_full)
    lam_r = lam_full.restrict_coordinates(support)
    model_r = model.restrict(support)
    V = lam_r.vertices
    if not lam_r.is_bounded:
        raise ValueError("constraint set must be bounded")
    alpha, P, gap, iters = _frank_wolfe(model_r, V, tol, max_iter)
    P = np.clip(P, 0.0, None)
    P = P / P.sum()
    q = model_r.output(P)
    g = model_r.divergences(q)
    capacity = model_r.info(P)
    aff, notes = caid_affine_subspace(model_r, capacity, q, P, g)
    pi = lam_r.with_equalities(aff.E, aff.f)
    # vertices scoring just below capacity are hard to tell apart from optimal ones
    deficit = capacity - V @ g
    grey = int(np.sum((deficit > 1e-12) & (deficit < 1e-7)))
    if grey:
        notes = list(notes) + [f"{grey} constraint vertices score within 1e-7 of capacity; "
                               "the optimal set is resolved only to that level"]
    full_max = np.zeros(n)
    full_max[list(support)] = P
    sol = CapacitySolution(
        capacity=capacity, center=q, maximizer=full_max, caid_polytope=pi, affine_subspace=aff,
        support=tuple(support), gradient=g, constraint=lam_r, model=model_r, gap=gap,
        iterations=iters, n_inputs=n, notes=notes,
    )
    if gap > tol:
        raise ConvergenceError(f"duality gap {gap:.3g} above tolerance {tol:.3g} after {iters} iterations", sol)
    return sol


def verify_solution(sol: CapacitySolution, tol: float = 1e-8) -> dict:
    """Check the invariants of a capacity solution and return the residuals."""
    model = sol.model
    V = sol.constraint.vertices
    saddle = float(np.max(V @ sol.gradient) - sol.capacity)
    verts = sol.caid_polytope.vertices
    info_err = max(abs(model.info(v) - sol.capacity) for v in verts) if len(verts) else math.inf
    center_err = max(float(np.abs(model.output(v) - sol.center).sum()) for v in verts) if len(verts) else math.inf
    upper = math.log(len(sol.support))
    return {
        "saddle": saddle,
        "caid_info_error": info_err,
        "caid_center_error": center_err,
        "capacity_in_range": -tol <= sol.capacity <= upper + tol,
        "ok": saddle <= tol and info_err <= tol and center_err <= tol,
    }
