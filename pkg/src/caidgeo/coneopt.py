"""Extremal problems over unit vectors of a polyhedral cone.

The optimum of a quadratic form over ``{u in K : |u| = 1}`` sits in the
relative interior of some face ``F`` of ``K``, where it is an extreme
eigenvector of the form compressed to ``span(F)``. Visiting every face and
keeping the eigenvectors that actually lie in ``K`` therefore gives the exact
optimum. When the face lattice is too large the functions fall back to
multi-start projected gradient and mark the result as uncertified.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .polyhedral import ConvexCone, FaceEnumerationOverflow, FACE_CAP, _double_description

EIG_TIE = 1e-10


def _nonzero_member(K: ConvexCone, E: np.ndarray) -> np.ndarray | None:
    """A unit vector of ``K`` inside ``span(E)`` (columns), or None."""
    if E.shape[1] == 1:
        e = E[:, 0]
        for cand in (e, -e):
            if K.contains(cand, 1e-9):
                return cand / np.linalg.norm(cand)
        return None
    A, Eq = K.halfspaces
    dd = _double_description(A @ E, Eq @ E, E.shape[1])
    if dd.lineality.shape[0]:
        u = E @ dd.lineality[0]
    elif dd.rays.shape[0]:
        u = E @ dd.rays[0]
    else:
        return None
    return u / np.linalg.norm(u)


def _rayleigh_by_faces(K: ConvexCone, Q: np.ndarray, sign: int, cap: int):
    best_val, best_u = None, None
    scale = max(1.0, float(np.abs(Q).max()))
    for face in K.faces(cap):
        B = face.basis
        if B.shape[1] == 0:
            continue
        w, V = np.linalg.eigh(B.T @ Q @ B)
        lam = w[-1] if sign > 0 else w[0]
        pick = np.abs(w - lam) <= EIG_TIE * scale
        u = _nonzero_member(K, B @ V[:, pick])
        if u is None:
            continue
        val = float(u @ Q @ u)
        if best_val is None or sign * val > sign * best_val:
            best_val, best_u = val, u
    return best_val, best_u


def _rayleigh_multistart(K: ConvexCone, Q: np.ndarray, sign: int, iters: int = 2000):
    R, L = K.generators
    starts = [r for r in R] + [l for l in L] + [-l for l in L]
    for r in list(starts):
        pr = K.project(sign * Q @ r)
        if np.linalg.norm(pr) > 1e-12:
            starts.append(pr)
    step = 0.5 / max(1e-12, float(np.linalg.norm(Q, 2)))
    best_val, best_u = None, None
    for u in starts:
        u = u / np.linalg.norm(u)
        for _ in range(iters):
            nxt = K.project(u + sign * step * (Q @ u))
            nn = np.linalg.norm(nxt)
            if nn <= 1e-14:
                break
            nxt /= nn
            if np.linalg.norm(nxt - u) < 1e-13:
                u = nxt
                break
            u = nxt
        val = float(u @ Q @ u)
        if best_val is None or sign * val > sign * best_val:
            best_val, best_u = val, u
    return best_val, best_u


def _rayleigh(K: ConvexCone, Q, sign: int, cap: int):
    Q = np.asarray(Q, dtype=float)
    Q = 0.5 * (Q + Q.T)
    if K.is_trivial:
        raise ValueError("the cone is {0}; there are no unit vectors")
    try:
        val, u = _rayleigh_by_faces(K, Q, sign, cap)
        meta = {"method": "face-eigen", "certified": True}
    except FaceEnumerationOverflow:
        val, u = _rayleigh_multistart(K, Q, sign)
        meta = {"method": "multistart-projected-gradient", "certified": False}
    if val is None:
        val, u = _rayleigh_multistart(K, Q, sign)
        meta = {"method": "multistart-projected-gradient", "certified": False}
    return val, u, meta


def max_rayleigh_on_cone(K: ConvexCone, Q, cap: int = FACE_CAP):
    """``max u^T Q u`` over unit ``u`` in ``K``; returns ``(value, argmax, meta)``."""
    return _rayleigh(K, Q, +1, cap)


def min_rayleigh_on_cone(K: ConvexCone, Q, cap: int = FACE_CAP):
    """``min u^T Q u`` over unit ``u`` in ``K``; returns ``(value, argmin, meta)``."""
    return _rayleigh(K, Q, -1, cap)


def min_linear_on_cone(K: ConvexCone, h) -> tuple[float, np.ndarray]:
    """``min h.v`` over unit ``v`` in ``K`` (exact).

    If some direction of ``K`` makes ``h.v`` negative the answer is
    ``-|proj_K(-h)|``. Otherwise ``v -> h.v/|v|`` is quasi-concave on ``K``,
    so the minimum sits on an extreme ray, or is 0 along the lineality.
    """
    h = np.asarray(h, dtype=float)
    if K.is_trivial:
        raise ValueError("the cone is {0}; there are no unit vectors")
    p = K.project(-h)
    npn = float(np.linalg.norm(p))
    if npn > 1e-12 * max(1.0, float(np.linalg.norm(h))):
        return -npn, p / npn
    R, L = K.generators
    if L.shape[0]:
        return 0.0, L[0].copy()
    vals = R @ h
    j = int(np.argmin(vals))
    return float(max(vals[j], 0.0)), R[j].copy()


def max_cosine_between_cones(U: ConvexCone, V: ConvexCone, cap: int = FACE_CAP):
    """``max u.w`` over unit ``u`` in ``U`` and unit ``w`` in ``V``."""
    best = None
    for F in U.faces(cap):
        if F.basis.shape[1] == 0:
            continue
        for G in V.faces(cap):
            if G.basis.shape[1] == 0:
                continue
            a, s, bt = np.linalg.svd(F.basis.T @ G.basis)
            for i in range(s.size):
                if s[i] < s[0] - EIG_TIE:
                    break
                u = F.basis @ a[:, i]
                w = G.basis @ bt[i]
                for sg in (1.0, -1.0):
                    if U.contains(sg * u, 1e-9) and V.contains(sg * w, 1e-9):
                        if best is None or s[i] > best:
                            best = float(s[i])
    if best is not None and best > 0:
        return best, {"method": "face-svd", "certified": True}
    # no positive alignment: the maximum is attained on extreme rays or is 0 via a lineality
    RU, LU = U.generators
    RV, LV = V.generators
    if LU.shape[0] or LV.shape[0]:
        return 0.0, {"method": "lineality", "certified": True}
    vals = RU @ RV.T
    return float(vals.max()), {"method": "extreme-rays", "certified": True}


# ---------------------------------------------------------------------------
# l1 over a sphere


def min_l1_ratio(N, cap: int = 200_000, starts: int = 24, seed: int = 0):
    """``min |N c|_1 / |c|_2`` over nonzero ``c``.

    Exact when the number of (k-1)-row subsets of ``N`` is at most ``cap``:
    the l1 unit ball is a polytope whose vertices lie on lines cut out by
    k-1 independent rows. Larger problems use successive linearization
    (maximize ``u.c`` over the l1 ball, repeat from the maximizer) from
    several starts.

    Returns ``(value, argmin_unit_vector, meta)``.
    """
    N = np.asarray(N, dtype=float)
    m, k = N.shape
    if k == 0:
        raise ValueError("empty domain")
    if k == 1:
        return float(np.abs(N[:, 0]).sum()), np.ones(1), {"method": "exact", "certified": True}
    s = np.linalg.svd(N, compute_uv=False)
    if s[-1] <= 1e-12 * max(1.0, s[0]):
        vt = np.linalg.svd(N)[2]
        return 0.0, vt[-1], {"method": "rank-deficient", "certified": True}
    count = math.comb(m, k - 1)
    if count <= cap:
        best, arg = math.inf, None
        combos = np.array(list(itertools.combinations(range(m), k - 1)), dtype=int)
        for chunk in np.array_split(combos, max(1, len(combos) // 20000)):
            sub = N[chunk]  # (c, k-1, k)
            _, sv, vt = np.linalg.svd(sub)
            c = vt[:, -1, :]
            ok = sv[:, -1] > 1e-12 * np.maximum(1.0, sv[:, 0])
            if not np.any(ok):
                continue
            vals = np.abs(c[ok] @ N.T).sum(axis=1)
            j = int(np.argmin(vals))
            if vals[j] < best:
                best, arg = float(vals[j]), c[ok][j]
        return best, arg, {"method": "exact-vertex-enumeration", "certified": True}
    rng = np.random.default_rng(seed)
    vt = np.linalg.svd(N)[2]
    inits = [vt[-i] for i in range(1, min(k, 4) + 1)]
    inits += [rng.standard_normal(k) for _ in range(starts)]
    best, arg = math.inf, None
    for u in inits:
        u = u / np.linalg.norm(u)
        for _ in range(60):
            c = _l1_ball_lp(N, u)
            c_n = np.linalg.norm(c)
            if c_n == 0:
                break
            nu = c / c_n
            if np.linalg.norm(nu - u) < 1e-12:
                u = nu
                break
            u = nu
        val = float(np.abs(N @ u).sum())
        if val < best:
            best, arg = val, u
    return best, arg, {"method": "successive-lp-multistart", "certified": False,
                       "lower_bound": float(s[-1])}


def _l1_ball_lp(N: np.ndarray, u: np.ndarray) -> np.ndarray:
    m, k = N.shape
    c = np.concatenate([-u, np.zeros(m)])
    I = sparse.identity(m, format="csr")
    Ns = sparse.csr_matrix(N)
    ones = sparse.csr_matrix(np.concatenate([np.zeros(k), np.ones(m)])[None])
    A = sparse.vstack([sparse.hstack([Ns, -I]), sparse.hstack([-Ns, -I]), ones], format="csr")
    b = np.concatenate([np.zeros(2 * m), [1.0]])
    res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * k + [(0, None)] * m, method="highs")
    if res.status != 0:
        return np.zeros(k)
    return res.x[:k]
