"""Polyhedral sets, cones, projections and the pushover construction.

Cones carry a half-space form ``{v : A v <= 0, E v = 0}`` and a generator
form ``cone(rays) + span(lineality)``; whichever is missing is produced on
demand by the double description method. Polytope faces come from the
ray/constraint incidence of the homogenized cone.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.linalg import qr
from scipy.optimize import linprog, lsq_linear

from .linalg import RANK_RTOL, normalize_rows, null_space, orth, row_space

log = logging.getLogger(__name__)

TOL_ACTIVE = 1e-9
INCIDENCE_TOL = 1e-9
KKT_TOL = 1e-10
FACE_CAP = 10_000

__all__ = [
    "Subspace",
    "AffineSubspace",
    "ConvexCone",
    "Polyhedron",
    "PolytopeFace",
    "UnionMember",
    "UnionOfCones",
    "FaceEnumerationOverflow",
    "InfeasibleError",
    "active_constraints",
    "tangent_cone",
    "normal_cone",
    "project_point",
    "project_batch",
    "polar_cone",
    "moreau_decompose",
    "angle_between_cones",
    "pushover_cone",
    "pushover_union",
    "channel_kernel",
    "gradient_kernel",
]


class FaceEnumerationOverflow(RuntimeError):
    """More faces than the configured cap."""


class InfeasibleError(ValueError):
    """A point or set violates the feasibility requirements of an operation."""


# ---------------------------------------------------------------------------
# subspaces


@dataclass(frozen=True)
class Subspace:
    """A linear subspace of R^n stored as an orthonormal basis (columns)."""

    basis: np.ndarray
    ambient: int

    def __post_init__(self):
        b = np.array(self.basis, dtype=float)
        b = np.zeros((self.ambient, 0)) if b.size == 0 else b.reshape(self.ambient, -1)
        if b.shape[1]:
            gram = b.T @ b
            if not np.allclose(gram, np.eye(b.shape[1]), atol=1e-10):
                b = orth(b, self.ambient)
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @classmethod
    def span(cls, vectors, n: int) -> "Subspace":
        """Span of the given vectors (rows of ``vectors``)."""
        v = np.asarray(vectors, dtype=float).reshape(-1, n)
        return cls(orth(v.T, n), n)

    @classmethod
    def kernel(cls, m, n: int) -> "Subspace":
        return cls(null_space(m, n), n)

    @classmethod
    def full(cls, n: int) -> "Subspace":
        return cls(np.eye(n), n)

    @classmethod
    def zero(cls, n: int) -> "Subspace":
        return cls(np.zeros((n, 0)), n)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def project(self, v) -> np.ndarray:
        return self.basis @ (self.basis.T @ np.asarray(v, dtype=float))

    def contains(self, v, tol: float = 1e-9) -> bool:
        v = np.asarray(v, dtype=float)
        return bool(np.linalg.norm(v - self.project(v)) <= tol * max(1.0, np.linalg.norm(v)))

    def complement(self) -> "Subspace":
        if self.dim == 0:
            return Subspace.full(self.ambient)
        return Subspace(null_space(self.basis.T, self.ambient), self.ambient)

    def intersect(self, other: "Subspace") -> "Subspace":
        n = self.ambient
        stacked = np.vstack([np.eye(n) - self.projector, np.eye(n) - other.projector])
        return Subspace(null_space(stacked, n), n)

    def as_cone(self) -> "ConvexCone":
        return ConvexCone.from_generators(np.zeros((0, self.ambient)), self.basis.T, n=self.ambient)


@dataclass(frozen=True)
class AffineSubspace:
    """``{x : E x = f}`` with ``E`` reduced to orthonormal rows."""

    E: np.ndarray
    f: np.ndarray

    @classmethod
    def from_system(cls, E, f, anchor=None, rtol: float = RANK_RTOL) -> "AffineSubspace":
        """Rank-reduce ``E x = f``.

        When ``anchor`` is given the right-hand side is taken from it, which
        keeps the reduced system exactly consistent with a known member.
        """
        E = np.atleast_2d(np.asarray(E, dtype=float))
        f = np.asarray(f, dtype=float).reshape(-1)
        u, s, vt = np.linalg.svd(E, full_matrices=False)
        r = int(np.sum(s > rtol * s[0])) if s.size and s[0] > 0 else 0
        Er = vt[:r]
        if anchor is not None:
            fr = Er @ np.asarray(anchor, dtype=float)
        else:
            fr = (u[:, :r].T @ f) / s[:r]
        return cls(Er, fr)

    @property
    def ambient(self) -> int:
        return self.E.shape[1]

    def tangent(self) -> Subspace:
        return Subspace.kernel(self.E, self.ambient)

    def normal(self) -> Subspace:
        return Subspace.span(self.E, self.ambient)

    def contains(self, x, tol: float = 1e-9) -> bool:
        return bool(np.all(np.abs(self.E @ np.asarray(x) - self.f) <= tol))


# ---------------------------------------------------------------------------
# double description


@dataclass
class _DDResult:
    rays: np.ndarray  # (r, n) unit rows
    lineality: np.ndarray  # (l, n) orthonormal rows
    incidence: np.ndarray  # (k, r) bool, row i of A tight at ray j


def _double_description(A: np.ndarray, E: np.ndarray, n: int, tol: float = INCIDENCE_TOL) -> _DDResult:
    """Extreme rays and lineality of ``{x : A x <= 0, E x = 0}``."""
    A = np.asarray(A, dtype=float).reshape(-1, n)
    E = np.asarray(E, dtype=float).reshape(-1, n)
    k = A.shape[0]
    # rows that are float dust (for instance after compressing to a subspace) carry no constraint
    E = E[np.linalg.norm(E, axis=1) > 1e-12]
    N = null_space(E, n)  # x = N y
    if N.shape[1] == 0:
        return _DDResult(np.zeros((0, n)), np.zeros((0, n)), np.ones((k, 0), dtype=bool))
    Ay = A @ N
    Ay[np.linalg.norm(Ay, axis=1) <= 1e-12 * np.maximum(1.0, np.linalg.norm(A, axis=1))] = 0.0
    L = null_space(Ay, N.shape[1])  # lineality in y coordinates
    Q = orth(Ay.T, N.shape[1])  # complement of the lineality
    d = Q.shape[1]
    lineality = (N @ L).T
    if d == 0:
        return _DDResult(np.zeros((0, n)), lineality, np.ones((k, 0), dtype=bool))
    Az, norms = normalize_rows(Ay @ Q)
    live = np.flatnonzero(norms > 1e-12 * max(1.0, norms.max()))
    piv = qr(Az[live].T, pivoting=True)[2][:d]
    first = live[piv]
    A0 = Az[first]
    R0 = -np.linalg.solve(A0, np.eye(d)).T  # rows are rays
    R0 /= np.linalg.norm(R0, axis=1)[:, None]
    rays = [r for r in R0]
    all_first = 0
    for i in first:
        all_first |= 1 << int(i)
    zsets = [all_first & ~(1 << int(first[j])) for j in range(d)]
    processed = set(int(i) for i in first)

    for i in live:
        i = int(i)
        if i in processed:
            continue
        processed.add(i)
        a = Az[i]
        if not rays:
            continue
        R = np.array(rays)
        s = R @ a
        pos = np.flatnonzero(s > tol)
        neg = np.flatnonzero(s < -tol)
        zer = np.flatnonzero(np.abs(s) <= tol)
        bit = 1 << i
        new_rays = [rays[j] for j in neg] + [rays[j] for j in zer]
        new_z = [zsets[j] for j in neg] + [zsets[j] | bit for j in zer]
        if len(pos) and len(neg):
            for p in pos:
                zp = zsets[p]
                for q_ in neg:
                    common = zp & zsets[q_]
                    if bin(common).count("1") < d - 2:
                        continue
                    adjacent = True
                    for r in range(len(rays)):
                        if r != p and r != q_ and (common & zsets[r]) == common:
                            adjacent = False
                            break
                    if not adjacent:
                        continue
                    v = s[p] * rays[q_] - s[q_] * rays[p]
                    nv = np.linalg.norm(v)
                    if nv <= 1e-14:
                        continue
                    new_rays.append(v / nv)
                    new_z.append(common | bit)
        rays, zsets = new_rays, new_z

    dead = [int(i) for i in range(k) if i not in set(int(j) for j in live)]
    dead_bits = 0
    for i in dead:
        dead_bits |= 1 << i
    x_rays = np.array([N @ (Q @ r) for r in rays]).reshape(-1, n)
    if len(x_rays):
        x_rays /= np.linalg.norm(x_rays, axis=1)[:, None]
    inc = np.zeros((k, len(rays)), dtype=bool)
    for j, z in enumerate(zsets):
        z |= dead_bits
        for i in range(k):
            if (z >> i) & 1:
                inc[i, j] = True
    return _DDResult(x_rays, lineality, inc)


def _enumerate_closed_sets(incidence: np.ndarray, cap: int = FACE_CAP) -> list[frozenset]:
    """All closed ray sets (faces) of a pointed cone from its incidence matrix.

    ``incidence[i, j]`` says constraint ``i`` is tight at ray ``j``. The
    empty set (the apex) is included.
    """
    k, r = incidence.shape
    full = frozenset(range(r))
    tight_at = [frozenset(np.flatnonzero(incidence[i])) for i in range(k)]

    def closure(s: frozenset) -> frozenset:
        if not s:
            return s
        idx = sorted(s)
        rows = np.flatnonzero(incidence[:, idx].all(axis=1))
        if rows.size == 0:
            return full
        return frozenset(np.flatnonzero(incidence[rows].all(axis=0)))

    start = closure(full) if r else full
    seen = {start}
    queue = [start]
    while queue:
        s = queue.pop()
        for i in range(k):
            if s <= tight_at[i]:
                continue
            t = closure(s & tight_at[i])
            if t not in seen:
                seen.add(t)
                if len(seen) > cap:
                    raise FaceEnumerationOverflow(f"more than {cap} faces")
                queue.append(t)
    seen.add(frozenset())
    return sorted(seen, key=lambda f: (len(f), sorted(f)))


# ---------------------------------------------------------------------------
# cones


@dataclass(frozen=True)
class ConeFace:
    """A face ``span(lineality) + cone(rays[ray_indices])`` of a cone."""

    ray_indices: tuple
    basis: np.ndarray  # orthonormal columns spanning the face
    relint_point: np.ndarray


class ConvexCone:
    """A polyhedral convex cone in R^n.

    Build it with :meth:`from_halfspaces` (``{v : A v <= 0, E v = 0}``) or
    :meth:`from_generators` (``cone(rays) + span(lineality)``); the other
    representation is derived when first needed.
    """

    def __init__(self, n: int, ineq=None, eq=None, rays=None, lineality=None):
        self.n = int(n)
        self._h = None
        self._v = None
        self._incidence = None
        if ineq is not None or eq is not None:
            A = np.asarray(ineq if ineq is not None else np.zeros((0, n)), dtype=float).reshape(-1, n)
            E = np.asarray(eq if eq is not None else np.zeros((0, n)), dtype=float).reshape(-1, n)
            A, an = normalize_rows(A)
            A = A[an > 0]
            self._h = (A, E)
        if rays is not None or lineality is not None:
            R = np.asarray(rays if rays is not None else np.zeros((0, n)), dtype=float).reshape(-1, n)
            L = np.asarray(lineality if lineality is not None else np.zeros((0, n)), dtype=float).reshape(-1, n)
            R, rn = normalize_rows(R)
            R = R[rn > 0]
            self._v = (R, row_space(L, n))
        if self._h is None and self._v is None:
            self._h = (np.zeros((0, n)), np.zeros((0, n)))

    # -- constructors
    @classmethod
    def from_halfspaces(cls, ineq, eq=None, n: int | None = None) -> "ConvexCone":
        if n is None:
            n = np.asarray(ineq).shape[-1]
        return cls(n, ineq=ineq, eq=eq if eq is not None else np.zeros((0, n)))

    @classmethod
    def from_generators(cls, rays, lineality=None, n: int | None = None) -> "ConvexCone":
        if n is None:
            n = np.asarray(rays).shape[-1]
        return cls(n, rays=rays, lineality=lineality if lineality is not None else np.zeros((0, n)))

    @classmethod
    def full(cls, n: int) -> "ConvexCone":
        return cls(n, ineq=np.zeros((0, n)), eq=np.zeros((0, n)))

    @classmethod
    def zero(cls, n: int) -> "ConvexCone":
        return cls(n, ineq=np.zeros((0, n)), eq=np.eye(n))

    # -- representations
    @property
    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        if self._h is None:
            R, L = self._v
            dual = _double_description(R, L, self.n)
            self._h = (dual.rays, dual.lineality)
        return self._h

    def _ensure_v(self):
        if self._v is None or self._incidence is None:
            A, E = self.halfspaces
            dd = _double_description(A, E, self.n)
            self._v = (dd.rays, dd.lineality)
            self._incidence = dd.incidence

    @property
    def generators(self) -> tuple[np.ndarray, np.ndarray]:
        """``(rays, lineality)`` with unit rays and orthonormal lineality rows.

        Rays are extreme unless the cone was built from a redundant generator list.
        """
        if self._v is None:
            self._ensure_v()
        return self._v

    @property
    def rays(self) -> np.ndarray:
        return self.generators[0]

    @property
    def lineality(self) -> np.ndarray:
        return self.generators[1]

    @property
    def is_trivial(self) -> bool:
        """True when the cone is ``{0}``."""
        R, L = self.generators
        return R.shape[0] == 0 and L.shape[0] == 0

    @property
    def span(self) -> Subspace:
        R, L = self.generators
        return Subspace.span(np.vstack([R, L]), self.n)

    def contains(self, v, tol: float = 1e-9) -> bool:
        v = np.asarray(v, dtype=float)
        scale = tol * max(1.0, float(np.linalg.norm(v)))
        A, E = self.halfspaces
        return bool(np.all(A @ v <= scale) and np.all(np.abs(E @ v) <= scale))

    def polar(self) -> "ConvexCone":
        """The polar cone ``{y : y.v <= 0 for all v in the cone}``."""
        if self._h is not None:
            A, E = self._h
            out = ConvexCone(self.n, rays=A, lineality=E)
            if self._v is not None:
                R, L = self._v
                out._h = (normalize_rows(R)[0], L)
            return out
        R, L = self._v
        return ConvexCone(self.n, ineq=R, eq=L)

    def intersect(self, other: "ConvexCone") -> "ConvexCone":
        A1, E1 = self.halfspaces
        A2, E2 = other.halfspaces
        return ConvexCone(self.n, ineq=np.vstack([A1, A2]), eq=np.vstack([E1, E2]))

    def project(self, v) -> np.ndarray:
        """Euclidean projection onto the cone (non-negative least squares on the generators).

        Uses bounded-variable least squares: ``scipy.optimize.nnls`` in scipy
        1.12-1.15 can stop at non-optimal points.
        """
        v = np.asarray(v, dtype=float)
        R, L = self.generators
        vl = L.T @ (L @ v) if L.shape[0] else np.zeros_like(v)
        rest = v - vl
        if R.shape[0] == 0:
            return vl
        coef = lsq_linear(R.T, rest, bounds=(0.0, np.inf), method="bvls").x
        return vl + R.T @ np.clip(coef, 0.0, None)

    def faces(self, cap: int = FACE_CAP) -> list[ConeFace]:
        """All faces, from the apex face (the lineality space) up to the cone itself."""
        self._ensure_v()
        R, L = self._v
        A, _ = self.halfspaces
        inc = self._incidence
        if inc is None or inc.shape != (A.shape[0], R.shape[0]):
            inc = np.abs(A @ R.T) <= INCIDENCE_TOL if A.size and R.size else np.ones((A.shape[0], R.shape[0]), bool)
        out = []
        for s in _enumerate_closed_sets(inc, cap):
            idx = tuple(sorted(s))
            gens = np.vstack([R[list(idx)], L]) if idx else L
            basis = orth(gens.T, self.n) if gens.size else np.zeros((self.n, 0))
            rel = R[list(idx)].sum(axis=0) if idx else np.zeros(self.n)
            out.append(ConeFace(idx, basis, rel))
        return out

    def as_polyhedron(self) -> "Polyhedron":
        A, E = self.halfspaces
        return Polyhedron(A, np.zeros(A.shape[0]), E, np.zeros(E.shape[0]), n=self.n)

    def __repr__(self):
        parts = []
        if self._h is not None:
            parts.append(f"{self._h[0].shape[0]} halfspaces, {self._h[1].shape[0]} equalities")
        if self._v is not None:
            parts.append(f"{self._v[0].shape[0]} rays, lineality {self._v[1].shape[0]}")
        return f"ConvexCone(n={self.n}; {'; '.join(parts)})"


# ---------------------------------------------------------------------------
# polyhedra


@dataclass(frozen=True)
class PolytopeFace:
    """A nonempty face: vertex indices, tight inequality rows, and its barycenter."""

    vertex_indices: tuple
    signature: tuple
    barycenter: np.ndarray
    dim: int


class Polyhedron:
    """``{x in R^n : A x <= b, E x = f}``.

    Inequality rows are rescaled to unit norm on construction, so the
    absolute active-set tolerance is scale free.
    """

    def __init__(self, A=None, b=None, E=None, f=None, n: int | None = None):
        if n is None:
            for m in (A, E):
                if m is not None and np.asarray(m).size:
                    n = np.asarray(m).shape[-1]
                    break
        if n is None:
            raise ValueError("cannot infer the dimension of an empty description")
        self.n = int(n)
        A = np.array(A if A is not None else np.zeros((0, n)), dtype=float).reshape(-1, n)
        b = np.array(b if b is not None else np.zeros(A.shape[0]), dtype=float).reshape(-1)
        E = np.array(E if E is not None else np.zeros((0, n)), dtype=float).reshape(-1, n)
        f = np.array(f if f is not None else np.zeros(E.shape[0]), dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0] or E.shape[0] != f.shape[0]:
            raise ValueError("row counts of (A, b) or (E, f) disagree")
        norms = np.linalg.norm(A, axis=1)
        zero = norms == 0
        if np.any(b[zero] < 0):
            raise InfeasibleError("a zero row with negative right-hand side")
        A, b, norms = A[~zero], b[~zero], norms[~zero]
        A = A / norms[:, None] if A.shape[0] else A
        b = b / norms if A.shape[0] else b
        if A.shape[0]:
            key = np.round(np.hstack([A, b[:, None]]), 12) + 0.0
            keep = np.sort(np.unique(key, axis=0, return_index=True)[1])
            A, b = A[keep], b[keep]
        self.A, self.b = A, b
        self.E = E
        self.f = f
        for arr in (self.A, self.b, self.E, self.f):
            arr.setflags(write=False)

    @classmethod
    def simplex(cls, n: int) -> "Polyhedron":
        return cls(-np.eye(n), np.zeros(n), np.ones((1, n)), np.ones(1), n=n)

    @classmethod
    def from_vertices(cls, points) -> "Polyhedron":
        """H-form of the convex hull of finitely many points."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        n = P.shape[1]
        lifted = ConvexCone.from_generators(np.hstack([P, np.ones((P.shape[0], 1))]), n=n + 1)
        A, E = (np.where(np.abs(m) < 1e-14, 0.0, m) for m in lifted.halfspaces)
        # rows (a, c) with a.x + c t <= 0, evaluated at t = 1
        return cls(A[:, :n], -A[:, n], E[:, :n], -E[:, n], n=n)

    def intersect(self, other: "Polyhedron") -> "Polyhedron":
        return Polyhedron(
            np.vstack([self.A, other.A]),
            np.concatenate([self.b, other.b]),
            np.vstack([self.E, other.E]),
            np.concatenate([self.f, other.f]),
            n=self.n,
        )

    def with_equalities(self, E, f) -> "Polyhedron":
        return Polyhedron(self.A, self.b, np.vstack([self.E, E]), np.concatenate([self.f, f]), n=self.n)

    def restrict_coordinates(self, keep: Sequence[int]) -> "Polyhedron":
        """Substitute ``x_j = 0`` for coordinates outside ``keep``."""
        keep = list(keep)
        A, b = self.A[:, keep], self.b
        E, f = self.E[:, keep], self.f
        an = np.linalg.norm(A, axis=1)
        if np.any((an == 0) & (b < -TOL_ACTIVE)):
            raise InfeasibleError("restriction is infeasible")
        en = np.linalg.norm(E, axis=1)
        if np.any((en == 0) & (np.abs(f) > TOL_ACTIVE)):
            raise InfeasibleError("restriction is infeasible")
        return Polyhedron(A[an > 0], b[an > 0], E[en > 0], f[en > 0], n=len(keep))

    @cached_property
    def equalities(self) -> tuple[np.ndarray, np.ndarray]:
        """Orthonormal reduction of the equality rows."""
        if self.E.shape[0] == 0:
            return self.E, self.f
        aff = AffineSubspace.from_system(self.E, self.f)
        return aff.E, aff.f

    def contains(self, x, tol: float = TOL_ACTIVE) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.A @ x - self.b <= tol) and np.all(np.abs(self.E @ x - self.f) <= tol))

    def feasible_point(self, target=None) -> np.ndarray:
        """A point of the set; the l1-closest one to ``target`` when given."""
        n, k = self.n, self.A.shape[0]
        if target is None:
            res = linprog(np.zeros(n), A_ub=self.A if k else None, b_ub=self.b if k else None,
                          A_eq=self.E if self.E.shape[0] else None, b_eq=self.f if self.E.shape[0] else None,
                          bounds=[(None, None)] * n, method="highs")
            x = res.x if res.status == 0 else None
        else:
            t = np.asarray(target, dtype=float)
            c = np.concatenate([np.zeros(n), np.ones(n)])
            I = np.eye(n)
            Aub = np.vstack([np.hstack([self.A, np.zeros((k, n))]), np.hstack([I, -I]), np.hstack([-I, -I])])
            bub = np.concatenate([self.b, t, -t])
            Aeq = np.hstack([self.E, np.zeros((self.E.shape[0], n))]) if self.E.shape[0] else None
            res = linprog(c, A_ub=Aub, b_ub=bub, A_eq=Aeq, b_eq=self.f if self.E.shape[0] else None,
                          bounds=[(None, None)] * (2 * n), method="highs")
            x = res.x[:n] if res.status == 0 else None
        if x is None:
            raise InfeasibleError("polyhedron is empty")
        return x

    def is_empty(self) -> bool:
        try:
            self.feasible_point()
        except InfeasibleError:
            return True
        return False

    @cached_property
    def _homogenized(self) -> _DDResult:
        n = self.n
        k = self.A.shape[0]
        Ah = np.vstack([np.hstack([self.A, -self.b[:, None]]), np.hstack([np.zeros(n), [-1.0]])])
        Eh = np.hstack([self.E, -self.f[:, None]]) if self.E.shape[0] else np.zeros((0, n + 1))
        dd = _double_description(Ah, Eh, n + 1)
        if dd.lineality.shape[0]:
            raise ValueError("polyhedra with lineality are not supported")
        assert dd.incidence.shape[0] == k + 1
        return dd

    @cached_property
    def _vertex_data(self):
        dd = self._homogenized
        t = dd.rays[:, -1] if dd.rays.size else np.zeros(0)
        is_vertex = t > 1e-12
        verts = dd.rays[is_vertex, :-1] / t[is_vertex, None]
        # re-solve each vertex on its tight rows, then clear float dust
        k = self.A.shape[0]
        for row, j in enumerate(np.flatnonzero(is_vertex)):
            tight = np.flatnonzero(dd.incidence[:k, j])
            M = np.vstack([self.A[tight], self.E])
            r = np.concatenate([self.b[tight], self.f])
            if M.shape[0] and np.linalg.matrix_rank(M, tol=1e-10) == self.n:
                verts[row] = np.linalg.lstsq(M, r, rcond=None)[0]
        verts[np.abs(verts) < 1e-15] = 0.0
        rec = dd.rays[~is_vertex, :-1]
        if rec.size:
            rec = rec / np.linalg.norm(rec, axis=1)[:, None]
        return verts, rec, is_vertex

    @property
    def vertices(self) -> np.ndarray:
        """Vertices as rows (computed by double description)."""
        return self._vertex_data[0]

    @property
    def recession_rays(self) -> np.ndarray:
        return self._vertex_data[1]

    @property
    def is_bounded(self) -> bool:
        return self.recession_rays.shape[0] == 0

    def faces(self, cap: int = FACE_CAP) -> list[PolytopeFace]:
        """Every nonempty face with its active-set signature and barycenter."""
        dd = self._homogenized
        verts, rec, is_vertex = self._vertex_data
        vpos = np.cumsum(is_vertex) - 1
        rpos = np.cumsum(~is_vertex) - 1
        k = self.A.shape[0]
        out = []
        for s in _enumerate_closed_sets(dd.incidence, cap):
            vs = [j for j in s if is_vertex[j]]
            if not vs:
                continue
            vi = tuple(sorted(int(vpos[j]) for j in vs))
            ri = [int(rpos[j]) for j in s if not is_vertex[j]]
            tight = np.flatnonzero(dd.incidence[:k][:, sorted(s)].all(axis=1))
            bary = verts[list(vi)].mean(axis=0)
            if ri:
                bary = bary + rec[ri].mean(axis=0)
            pts = verts[list(vi)]
            span_vecs = np.vstack([pts[1:] - pts[0], rec[ri]]) if len(ri) else pts[1:] - pts[0]
            dim = int(orth(span_vecs.T, self.n).shape[1]) if span_vecs.size else 0
            out.append(PolytopeFace(vi, tuple(int(i) for i in tight), bary, dim))
        out.sort(key=lambda fc: (fc.dim, fc.vertex_indices))
        return out

    def __repr__(self):
        return f"Polyhedron(n={self.n}, {self.A.shape[0]} inequalities, {self.E.shape[0]} equalities)"


# ---------------------------------------------------------------------------
# local cones


def _check_member(poly: Polyhedron, x: np.ndarray, tol: float) -> None:
    viol = max(
        float(np.max(poly.A @ x - poly.b, initial=-np.inf)),
        float(np.max(np.abs(poly.E @ x - poly.f), initial=-np.inf)),
    )
    if viol > tol:
        raise InfeasibleError(f"point violates the constraints by {viol:.3g}")


def active_constraints(poly: Polyhedron, x, tol: float = TOL_ACTIVE, feas_tol: float = 1e-7) -> tuple[int, ...]:
    """Indices of inequality rows with ``|a_i x - b_i| <= tol``.

    Equality rows are always active and are not listed.
    """
    x = np.asarray(x, dtype=float)
    _check_member(poly, x, feas_tol)
    return tuple(int(i) for i in np.flatnonzero(np.abs(poly.A @ x - poly.b) <= tol))


def tangent_cone(poly: Polyhedron, x, tol: float = TOL_ACTIVE) -> ConvexCone:
    """``{v : a_i v <= 0 for active i, E v = 0}``."""
    act = list(active_constraints(poly, x, tol))
    return ConvexCone(poly.n, ineq=poly.A[act], eq=poly.E)


def normal_cone(poly: Polyhedron, x, tol: float = TOL_ACTIVE) -> ConvexCone:
    """``cone{a_i : i active} + span{equality rows}``."""
    act = list(active_constraints(poly, x, tol))
    E = row_space(poly.E, poly.n)
    return ConvexCone(poly.n, rays=poly.A[act], lineality=E)


def polar_cone(c: ConvexCone) -> ConvexCone:
    return c.polar()


def moreau_decompose(v, c: ConvexCone) -> tuple[np.ndarray, np.ndarray]:
    """Split ``v`` into its projections onto ``c`` and onto the polar of ``c``."""
    v = np.asarray(v, dtype=float)
    vbar = c.project(v)
    return vbar, v - vbar


# ---------------------------------------------------------------------------
# projection


def project_point(poly: Polyhedron, p, tol: float = KKT_TOL, max_iter: int = 1000,
                  return_multipliers: bool = False):
    """Euclidean projection of ``p`` onto a polyhedron.

    A primal active-set method on ``min 1/2 |x - p|^2``. The result is
    accepted only when the KKT residual is at most ``tol`` and the normal
    cone certificate ``p - x in N_x`` holds to 1e-8.
    """
    p = np.asarray(p, dtype=float)
    A, b = poly.A, poly.b
    E, f = poly.equalities
    if poly.contains(p, 1e-15):
        x = p.copy()
        return (x, np.zeros(0), ()) if return_multipliers else x
    x = poly.feasible_point(target=p)
    work: list[int] = []
    slack = b - A @ x
    for i in np.argsort(slack):
        if slack[i] > TOL_ACTIVE:
            break
        M = np.vstack([E, A[work + [int(i)]]])
        if np.linalg.matrix_rank(M, tol=1e-10) == M.shape[0]:
            work.append(int(i))

    lam = np.zeros(0)
    for _ in range(max_iter):
        M = np.vstack([E, A[work]])
        # equality-constrained minimizer over the working face
        target = np.concatenate([f, b[work]])
        x_face = _affine_projection(p, M, target)
        d = x_face - x
        if np.linalg.norm(d) <= 1e-13 * max(1.0, np.linalg.norm(x)):
            x = x_face
            mult = np.linalg.lstsq(M.T, p - x, rcond=None)[0]
            lam = mult[E.shape[0]:]
            if lam.size == 0 or lam.min() >= -1e-12:
                break
            work.pop(int(np.argmin(lam)))
            continue
        Ad = A @ d
        slack = b - A @ x
        alpha, block = 1.0, None
        for i in range(A.shape[0]):
            if i in work or Ad[i] <= 1e-15:
                continue
            ai = max(slack[i], 0.0) / Ad[i]
            if ai < alpha:
                alpha, block = ai, i
        x = x + alpha * d
        if block is not None:
            work.append(block)
    else:
        raise RuntimeError("projection active-set iteration did not converge")

    M = np.vstack([E, A[work]])
    mult = np.linalg.lstsq(M.T, p - x, rcond=None)[0] if M.shape[0] else np.zeros(0)
    lam = mult[E.shape[0]:]
    resid = np.linalg.norm(p - x - M.T @ mult) if M.shape[0] else np.linalg.norm(p - x)
    primal = max(float(np.max(A @ x - b, initial=0.0)), float(np.max(np.abs(E @ x - f), initial=0.0)))
    dual = float(max(0.0, -lam.min())) if lam.size else 0.0
    kkt = max(resid, primal, dual)
    if kkt > max(tol, 1e-10 * np.linalg.norm(p - x)):
        raise RuntimeError(f"projection KKT residual {kkt:.3g} above tolerance")
    if return_multipliers:
        return x, lam, tuple(work)
    return x


def project_batch(poly: Polyhedron, X, tol: float = 1e-9) -> np.ndarray:
    """Projections of the rows of ``X`` onto a bounded polyhedron.

    The projection of a point lies in the relative interior of some face and
    is then the projection onto that face's affine hull; among the affine
    projections that land in the polyhedron the nearest one is the answer.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    verts = poly.vertices
    if verts.shape[0] == 0:
        raise InfeasibleError("empty polyhedron")
    best = np.repeat(verts[:1], X.shape[0], axis=0)
    best_d = np.linalg.norm(X - best, axis=1)
    if verts.shape[0] == 1:
        return best
    for fc in poly.faces():
        pts = verts[list(fc.vertex_indices)]
        B = orth((pts[1:] - pts[0]).T, poly.n) if len(pts) > 1 else np.zeros((poly.n, 0))
        Y = pts[0] + (X - pts[0]) @ B @ B.T
        inside = np.all(Y @ poly.A.T - poly.b <= tol, axis=1)
        d = np.linalg.norm(X - Y, axis=1)
        better = inside & (d < best_d)
        best[better] = Y[better]
        best_d[better] = d[better]
    return best


def _affine_projection(p: np.ndarray, M: np.ndarray, r: np.ndarray) -> np.ndarray:
    if M.shape[0] == 0:
        return p.copy()
    y = np.linalg.lstsq(M @ M.T, M @ p - r, rcond=None)[0]
    return p - M.T @ y


# ---------------------------------------------------------------------------
# angles


def angle_between_cones(u, v, return_info: bool = False):
    """Smallest angle between unit vectors of ``u`` and ``v``.

    ``u`` is a :class:`ConvexCone` or :class:`UnionOfCones` (the minimum over
    members is taken); ``v`` is a :class:`Subspace` or a :class:`ConvexCone`.
    Either side equal to ``{0}`` gives ``pi/2``.
    """
    from . import coneopt

    if isinstance(u, UnionOfCones):
        results = [angle_between_cones(m.cone, v, return_info=True) for m in u.members]
        if not results:
            results = [(math.pi / 2, {"method": "trivial", "certified": True})]
        best = min(results, key=lambda r: r[0])
        if any(not r[1].get("certified", True) for r in results):
            best = (best[0], dict(best[1], certified=False))
        return best if return_info else best[0]
    if isinstance(v, Subspace):
        if u.is_trivial or v.dim == 0:
            res = (math.pi / 2, {"method": "trivial", "certified": True})
        else:
            val, _, meta = coneopt.max_rayleigh_on_cone(u, v.projector)
            res = (math.acos(min(1.0, math.sqrt(max(val, 0.0)))), meta)
    else:
        if u.is_trivial or v.is_trivial:
            res = (math.pi / 2, {"method": "trivial", "certified": True})
        else:
            cos, meta = coneopt.max_cosine_between_cones(u, v)
            res = (math.acos(max(-1.0, min(1.0, cos))), meta)
    if res[0] <= 0 and isinstance(v, Subspace):
        res[1]["certified"] = False
        warnings.warn("cone meets the subspace: the angle is zero")
    return res if return_info else res[0]


# ---------------------------------------------------------------------------
# pushover cones


@dataclass
class UnionMember:
    cone: ConvexCone
    base_point: np.ndarray
    signature: tuple


@dataclass
class UnionOfCones:
    """A finite union of cones, each tagged with a base point and signature."""

    members: list
    n: int

    @property
    def is_trivial(self) -> bool:
        return all(m.cone.is_trivial for m in self.members)

    def contains(self, v, tol: float = 1e-9) -> bool:
        return any(m.cone.contains(v, tol) for m in self.members)

    def __len__(self):
        return len(self.members)


def _as_poly(s) -> Polyhedron:
    if isinstance(s, ConvexCone):
        return s.as_polyhedron()
    return s


def pushover_cone(outer, inner, pbar, tol: float = TOL_ACTIVE) -> ConvexCone:
    """``D_pbar(outer|inner) = T_pbar(outer) cap N_pbar(inner)``.

    A point ``p`` of ``outer`` projects onto ``pbar`` in ``inner`` exactly when
    ``p - pbar`` lies in this cone.
    """
    outer, inner = _as_poly(outer), _as_poly(inner)
    pbar = np.asarray(pbar, dtype=float)
    try:
        _check_member(inner, pbar, 1e-7)
    except InfeasibleError as exc:
        raise InfeasibleError(f"base point is not in the inner set: {exc}") from None
    t_out = tangent_cone(outer, pbar, tol)
    t_in = tangent_cone(inner, pbar, tol)
    # the normal cone of the inner set is the polar of its tangent cone
    R, L = t_in.generators
    A_out, E_out = t_out.halfspaces
    return ConvexCone(outer.n, ineq=np.vstack([A_out, R]), eq=np.vstack([E_out, L]))


def pushover_union(outer, inner, cap: int = FACE_CAP) -> UnionOfCones:
    """One pushover cone per face of ``inner``, based at the face's barycenter.

    ``inner`` is a bounded :class:`Polyhedron` or a :class:`ConvexCone` (for a
    cone the representative of a face is the sum of its unit rays).
    """
    if isinstance(inner, ConvexCone):
        reps = [(fc.relint_point, fc.ray_indices) for fc in inner.faces(cap)]
        inner_p = inner.as_polyhedron()
    else:
        if not inner.is_bounded:
            raise ValueError("inner set must be bounded")
        reps = [(fc.barycenter, fc.signature) for fc in inner.faces(cap)]
        inner_p = inner
    outer_p = _as_poly(outer)
    members = []
    for rep, _sig in reps:
        cone = pushover_cone(outer_p, inner_p, rep)
        sig = (active_constraints(outer_p, rep, feas_tol=1e-6), active_constraints(inner_p, rep, feas_tol=1e-6))
        members.append(UnionMember(cone, np.asarray(rep, dtype=float), sig))
    members.sort(key=lambda m: (len(m.signature[1]), m.signature))
    return UnionOfCones(members, outer_p.n)


# ---------------------------------------------------------------------------
# kernels


def channel_kernel(w) -> Subspace:
    """``{v : sum_x v(x) W(x) = 0}`` for a channel or any linear output map.

    ``w`` may be a :class:`~caidgeo.divergence.Channel`, a row-stochastic
    matrix, or an object with a ``kernel_matrix()`` method returning the
    matrix ``K`` with ``q_v = K v``.
    """
    if hasattr(w, "kernel_matrix"):
        K = w.kernel_matrix()
        n = K.shape[1]
    else:
        W = np.asarray(w, dtype=float)
        K, n = W.T, W.shape[0]
    sub = Subspace.kernel(K, n)
    if sub.dim:
        sums = np.abs(sub.basis.sum(axis=0))
        assert np.all(sums <= 1e-8), "kernel vectors of a channel must sum to zero"
    return sub


def gradient_kernel(grad) -> Subspace:
    """The hyperplane ``{v : v.grad = 0}``."""
    g = np.asarray(grad, dtype=float)
    n = g.size
    if np.linalg.norm(g) == 0:
        warnings.warn("zero gradient: returning the whole space")
        return Subspace.full(n)
    return Subspace.kernel(g.reshape(1, -1), n)
