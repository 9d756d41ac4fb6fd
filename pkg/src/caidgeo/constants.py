"""Explicit decay constants of mutual information around the optimal input set.

Two families are computed:

* the Pinsker-type constants ``(beta, Gamma, delta)``: within distance
  ``delta`` of the optimal set ``Pi``, ``I(P) <= C - Gamma d(P, Pi)^2``;
* the Fisher-type constants ``(Gamma1, Gamma2, delta)``: on the whole
  constraint set ``I(P) <= C - Gamma1 |v_P|``, and when ``Gamma1 = 0`` the
  sharper ``I(P) <= C - Gamma2 |v_P|^2 + (A^3/2) |v_P|^3`` near ``Pi``.

Every constant that comes out of a nonconvex subproblem is stored as a
:class:`CertifiedValue` recording the method used and whether the method is
exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import coneopt
from .capacity import CapacitySolution, as_model
from .polyhedral import (ConvexCone, Subspace, UnionOfCones, angle_between_cones, gradient_kernel,
                         pushover_union)

GAMMA1_ZERO_RTOL = 1e-9


@dataclass(frozen=True)
class CertifiedValue:
    value: float
    method: str
    certified: bool

    def __float__(self):
        return float(self.value)


@dataclass
class Theorem1Constants:
    beta: float
    gamma: float
    delta: float
    records: dict = field(default_factory=dict)


@dataclass
class FaceConstants:
    signature: tuple
    base_point: np.ndarray
    phi: float
    delta: float
    branch: str  # "improved" when W(P) = {0}, otherwise "standard"


@dataclass
class Theorem2Constants:
    gamma1: float
    gamma2: float | None
    delta: float | None
    per_face: list
    a_coeff: float
    trace_sigma: float
    gamma1_direction: tuple | None = None  # (base point, unit direction)
    gamma2_direction: tuple | None = None
    records: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def quadratic_branch(self) -> bool:
        return self.gamma2 is not None


# ---------------------------------------------------------------------------
# Fisher matrix and third-moment coefficient


def _retained(W: np.ndarray, q: np.ndarray) -> np.ndarray:
    keep = q > 0
    if np.any(W[:, ~keep] > 0):
        raise ValueError("an output with zero center mass carries channel mass")
    return keep


def fisher_matrix(w, q, support=None) -> np.ndarray:
    """``Sigma(x, x') = sum_y q(y) (W(y|x)/q(y) - 1)(W(y|x')/q(y) - 1)``.

    Outputs with ``q(y) = 0`` are dropped; they must carry no channel mass.
    """
    W = np.asarray(getattr(w, "matrix", w), dtype=float)
    if support is not None:
        W = W[list(support)]
    q = np.asarray(q, dtype=float)
    keep = _retained(W, q)
    R = (W[:, keep] - q[keep]) / np.sqrt(q[keep])
    S = R @ R.T
    return 0.5 * (S + S.T)


def a_coefficient(w, q, support=None) -> float:
    """``A = (sum_y q(y) (sum_x (W(y|x)/q(y))^2)^{3/2})^{1/3}``."""
    W = np.asarray(getattr(w, "matrix", w), dtype=float)
    if support is not None:
        W = W[list(support)]
    q = np.asarray(q, dtype=float)
    keep = _retained(W, q)
    r = W[:, keep] / q[keep]
    s = (r ** 2).sum(axis=0)
    return float(np.sum(q[keep] * s ** 1.5) ** (1.0 / 3.0))


def a_coefficient_bounds(w, q, support=None) -> tuple[float, float]:
    """``(sqrt(tr Sigma), n^{1/6} (sum_x sum_y q (W/q)^3)^{1/3})``; A sits between them."""
    W = np.asarray(getattr(w, "matrix", w), dtype=float)
    if support is not None:
        W = W[list(support)]
    q = np.asarray(q, dtype=float)
    keep = _retained(W, q)
    r = W[:, keep] / q[keep]
    upper = W.shape[0] ** (1.0 / 6.0) * float(np.sum(q[keep] * r ** 3) ** (1.0 / 3.0))
    lower = math.sqrt(max(float(np.trace(fisher_matrix(W, q))), 0.0))
    return lower, upper


def kld_taylor_check(w, q, sigma, a: float, p, pbar, check: bool = True) -> tuple[float, float]:
    """Second-order expansion of ``D(q_p||q)`` around ``pbar``.

    Returns ``(|D(q_p||q) - 1/2 |p - pbar|_Sigma^2|, (a^3/2) |p - pbar|^3)``.
    With ``check`` the envelope is asserted with slack 1e-12.
    """
    model = as_model(w)
    p = np.asarray(p, dtype=float)
    pbar = np.asarray(pbar, dtype=float)
    qbar = model.output(pbar)
    if np.max(np.abs(np.asarray(qbar) - np.asarray(q))) > 1e-9:
        raise ValueError("pbar does not induce the center q")
    v = p - pbar
    d = model.relative_entropy(model.output(p), q)
    lhs = abs(d - 0.5 * float(v @ sigma @ v))
    env = 0.5 * a ** 3 * float(np.linalg.norm(v)) ** 3
    if check and not lhs <= env + 1e-12:
        raise AssertionError(f"Taylor envelope violated: {lhs:.3g} > {env:.3g}")
    return lhs, env


# ---------------------------------------------------------------------------
# constants


def _output_norm_min(model, K: Subspace) -> tuple[float, dict]:
    """``min |q_v|`` over unit ``v`` in ``K`` (l1 norm, or trace norm for operators)."""
    if hasattr(model, "min_output_norm"):
        return model.min_output_norm(K.basis)
    N = model.kernel_matrix() @ K.basis
    val, _, meta = coneopt.min_l1_ratio(N)
    return val, meta


def theorem1_constants(sol: CapacitySolution, dlp: UnionOfCones | None = None, w=None) -> Theorem1Constants:
    """``beta``, ``Gamma`` and ``delta`` of the Pinsker-type bound.

    ``beta`` is the angle between the pushover union and ``T(A)``,
    ``Gamma = (sin^2 beta / 2) min |q_v|_1^2`` over unit ``v`` in
    ``ker_d cap N(A)``, and ``delta = |D(W||q)| / (|X| + Gamma / sin^2 beta)``.
    """
    model = sol.model if w is None else as_model(w)
    if dlp is None:
        dlp = pushover_union(sol.constraint, sol.caid_polytope)
    if dlp.is_trivial:
        raise ValueError("the constraint set equals the optimal set; nothing to bound")
    n = len(sol.support)
    g = sol.gradient
    TA = sol.tangent
    kd = gradient_kernel(g)
    K = kd.intersect(TA.complement())
    if K.dim == 0:
        raise ValueError("ker_d cap N(A) is {0}")
    beta, binfo = angle_between_cones(dlp, TA, return_info=True)
    mu, minfo = _output_norm_min(model, K)
    s2 = math.sin(beta) ** 2
    gamma = 0.5 * s2 * mu ** 2
    delta = float(np.linalg.norm(g)) / (n + gamma / s2)
    records = {
        "beta": CertifiedValue(beta, binfo["method"], binfo["certified"]),
        "min_output_norm": CertifiedValue(mu, minfo["method"], minfo["certified"]),
        "gamma": CertifiedValue(gamma, "formula", binfo["certified"] and minfo["certified"]),
        "delta": CertifiedValue(delta, "formula", binfo["certified"] and minfo["certified"]),
    }
    return Theorem1Constants(beta, gamma, delta, records)


def theorem2_constants(sol: CapacitySolution, dlp: UnionOfCones | None = None, sigma=None,
                       a: float | None = None, w=None) -> Theorem2Constants:
    """``Gamma1``, and when it vanishes ``Gamma2``, the per-face ``phi``/``delta`` and ``delta``.

    ``Gamma2`` and ``delta`` are withheld (left as None) when ``a`` is
    infinite; ``Gamma1`` is always returned.
    """
    model = sol.model if w is None else as_model(w)
    if dlp is None:
        dlp = pushover_union(sol.constraint, sol.caid_polytope)
    if dlp.is_trivial:
        raise ValueError("the constraint set equals the optimal set; nothing to bound")
    g = sol.gradient
    gnorm = float(np.linalg.norm(g))
    if sigma is None:
        sigma = model_fisher(model, sol.center)
    if a is None:
        a = model_a(model, sol.center)
    tr = float(np.trace(sigma))

    best = None
    for m in dlp.members:
        if m.cone.is_trivial:
            continue
        val, v = coneopt.min_linear_on_cone(m.cone, -g)
        if best is None or val < best[0]:
            best = (val, m, v)
    raw_g1 = best[0]
    gamma1 = 0.0 if abs(raw_g1) <= GAMMA1_ZERO_RTOL * max(1.0, gnorm) else raw_g1
    records = {"gamma1": CertifiedValue(raw_g1, "extreme-rays/projection", True)}
    out = Theorem2Constants(gamma1, None, None, [], a, tr, (best[1].base_point, best[2]), None, records)
    if gamma1 < 0:
        out.notes.append("negative Gamma1: the supplied point is not optimal")
    if gamma1 > 0:
        return out
    if not math.isfinite(a):
        out.notes.append("A is infinite; Gamma2 and delta withheld")
        return out

    kd = gradient_kernel(g)
    gcone = ConvexCone(len(g), eq=g[None, :])
    wcones = []
    g2 = None
    certified = True
    for m in dlp.members:
        wc = m.cone.intersect(gcone)
        wcones.append(wc)
        if wc.is_trivial:
            continue
        val, u, meta = coneopt.min_rayleigh_on_cone(wc, sigma)
        certified &= meta["certified"]
        if g2 is None or val < g2[0]:
            g2 = (val, m, u)
    if g2 is None:
        out.notes.append("every W(P) is {0} although Gamma1 = 0")
        return out
    gamma2 = 0.5 * g2[0]
    out.gamma2 = gamma2
    out.gamma2_direction = (g2[1].base_point, g2[2])
    out.records["gamma2"] = CertifiedValue(gamma2, "face-eigen", certified)

    faces = []
    for m, wc in zip(dlp.members, wcones):
        if m.cone.is_trivial:
            phi, info = math.pi / 2, {"method": "trivial", "certified": True}
        else:
            nested = pushover_union(m.cone, wc)
            phi, info = angle_between_cones(nested, kd, return_info=True)
        if wc.is_trivial:
            d = math.sin(phi) / gamma2 * gnorm
            branch = "improved"
        else:
            d = math.sin(phi) / (tr + gamma2) * gnorm
            branch = "standard"
        faces.append(FaceConstants(m.signature, m.base_point, phi, d, branch))
        certified &= info["certified"]
    out.per_face = faces
    out.delta = min(fc.delta for fc in faces)
    out.records["delta"] = CertifiedValue(out.delta, "min over faces", certified)
    return out


def model_fisher(model, center) -> np.ndarray:
    if hasattr(model, "fisher"):
        return model.fisher(center)
    return fisher_matrix(model.W, center)


def model_a(model, center) -> float:
    if hasattr(model, "a_coefficient"):
        return model.a_coefficient(center)
    return a_coefficient(model.W, center)


@dataclass
class DecayReport:
    solution: CapacitySolution
    theorem1: Theorem1Constants | None
    theorem2: Theorem2Constants | None
    sigma: np.ndarray
    a_coeff: float
    gamma_ratio: float | None
    notes: list = field(default_factory=list)


def decay_report(sol: CapacitySolution, a_override: float | None = None) -> DecayReport:
    """Both families of constants for one capacity solution.

    ``gamma_ratio`` is ``Gamma / Gamma2`` whenever both exist; it is reported
    as is, without interpretation.
    """
    model = sol.model
    dlp = pushover_union(sol.constraint, sol.caid_polytope)
    sigma = model_fisher(model, sol.center)
    a = model_a(model, sol.center) if a_override is None else a_override
    notes = []
    t1 = t2 = None
    try:
        t1 = theorem1_constants(sol, dlp)
    except ValueError as exc:
        notes.append(f"theorem 1: {exc}")
    try:
        t2 = theorem2_constants(sol, dlp, sigma, a)
    except ValueError as exc:
        notes.append(f"theorem 2: {exc}")
    ratio = None
    if t1 is not None and t2 is not None and t2.gamma2:
        ratio = t1.gamma / t2.gamma2
    return DecayReport(sol, t1, t2, sigma, a, ratio, notes)
