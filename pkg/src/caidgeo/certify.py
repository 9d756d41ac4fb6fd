"""Numerical certification of the decay bounds and the worked counterexamples.

Samples near the optimal set are drawn in blocks; each block owns a
hit-and-run chain seeded by ``(seed, block)``, so a batch depends only on
``(count, seed)`` and not on how blocks are spread across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.special import rel_entr
from scipy.special import zeta as hurwitz_zeta

from . import corpus
from .capacity import CapacitySolution, as_model, solve_capacity
from .constants import Theorem1Constants, Theorem2Constants, a_coefficient, decay_report, fisher_matrix
from .divergence import kl_divergence
from .linalg import null_space
from .polyhedral import Polyhedron, channel_kernel, project_batch, pushover_union

SLACK = 1e-9
MINOR = 1e-6
BLOCK = 256


# ---------------------------------------------------------------------------
# records


@dataclass
class NeighborhoodSample:
    point: np.ndarray  # full input coordinates
    base: np.ndarray  # projection of ``point`` onto the optimal set
    distance: float
    kind: str = "hit-and-run"


@dataclass
class Certificate:
    """Outcome of checking one inequality on a batch of points.

    ``violations`` counts points where the inequality fails by more than
    ``SLACK``; ``minor`` counts the subset of those failing by at most
    ``MINOR`` (float noise rather than falsification).
    """

    theorem: str
    samples: int = 0
    violations: int = 0
    minor: int = 0
    worst_margin: float = math.inf
    constants: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)  # (distance, info, bound, margin)

    def merge(self, other: "Certificate") -> "Certificate":
        return Certificate(
            self.theorem, self.samples + other.samples, self.violations + other.violations,
            self.minor + other.minor, min(self.worst_margin, other.worst_margin),
            self.constants or other.constants, self.rows + other.rows,
        )

    @property
    def ok(self) -> bool:
        return self.violations == 0


@dataclass
class DecayCurve:
    which: str
    tau_grid: np.ndarray
    info_values: np.ndarray
    upper_bound_values: np.ndarray
    lower_envelope_values: np.ndarray
    direction: np.ndarray
    base: np.ndarray

    @property
    def lower_ok(self) -> bool:
        return bool(np.all(self.info_values >= self.lower_envelope_values - SLACK))


def _certificate(theorem: str, dist, info, bound, constants: dict) -> Certificate:
    dist, info, bound = (np.asarray(a, dtype=float) for a in (dist, info, bound))
    margin = bound - info
    bad = margin < -SLACK
    return Certificate(
        theorem, int(margin.size), int(bad.sum()), int((bad & (margin >= -MINOR)).sum()),
        float(margin.min()) if margin.size else math.inf, constants,
        [tuple(map(float, r)) for r in zip(dist, info, bound, margin)],
    )


# ---------------------------------------------------------------------------
# sampling


class _HitAndRun:
    """Hit-and-run over ``{x : A x <= b, E x = f}`` in the null space of ``E``."""

    def __init__(self, poly: Polyhedron):
        self.poly = poly
        E = poly.E
        self.N = null_space(E, poly.n) if E.shape[0] else np.eye(poly.n)
        x0 = poly.feasible_point()
        # Chebyshev center in the null-space coordinates
        AN = poly.A @ self.N
        k = self.N.shape[1]
        if k == 0:
            self.center = x0
            return
        norms = np.linalg.norm(AN, axis=1)
        res = linprog(np.concatenate([np.zeros(k), [-1.0]]),
                      A_ub=np.hstack([AN, norms[:, None]]), b_ub=poly.b - poly.A @ x0,
                      bounds=[(None, None)] * k + [(0, None)], method="highs")
        self.center = x0 + self.N @ res.x[:k] if res.status == 0 else x0

    def chain(self, rng: np.random.Generator, count: int, burn: int = 60, thin: int = 3) -> np.ndarray:
        k = self.N.shape[1]
        x = self.center.copy()
        out = np.empty((count, self.poly.n))
        if k == 0:
            out[:] = x
            return out
        A, b = self.poly.A, self.poly.b
        j = 0
        step = 0
        while j < count:
            d = self.N @ rng.standard_normal(k)
            d /= np.linalg.norm(d)
            ad = A @ d
            slack = b - A @ x
            with np.errstate(divide="ignore", invalid="ignore"):
                t = slack / ad
            hi = np.min(t[ad > 1e-14], initial=np.inf)
            lo = np.max(t[ad < -1e-14], initial=-np.inf)
            if math.isfinite(hi) and math.isfinite(lo) and hi > lo:
                x = x + rng.uniform(lo, hi) * d
                x = np.where(np.abs(x) < 1e-16, 0.0, x)
            step += 1
            if step > burn and step % thin == 0:
                out[j] = x
                j += 1
        return out


def _random_distance(rng: np.random.Generator, delta: float) -> float:
    if rng.random() < 0.5:
        return delta * rng.uniform(1e-3, 1.0)
    return delta * 10.0 ** (-4.0 * rng.random())


def _block(lam_r: Polyhedron, pi: Polyhedron, members, delta: float, size: int, seed: int, block: int):
    rng = np.random.default_rng([seed, block])
    har = _HitAndRun(lam_r)
    n_har = size // 2
    pts = har.chain(rng, n_har)
    base = project_batch(pi, pts)
    out_p, out_b, kinds = [], [], []
    for x, bse in zip(pts, base):
        d = float(np.linalg.norm(x - bse))
        if d <= delta:
            out_p.append(x)
            kinds.append("hit-and-run")
        else:
            # every point of the segment from the base towards x projects onto the base
            out_p.append(bse + (_random_distance(rng, delta) / d) * (x - bse))
            kinds.append("hit-and-run-shrunk")
        out_b.append(bse)
    verts = pi.vertices
    live = [m for m in members if not m.cone.is_trivial]
    A, b = lam_r.A, lam_r.b
    for _ in range(size - n_har):
        if not live:
            break
        m = live[rng.integers(len(live))]
        # a relative-interior point of the member's face: random positive weights on its vertices
        fv = [i for i in range(len(verts)) if np.all(np.abs(pi.A[list(m.signature[1])] @ verts[i]
                                                            - pi.b[list(m.signature[1])]) <= 1e-9)]
        wts = rng.dirichlet(np.ones(len(fv)))
        bse = wts @ verts[fv]
        R, L = m.cone.generators
        v = (rng.exponential(size=R.shape[0]) @ R if R.shape[0] else 0.0) + \
            (rng.standard_normal(L.shape[0]) @ L if L.shape[0] else 0.0)
        nv = float(np.linalg.norm(v))
        if nv < 1e-12:
            continue
        v = v / nv
        ad = A @ v
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (b - A @ bse) / ad
        tmax = float(np.min(t[ad > 1e-14], initial=np.inf))
        tau = min(_random_distance(rng, delta), max(tmax, 0.0))
        if tau <= 0:
            continue
        out_p.append(bse + tau * v)
        out_b.append(bse)
        kinds.append("pushover")
    return np.array(out_p).reshape(-1, lam_r.n), np.array(out_b).reshape(-1, lam_r.n), kinds


def sample_neighborhood(lam: Polyhedron | None, sol: CapacitySolution, delta: float, count: int, seed: int = 0,
                        jobs: int = 1) -> list[NeighborhoodSample]:
    """Points of the constraint set within ``delta`` of the optimal set.

    Half of each block comes from a hit-and-run chain on the constraint set
    (points farther than ``delta`` are pulled towards their projection, which
    keeps the projection fixed); the other half are ``base + t v`` with
    ``base`` in the relative interior of a face of the optimal set and ``v``
    in that face's pushover cone. Every projection is recomputed and checked.

    ``lam`` is accepted for symmetry with the other entry points; the
    constraint actually used is the one stored in ``sol``.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    if count <= 0:
        return []
    lam_r = sol.constraint
    pi = sol.caid_polytope
    members = pushover_union(lam_r, pi).members
    sizes = [min(BLOCK, count - s) for s in range(0, count, BLOCK)]
    args = [(lam_r, pi, members, delta, sz, seed, i) for i, sz in enumerate(sizes)]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_block_star, args))
    else:
        parts = [_block(*a) for a in args]
    P = np.vstack([p for p, _, _ in parts])
    B = np.vstack([b for _, b, _ in parts])
    kinds = [k for _, _, ks in parts for k in ks]
    if P.shape[0] == 0:
        raise ValueError("empty neighborhood: delta below feasibility resolution")
    _check_projections(pi, lam_r, P, B)
    out = []
    for p, b, k in zip(P, B, kinds):
        out.append(NeighborhoodSample(sol.lift(p), sol.lift(b), float(np.linalg.norm(p - b)), k))
    return out


def _block_star(a):
    return _block(*a)


def _check_projections(pi: Polyhedron, lam_r: Polyhedron, P: np.ndarray, B: np.ndarray) -> None:
    again = project_batch(pi, P)
    err = float(np.max(np.linalg.norm(again - B, axis=1)))
    if err > 1e-8:
        raise AssertionError(f"recomputed projection differs from the base by {err:.3g}")
    # variational inequality: (p - base).(v - base) <= 0 for every vertex v of the optimal set
    V = pi.vertices
    vi = np.einsum("ij,kij->ki", P - B, V[:, None, :] - B[None, :, :])
    if np.max(vi) > 1e-9:
        raise AssertionError("a sample direction leaves the normal cone of the optimal set")
    if np.max(P @ lam_r.A.T - lam_r.b, initial=-np.inf) > 1e-9:
        raise AssertionError("a sample left the constraint set")


# ---------------------------------------------------------------------------
# certification


def _restricted(sol: CapacitySolution, samples) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    idx = list(sol.support)
    P = np.array([s.point[idx] for s in samples]).reshape(-1, len(idx))
    B = np.array([s.base[idx] for s in samples]).reshape(-1, len(idx))
    d = np.array([s.distance for s in samples])
    return P, B, d


def certify_theorem1(w, lam, sol: CapacitySolution, consts: Theorem1Constants, samples) -> Certificate:
    """``I(P) <= C - Gamma d(P, Pi)^2`` on every sample."""
    P, _, d = _restricted(sol, samples)
    info = sol.model.info_batch(P) if len(P) else np.zeros(0)
    bound = sol.capacity - consts.gamma * d ** 2
    return _certificate("theorem-1", d, info, bound,
                        {"beta": consts.beta, "gamma": consts.gamma, "delta": consts.delta})


def _extremal_points(sol: CapacitySolution, base, u, delta: float, steps: int = 16):
    """Points ``base +- t u`` with ``t`` up to ``delta`` whose projection is ``base``."""
    lam, base = sol.constraint, np.asarray(base, dtype=float)
    u = np.asarray(u, dtype=float) / np.linalg.norm(u)
    ts = delta * np.arange(1, steps + 1) / steps
    P = np.vstack([base + t * s * u for s in (1.0, -1.0) for t in ts])
    ok = np.max(P @ lam.A.T - lam.b[None, :], axis=1, initial=-np.inf) <= 1e-12
    if lam.E.shape[0]:
        ok &= np.max(np.abs(P @ lam.E.T - lam.f[None, :]), axis=1) <= 1e-12
    P = P[ok]
    if not len(P):
        return np.zeros((0, lam.n)), np.zeros(0)
    B = project_batch(sol.caid_polytope, P)
    keep = np.linalg.norm(B - base, axis=1) <= 1e-9
    P = P[keep]
    return P, np.linalg.norm(P - base, axis=1)


def certify_theorem2(w, lam, sol: CapacitySolution, consts: Theorem2Constants, samples,
                     cubic_scale: float = 1.0) -> Certificate:
    """Linear bound when ``Gamma1 > 0``; quadratic-plus-cubic bound when ``Gamma1 = 0``.

    For the linear branch the constraint vertices are appended to the
    samples, since that bound is claimed on the whole constraint set. For
    the quadratic branch points along the minimizing direction (both signs,
    where they stay in the constraint set and project back onto the same
    base) are appended. ``cubic_scale`` multiplies the cubic slack and
    exists for negative controls.
    """
    P, B, d = _restricted(sol, samples)
    C = sol.capacity
    if consts.gamma1 > 0:
        V = sol.constraint.vertices
        VB = project_batch(sol.caid_polytope, V)
        P = np.vstack([P, V])
        d = np.concatenate([d, np.linalg.norm(V - VB, axis=1)])
        info = sol.model.info_batch(P)
        bound = C - consts.gamma1 * d
        return _certificate("theorem-2-linear", d, info, bound, {"gamma1": consts.gamma1})
    if consts.gamma2 is None:
        raise ValueError("Gamma2 unavailable (infinite third-moment coefficient)")
    if consts.gamma2_direction is not None and consts.delta:
        Pe, de = _extremal_points(sol, *consts.gamma2_direction, consts.delta)
        P, d = np.vstack([P, Pe]), np.concatenate([d, de])
    info = sol.model.info_batch(P) if len(P) else np.zeros(0)
    bound = C - consts.gamma2 * d ** 2 + cubic_scale * 0.5 * consts.a_coeff ** 3 * d ** 3
    return _certificate("theorem-2-quadratic", d, info, bound,
                        {"gamma1": consts.gamma1, "gamma2": consts.gamma2, "delta": consts.delta,
                         "a": consts.a_coeff})


def converse_curve(w, sol: CapacitySolution, consts: Theorem2Constants, which: str = "linear",
                   taus=None) -> DecayCurve:
    """``I(P(tau))`` along ``P(tau) = base + tau v`` for the minimizing direction.

    ``v`` is the unit minimizer of the relevant constant scaled to the
    longest step that stays in the constraint set.
    """
    taus = np.round(np.linspace(0.0, 1.0, 11), 12) if taus is None else np.asarray(taus, dtype=float)
    if which == "linear":
        base, u = consts.gamma1_direction
    elif which == "quadratic":
        if consts.gamma2_direction is None:
            raise ValueError("no quadratic branch for these constants")
        base, u = consts.gamma2_direction
    else:
        raise ValueError("which must be 'linear' or 'quadratic'")
    lam = sol.constraint
    base = np.asarray(base, dtype=float)
    u = np.asarray(u, dtype=float) / np.linalg.norm(u)
    ad = lam.A @ u
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (lam.b - lam.A @ base) / ad
    tmax = float(np.min(t[ad > 1e-14], initial=np.inf))
    if not tmax > 1e-12 or not math.isfinite(tmax):
        raise RuntimeError("minimizing direction is not realizable in the constraint set")
    v = tmax * u
    nv = float(np.linalg.norm(v))
    P = base[None, :] + taus[:, None] * v[None, :]
    P = np.clip(P, 0.0, None)
    info = sol.model.info_batch(P)
    C = sol.capacity
    if which == "linear":
        lower = C - consts.gamma1 * nv * taus - consts.trace_sigma * nv ** 2 * taus ** 2
        upper = C - consts.gamma1 * nv * taus
    else:
        cubic = 0.5 * consts.a_coeff ** 3 * nv ** 3 * taus ** 3
        lower = C - consts.gamma2 * nv ** 2 * taus ** 2 - cubic
        upper = C - consts.gamma2 * nv ** 2 * taus ** 2 + cubic
    return DecayCurve(which, taus, info, upper, lower, v, base)


# ---------------------------------------------------------------------------
# Taylor envelopes


def taylor_envelope_sweep(sol: CapacitySolution, count: int, seed: int = 0) -> Certificate:
    """``|D(q_P||q) - 1/2 |P - Pbar|_Sigma^2| <= (A^3/2) |P - Pbar|^3`` on random pairs.

    ``P`` comes from hit-and-run on the constraint set and ``Pbar`` is a random
    convex combination of vertices of the optimal set.
    """
    model = sol.model
    rng = np.random.default_rng(seed)
    har = _HitAndRun(sol.constraint)
    P = har.chain(rng, count)
    V = sol.caid_polytope.vertices
    Pb = rng.dirichlet(np.ones(len(V)), size=count) @ V
    if hasattr(model, "fisher"):
        S, a = model.fisher(sol.center), model.a_coefficient(sol.center)
    else:
        S, a = fisher_matrix(model.W, sol.center), a_coefficient(model.W, sol.center)
    v = P - Pb
    nv = np.linalg.norm(v, axis=1)
    lhs = np.empty(count)
    for i in range(count):
        d = model.relative_entropy(model.output(P[i]), sol.center)
        lhs[i] = abs(d - 0.5 * float(v[i] @ S @ v[i]))
    env = 0.5 * a ** 3 * nv ** 3
    return _certificate("taylor-envelope", nv, lhs, env, {"a": a})


# ---------------------------------------------------------------------------
# worked examples


@dataclass
class FourthPowerReport:
    taus: np.ndarray
    distances: np.ndarray
    gaps: np.ndarray  # C - I(p_tau)
    ratios: np.ndarray
    ratio_limit: float
    observed_order: float
    fitted_exponent: float
    distance_formula_error: float
    output_formula_error: float
    quadratic_coefficients: np.ndarray  # (C - I)/d^2 on a finer grid
    quadratic_taus: np.ndarray


def example1_fourth_power(taus=(0.2, 0.1, 0.05)) -> tuple[float, FourthPowerReport]:
    """Ratio ``(C - I(p_tau))/d^4`` on the boundary of the ball constraint, extrapolated to 0.

    Richardson extrapolation with the order estimated from the three values
    (the ratio approaches its limit like ``tau^4``, not ``tau^2``).
    """
    W = corpus.FOURTH_POWER_CHANNEL
    model = as_model(W)
    C = math.log(2.0)
    pbar = corpus.fourth_power_boundary(0.0)
    qbar = model.output(pbar)
    taus = np.asarray(taus, dtype=float)
    P = corpus.fourth_power_boundary(taus)
    d = np.linalg.norm(P - pbar, axis=1)
    gaps = C - model.info_batch(P)
    ratios = gaps / d ** 4
    r1, r2, r3 = ratios[-3:]
    h = taus[-3] / taus[-2]
    order = math.log(abs((r1 - r2) / (r2 - r3))) / math.log(h)
    limit = r3 + (r3 - r2) / (h ** order - 1)
    fit = np.polyfit(np.log(d), np.log(gaps), 1)[0]
    d_err = float(np.max(np.abs(d - math.sqrt(6) / 6 * np.abs(np.sin(taus / 2)))))
    s2 = np.sin(taus / 2) ** 2 / 3
    q_err = float(np.max(np.abs(P @ W - (qbar + np.stack([s2, -s2], axis=1)))))
    fine = 2.0 ** -np.arange(1, 12)
    Pf = corpus.fourth_power_boundary(fine)
    df = np.linalg.norm(Pf - pbar, axis=1)
    # C - I equals the divergence of the output from the center; use it directly on the fine grid
    gf = np.array([kl_divergence(model.output(p), qbar) for p in Pf])
    rep = FourthPowerReport(taus, d, gaps, ratios, float(limit), float(order), float(fit), d_err, q_err,
                            gf / df ** 2, fine)
    return float(limit), rep


def quadratic_bound_witness(gamma: float, delta: float) -> tuple[float, float, float]:
    """A boundary point within ``delta`` of the optimum where ``C - I < gamma d^2``.

    Returns ``(tau, distance, C - I)``.
    """
    if gamma <= 0 or delta <= 0:
        raise ValueError("gamma and delta must be positive")
    model = as_model(corpus.FOURTH_POWER_CHANNEL)
    pbar = corpus.fourth_power_boundary(0.0)
    qbar = model.output(pbar)
    target = min(0.5 * delta, math.sqrt(gamma / 16.0), math.sqrt(6) / 6)
    tau = 2 * math.asin(min(1.0, target * 6 / math.sqrt(6)))
    while True:
        p = corpus.fourth_power_boundary(tau)
        d = float(np.linalg.norm(p - pbar))
        gap = kl_divergence(model.output(p), qbar)
        if d <= delta and gap < gamma * d ** 2:
            return tau, d, gap
        tau *= 0.5


def example1_polygon_sweep(ks=(6, 12, 24, 48, 96)) -> list[dict]:
    """Constants of both decay bounds for inscribed ``k``-gons approximating the ball."""
    out = []
    for k in ks:
        inst = corpus.example1_channel(k)
        sol = solve_capacity(inst.channel, inst.constraint)
        rep = decay_report(sol)
        out.append({"k": int(k), "capacity": sol.capacity, "gamma": rep.theorem1.gamma,
                    "gamma2": rep.theorem2.gamma2, "gamma1": rep.theorem2.gamma1})
    return out


@dataclass
class TanhReport:
    capacity: float
    optimal_vertices: np.ndarray
    infos: np.ndarray  # I(p_k), k = 2..K
    distances: np.ndarray  # |p_k - p_1|
    increasing: bool
    segment_taus: np.ndarray
    segment_bounds: np.ndarray  # min_k tau (C - I(p_k)): any admissible f must sit below this
    segment_checked: bool


def example2_truncation(max_index: int = 8, taus=None) -> TanhReport:
    """The tanh channel on inputs ``-K..K``."""
    inst = corpus.tanh_channel(max_index)
    W = inst.channel
    labels = inst.info["input_labels"]
    sol = solve_capacity(W)
    model = as_model(W)
    K = int(max_index)

    def p_k(k):
        p = np.zeros(len(labels))
        p[labels.index(k)] = p[labels.index(-k)] = 0.5
        return p

    p1 = p_k(1)
    ks = range(2, K + 1)
    infos = np.array([model.info(p_k(k)) for k in ks])
    dists = np.array([np.linalg.norm(p_k(k) - p1) for k in ks])
    taus = np.linspace(0.05, 1.0, 20) if taus is None else np.asarray(taus, dtype=float)
    C = sol.capacity
    bounds = np.array([min(t * (C - i) for i in infos) for t in taus])
    # concavity: I((1-t)p1 + t p_k) >= (1-t)C + t I(p_k), checked directly
    checked = all(model.info((1 - t) * p1 + t * p_k(k)) >= (1 - t) * C + t * model.info(p_k(k)) - 1e-12
                  for t in taus for k in ks)
    verts = sol.caid_polytope.vertices
    return TanhReport(C, np.array([sol.lift(v) for v in verts]), infos, dists,
                      bool(np.all(np.diff(infos) > 0)), taus, bounds, checked)


@dataclass
class ZetaReport:
    n: int
    threshold: float
    truncations: list
    capacities: list
    capacity_errors: list
    sigma00: list  # partial sums of the series over kept outputs
    sigma00_channel: list  # Sigma(0,0) of the truncated channel (tail bucket included)
    sigma01: list
    ratios: list
    a_values: list
    divergence0: list
    divergence0_closed_form: float
    truncation_mass: list


def example3_zeta(n: int = 64, truncations=(100, 1000, 10000)) -> ZetaReport:
    """Capacity and Fisher-diagonal growth of the zeta channel across output truncations."""
    thr = corpus.zeta_threshold()
    if n < thr:
        raise ValueError(f"n = {n} is below the threshold {thr:.4f}")
    z2 = math.pi ** 2 / 6
    z3 = float(hurwitz_zeta(3.0, 1.0))
    closed = math.log(2 * z3 / z2) + corpus._neg_zeta_prime_2() / z2
    caps, errs, s00, s00c, s01, avals, d0, mass = [], [], [], [], [], [], [], []
    for T in truncations:
        inst = corpus.zeta_channel(n, T)
        W = inst.channel
        sol = solve_capacity(W)
        q = sol.center
        caps.append(sol.capacity)
        errs.append(abs(sol.capacity - math.log(math.sqrt(n - 1))))
        S = fisher_matrix(W, q)
        s00c.append(float(S[0, 0]))
        s01.append(float(S[0, 1]))
        kept = np.arange(T)
        s00.append(float(-1.0 + np.sum(W[0, kept] ** 2 / q[kept])))
        avals.append(a_coefficient(W, q))
        d0.append(kl_divergence(W[0], q))
        mass.append(inst.info["truncation_mass_row0"])
    ratios = [s00[i + 1] / s00[i] for i in range(len(s00) - 1)]
    return ZetaReport(n, thr, list(truncations), caps, errs, s00, s00c, s01, ratios, avals, d0, closed, mass)


@dataclass
class AppendixBReport:
    epsilon: float
    capacity: float
    capacity_error: float
    gradient_deviation: float
    kernel_dim: int
    u_in_kernel: bool
    u_dot_gradient: float
    refuting_inputs: list  # (input index, P, v0, |v0|, v0.grad)


def appendix_b_counterexample() -> AppendixBReport:
    eps = corpus.appendix_b_epsilon()
    inst = corpus.appendix_b_channel(eps)
    W = inst.channel
    sol = solve_capacity(W)
    C = (1 - eps) * math.log(5)
    g_full = as_model(W).divergences(sol.center)
    ker = channel_kernel(W)
    U = corpus.APPENDIX_B_U
    pbar = sol.maximizer
    refuting = []
    for x in range(5, 9):
        P = np.zeros(9)
        P[x] = 1.0
        v0 = ker.project(P - pbar)
        refuting.append((x, P, v0, float(np.linalg.norm(v0)), float(v0 @ g_full)))
    return AppendixBReport(eps, sol.capacity, abs(sol.capacity - C), float(np.max(np.abs(g_full - C))), ker.dim,
                           ker.contains(U / np.linalg.norm(U)), float(U @ g_full), refuting)


# ---------------------------------------------------------------------------
# divergence inequalities


def _random_pairs(rng: np.random.Generator, size: int, m: int, floor: float | None = None):
    conc = rng.choice([0.1, 1.0, 10.0, 1000.0], size=size)
    w = rng.gamma(conc[:, None], size=(size, m))
    w /= w.sum(axis=1, keepdims=True)
    # q is either independent or a perturbation of w, to cover the near-equal regime
    q = rng.gamma(1.0, size=(size, m))
    q /= q.sum(axis=1, keepdims=True)
    near = rng.random(size) < 0.5
    t = 10.0 ** rng.uniform(-6, 0, size=size)
    q[near] = (1 - t[near, None]) * w[near] + t[near, None] * q[near]
    if floor is not None:
        q[:, 0] = floor
        q[:, 1:] *= (1 - floor) / q[:, 1:].sum(axis=1, keepdims=True)
    q = np.maximum(q, 1e-300)
    q /= q.sum(axis=1, keepdims=True)
    return w, q


def _kl_rows(w: np.ndarray, q: np.ndarray) -> np.ndarray:
    return rel_entr(w, q).sum(axis=1)


def divergence_sandwich_suite(trials: int = 100_000, seed: int = 0, sizes=(2, 4, 8, 16, 32),
                              floor: float | None = None) -> Certificate:
    """Pinsker, ``ln(1 + chi^2) >= KL`` and ``|KL - chi^2/2| <= chi^3/2`` on random pairs."""
    rng = np.random.default_rng(seed)
    total = Certificate("divergence-sandwich")
    slack = 1e-12
    for m in sizes:
        w, q = _random_pairs(rng, trials, m, floor)
        kl = _kl_rows(w, q)
        tv = np.abs(w - q).sum(axis=1)
        chi2 = ((w - q) ** 2 / q).sum(axis=1)
        chi3 = (np.abs(w - q) ** 3 / q ** 2).sum(axis=1)
        checks = [kl - 0.5 * tv ** 2, np.log1p(chi2) - kl, 0.5 * chi3 - np.abs(kl - 0.5 * chi2)]
        margin = np.min(np.stack(checks), axis=0)
        bad = margin < -slack
        total = total.merge(Certificate("divergence-sandwich", trials, int(bad.sum()),
                                        int((bad & (margin >= -MINOR)).sum()), float(margin.min())))
    return total



def random_density(rng: np.random.Generator, d: int, rank: int | None = None) -> np.ndarray:
    """A random density operator ``G G^* / tr(G G^*)`` with complex Gaussian ``G``."""
    G = rng.standard_normal((d, rank or d)) + 1j * rng.standard_normal((d, rank or d))
    r = G @ G.conj().T
    return r / np.trace(r).real


def quantum_sandwich_suite(trials: int = 10_000, seed: int = 0, dims=(2, 3, 4, 8)) -> Certificate:
    """Quantum Pinsker, ``ln(1 + chi^2) >= D`` and ``|D - chi^2/2| <= chi^3/2`` on random density pairs.

    Half of the pairs are independent, half are ``sigma`` mixed towards ``rho``
    by a log-uniform weight, so the near-equal regime is covered.
    """
    from .quantum import q_chi_alpha, q_relative_entropy, trace_norm

    rng = np.random.default_rng(seed)
    margins = np.empty(trials)
    for i in range(trials):
        d = int(dims[i % len(dims)])
        rho, sigma = random_density(rng, d), random_density(rng, d)
        if i % 2:
            t = 10.0 ** rng.uniform(-4, 0)
            rho = (1 - t) * sigma + t * rho
        D = q_relative_entropy(rho, sigma)
        chi2, chi3 = q_chi_alpha(rho, sigma, 2), q_chi_alpha(rho, sigma, 3)
        tn = trace_norm(rho - sigma)
        margins[i] = min(D - 0.5 * tn ** 2, math.log1p(chi2) - D, 0.5 * chi3 - abs(D - 0.5 * chi2))
    bad = margins < -1e-12
    return Certificate("quantum-sandwich", trials, int(bad.sum()), int((bad & (margins >= -MINOR)).sum()),
                       float(margins.min()))

# ---------------------------------------------------------------------------
# random instances


def random_instance(seed: int, max_inputs: int = 6, max_outputs: int = 6, cuts: int = 2):
    """A random channel and a simplex cut by ``cuts`` random halfspaces.

    Each halfspace keeps the uniform input strictly feasible and cuts off at
    least one simplex vertex.
    """
    rng = np.random.default_rng([seed, 7919])
    n = int(rng.integers(2, max_inputs + 1))
    m = int(rng.integers(2, max_outputs + 1))
    W = rng.dirichlet(np.ones(m), size=n)
    u = np.full(n, 1.0 / n)
    A, b = [], []
    for _ in range(cuts):
        a = rng.standard_normal(n)
        a -= a.mean()
        top = float(np.max(a))
        b.append(float(a @ u + rng.uniform(0.1, 0.9) * (top - a @ u)))
        A.append(a)
    return W, Polyhedron(np.array(A), np.array(b))
