"""Classical-quantum channels: divergences, the BKM form, and the decay constants.

Every resolvent integral ``int_0^inf ... (sigma + s)^{-1} ... ds`` is done in
the eigenbasis of ``sigma``, where it factors into scalar kernels:

* pairs: ``int ds / ((a+s)(b+s)) = (ln a - ln b) / (a - b)``;
* triples: ``int ds / ((a+s)(b+s)(c+s)) = -ln[a, b, c]``, minus the second
  divided difference of the logarithm.

``tr|X(s)|^3`` for the cubic divergence has no such factorization (the
absolute value mixes eigenvectors), so it is integrated numerically; the
functions ``*_quadrature`` evaluate the integral definitions directly and
serve as independent cross-checks of the closed forms.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import coneopt
from .linalg import null_space

log = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
TRACE_TOL = 1e-12
RECONSTRUCTION_TOL = 1e-10
GAP_TOL = 1e-12
ZERO_EIG = 1e-13


# ---------------------------------------------------------------------------
# spectral forms


@dataclass(frozen=True)
class SpectralForm:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues descending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def apply(self, f) -> np.ndarray:
        V = self.eigenvectors
        return (V * f(self.eigenvalues)) @ V.conj().T


def spectral_form(h) -> SpectralForm:
    h = np.asarray(h, dtype=complex)
    h = 0.5 * (h + h.conj().T)
    w, V = np.linalg.eigh(h)
    w, V = w[::-1], V[:, ::-1]
    err = np.linalg.norm((V * w) @ V.conj().T - h)
    if err > RECONSTRUCTION_TOL * max(1.0, float(np.linalg.norm(h))):
        raise np.linalg.LinAlgError(f"eigen-decomposition residual {err:.3g}")
    return SpectralForm(w, V)


def _is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)


@dataclass(frozen=True)
class DensityOperator:
    """Positive semidefinite, unit-trace Hermitian matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("a density operator must be a square matrix")
        if not _is_hermitian(m):
            raise ValueError("matrix is not Hermitian")
        m = 0.5 * (m + m.conj().T)
        if np.linalg.eigvalsh(m).min() < -PSD_TOL:
            raise ValueError("matrix has a negative eigenvalue")
        if abs(np.trace(m).real - 1.0) > TRACE_TOL:
            raise ValueError(f"trace {np.trace(m).real!r} is not 1")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def _as_operator(x) -> np.ndarray:
    if isinstance(x, DensityOperator):
        return x.matrix
    return np.asarray(x, dtype=complex)


def _as_density(x) -> np.ndarray:
    if isinstance(x, DensityOperator):
        return x.matrix
    return DensityOperator(x).matrix


@dataclass(frozen=True)
class CQChannel:
    """A classical-quantum channel: one density operator per input letter."""

    outputs: tuple
    input_labels: tuple | None = None

    def __post_init__(self):
        ops = tuple(o if isinstance(o, DensityOperator) else DensityOperator(o) for o in self.outputs)
        if not ops:
            raise ValueError("channel needs at least one input")
        d = ops[0].dim
        if any(o.dim != d for o in ops):
            raise ValueError("all outputs must act on the same space")
        object.__setattr__(self, "outputs", ops)

    @property
    def n_inputs(self) -> int:
        return len(self.outputs)

    @property
    def dim(self) -> int:
        return self.outputs[0].dim

    def stack(self) -> np.ndarray:
        return np.array([o.matrix for o in self.outputs])

    def is_commuting(self, tol: float = 1e-12) -> bool:
        ops = self.stack()
        for i in range(len(ops)):
            for j in range(i + 1, len(ops)):
                if np.max(np.abs(ops[i] @ ops[j] - ops[j] @ ops[i])) > tol:
                    return False
        return True

    def common_eigenbasis(self, seed: int = 0) -> np.ndarray:
        """Unitary diagonalizing every output (commuting channels only)."""
        if not self.is_commuting():
            raise ValueError("outputs do not commute")
        rng = np.random.default_rng(seed)
        ops = self.stack()
        mix = np.tensordot(rng.uniform(1.0, 2.0, len(ops)), ops, axes=1)
        U = spectral_form(mix).eigenvectors
        off = max(float(np.max(np.abs(U.conj().T @ o @ U - np.diag(np.diag(U.conj().T @ o @ U))))) for o in ops)
        if off > 1e-10:
            raise np.linalg.LinAlgError("failed to diagonalize the outputs simultaneously")
        return U

    def classical_reduction(self) -> np.ndarray:
        """Row-stochastic matrix of eigenvalues in a common eigenbasis."""
        U = self.common_eigenbasis()
        W = np.array([np.real(np.diag(U.conj().T @ o.matrix @ U)) for o in self.outputs])
        return np.clip(W, 0.0, None)


# ---------------------------------------------------------------------------
# scalar kernels


def log_kernel(a, b) -> np.ndarray:
    """``(ln a - ln b)/(a - b)``, or ``1/a`` when the gap is below 1e-12 relative."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    out = np.empty(a.shape)
    close = np.abs(a - b) <= GAP_TOL * np.maximum(a, b)
    out[close] = 2.0 / (a[close] + b[close])
    far = ~close
    af, bf = a[far], b[far]
    out[far] = np.log1p((af - bf) / bf) / (af - bf)
    return out


def log_dd2(a, b, c) -> np.ndarray:
    """Second divided difference ``ln[a, b, c]`` (negative for positive arguments)."""
    x = np.sort(np.stack(np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float),
                                             np.asarray(c, float))), axis=0)
    lo, mid, hi = x
    out = np.empty(lo.shape)
    spread = (hi - lo) / hi
    near = spread < 1e-4
    # Taylor expansion around the mean: ln[x0, x1, x2] = sum_k f^{(2+k)}(m)/(2+k)! h_k(d)
    m = (lo[near] + mid[near] + hi[near]) / 3.0
    d = np.stack([lo[near] - m, mid[near] - m, hi[near] - m])
    h2 = (d[0] ** 2 + d[1] ** 2 + d[2] ** 2 + d[0] * d[1] + d[0] * d[2] + d[1] * d[2])
    h3 = sum(d[i] * d[j] * d[k] for i in range(3) for j in range(i, 3) for k in range(j, 3))
    out[near] = -1.0 / (2 * m ** 2) - h2 / (4 * m ** 4) + h3 / (5 * m ** 5)
    far = ~near
    out[far] = (log_kernel(hi[far], mid[far]) - log_kernel(mid[far], lo[far])) / (hi[far] - lo[far])
    return out


# ---------------------------------------------------------------------------
# divergences


def trace_norm(t) -> float:
    """Sum of the absolute eigenvalues of a Hermitian operator."""
    t = _as_operator(t)
    return float(np.abs(np.linalg.eigvalsh(0.5 * (t + t.conj().T))).sum())


def von_neumann_entropy(rho) -> float:
    w = np.linalg.eigvalsh(_as_operator(rho))
    w = w[w > ZERO_EIG]
    return float(-np.sum(w * np.log(w)))


def _log_pairing(rho: np.ndarray, sf: SpectralForm) -> float:
    """``tr[rho ln sigma]``, or ``-inf`` when ``rho`` leaves the support of ``sigma``."""
    V = sf.eigenvectors
    diag = np.real(np.einsum("ij,jk,ki->i", V.conj().T, rho, V))
    lam = sf.eigenvalues
    zero = lam <= ZERO_EIG
    if np.any(diag[zero] > 1e-12):
        return -math.inf
    return float(np.sum(diag[~zero] * np.log(lam[~zero])))


def q_relative_entropy(rho, sigma) -> float:
    """Umegaki relative entropy ``tr[rho (ln rho - ln sigma)]`` in nats."""
    rho = _as_density(rho)
    sigma = _as_density(sigma)
    pair = _log_pairing(rho, spectral_form(sigma))
    if pair == -math.inf:
        return math.inf
    return max(-von_neumann_entropy(rho) - pair, 0.0)


def _supported(rho: np.ndarray, sigma: np.ndarray) -> tuple[bool, np.ndarray, np.ndarray]:
    """Whether ``supp rho`` is inside ``supp sigma``; also both compressed to ``supp sigma``."""
    sf = spectral_form(sigma)
    keep = sf.eigenvalues > ZERO_EIG
    B = sf.eigenvectors[:, keep]
    outside = rho - B @ (B.conj().T @ rho @ B) @ B.conj().T
    ok = np.max(np.abs(outside), initial=0.0) <= 1e-12
    return ok, B.conj().T @ rho @ B, np.diag(sf.eigenvalues[keep]).astype(complex)


def bkm_inner(rho, omega, sigma) -> float:
    """``int_0^inf tr[rho^* (sigma+s)^{-1} omega (sigma+s)^{-1}] ds`` (real part)."""
    sf = spectral_form(_as_operator(sigma))
    lam = sf.eigenvalues
    if lam.min() <= ZERO_EIG:
        raise np.linalg.LinAlgError("sigma is singular")
    V = sf.eigenvectors
    r = V.conj().T @ _as_operator(rho) @ V
    o = V.conj().T @ _as_operator(omega) @ V
    k = log_kernel(lam[:, None], lam[None, :])
    return float(np.real(np.sum(k * np.conj(r) * o)))


def q_chi_alpha(rho, sigma, alpha: int = 2) -> float:
    """Quantum chi-alpha divergence, ``alpha`` in ``{2, 3}``.

    ``(alpha - 1) int_0^inf tr|X(s)|^alpha ds`` with
    ``X(s) = (sigma+s)^{-1/2} (rho - sigma) (sigma+s)^{-1/2}``, computed on
    the support of ``sigma``; ``inf`` when ``rho`` is not supported there.
    """
    rho = _as_density(rho)
    sigma = _as_density(sigma)
    ok, r, s = _supported(rho, sigma)
    if not ok:
        return math.inf
    delta = r - s
    if alpha == 2:
        return bkm_inner(delta, delta, s)
    if alpha == 3:
        return 2.0 * _abs_cube_integral(delta, np.real(np.diag(s)))
    raise ValueError("alpha must be 2 or 3")


def _abs_cube_integrand(delta_t: np.ndarray, lam: np.ndarray, s: float) -> float:
    r = 1.0 / np.sqrt(lam + s)
    X = r[:, None] * delta_t * r[None, :]
    return float(np.sum(np.abs(np.linalg.eigvalsh(X)) ** 3))


def _abs_cube_integral(delta: np.ndarray, lam: np.ndarray) -> float:
    """``int_0^inf tr|X(s)|^3 ds`` by adaptive quadrature (delta in the eigenbasis of sigma)."""
    # the integrand varies on the scale of the eigenvalues; split there
    breaks = sorted(set([0.0] + [float(v) for v in lam]))
    total = 0.0
    f = lambda s: _abs_cube_integrand(delta, lam, s)
    for a, b in zip(breaks, breaks[1:] + [np.inf]):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", integrate.IntegrationWarning)
            val, err = integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)
        if caught:
            # roundoff stops quad short of epsrel; the estimate is still reported
            log.debug("chi3 quadrature on [%g, %g]: %s (error estimate %.1e)", a, b, caught[0].message, err)
        total += val
    return total


# ---------------------------------------------------------------------------
# independent quadrature of the integral definitions (test oracles)


def _log_gauss_legendre(lam: np.ndarray, panels: int = 80, order: int = 24):
    """Nodes and weights for ``int_0^inf f(s) ds`` after ``s = e^u``.

    The ``u`` range covers 30 e-folds below the smallest eigenvalue and 25
    above the largest; the tails beyond contribute below 1e-12 relative.
    """
    u0 = math.log(max(float(lam.min()), 1e-300)) - 30.0
    u1 = math.log(float(lam.max())) + 25.0
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(u0, u1, panels + 1)
    us, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        us.append(0.5 * (b - a) * x + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * w)
    u = np.concatenate(us)
    s = np.exp(u)
    return s, np.concatenate(ws) * s


def _resolvent_quadrature(sigma: np.ndarray, integrand) -> float:
    sf = spectral_form(sigma)
    lam = sf.eigenvalues
    V = sf.eigenvectors
    nodes, weights = _log_gauss_legendre(lam)
    return float(sum(wt * integrand(V, lam, s) for s, wt in zip(nodes, weights)))


def bkm_inner_quadrature(rho, omega, sigma) -> float:
    sigma = _as_operator(sigma)
    rho = _as_operator(rho)
    omega = _as_operator(omega)

    def f(V, lam, s):
        Rinv = (V / (lam + s)) @ V.conj().T
        return np.real(np.trace(rho.conj().T @ Rinv @ omega @ Rinv))

    return _resolvent_quadrature(sigma, f)


def q_chi_alpha_quadrature(rho, sigma, alpha: int) -> float:
    """Gauss-Legendre evaluation of the defining integral (positive definite ``sigma``)."""
    rho = _as_density(rho)
    sigma = _as_density(sigma)
    delta = rho - sigma

    def f(V, lam, s):
        Rh = (V / np.sqrt(lam + s)) @ V.conj().T
        X = Rh @ delta @ Rh
        return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (X + X.conj().T))) ** alpha))

    return (alpha - 1) * _resolvent_quadrature(sigma, f)


# ---------------------------------------------------------------------------
# Fisher form and third-moment coefficient


def q_fisher_matrix(w, sigma_center) -> np.ndarray:
    """``Sigma(x, x') = <W(x) - sigma, W(x') - sigma>_BKM`` at the center ``sigma``."""
    ops = _outputs(w)
    sigma = _as_operator(sigma_center)
    sf = spectral_form(sigma)
    if sf.eigenvalues.min() <= ZERO_EIG:
        raise np.linalg.LinAlgError("singular center; restrict to the output support first")
    V = sf.eigenvectors
    T = np.einsum("ij,xjk,kl->xil", V.conj().T, ops - sigma[None], V)
    k = log_kernel(sf.eigenvalues[:, None], sf.eigenvalues[None, :])
    flat = T.reshape(len(ops), -1)
    S = np.real((flat.conj() * k.ravel()) @ flat.T)
    return 0.5 * (S + S.T)


def _sqrt_sum_squares(ops: np.ndarray) -> np.ndarray:
    M2 = sum(o @ o for o in ops)
    return spectral_form(M2).apply(lambda v: np.sqrt(np.clip(v, 0.0, None)))


def q_a_coefficient(w, sigma_center) -> float:
    """Cube root of ``2 int_0^inf tr[(M (sigma+s)^{-1})^3] ds``, ``M = sqrt(sum_x W(x)^2)``.

    The factor 2 is the ``alpha - 1`` of the cubic divergence; with it the
    value reduces to the classical coefficient for commuting channels.
    """
    ops = _outputs(w)
    sigma = _as_operator(sigma_center)
    sf = spectral_form(sigma)
    lam = sf.eigenvalues
    if lam.min() <= ZERO_EIG:
        raise np.linalg.LinAlgError("singular center; restrict to the output support first")
    V = sf.eigenvectors
    M = V.conj().T @ _sqrt_sum_squares(ops) @ V
    kern = -log_dd2(lam[:, None, None], lam[None, :, None], lam[None, None, :])
    val = np.real(np.einsum("ij,jk,ki,ijk->", M, M, M, kern))
    return float(max(2.0 * val, 0.0) ** (1.0 / 3.0))


def q_a_coefficient_quadrature(w, sigma_center) -> float:
    ops = _outputs(w)
    sigma = _as_operator(sigma_center)
    M = _sqrt_sum_squares(ops)

    def f(V, lam, s):
        Y = M @ ((V / (lam + s)) @ V.conj().T)
        return np.real(np.trace(Y @ Y @ Y))

    return float(max(2.0 * _resolvent_quadrature(sigma, f), 0.0) ** (1.0 / 3.0))


def _outputs(w) -> np.ndarray:
    if isinstance(w, CQChannel):
        return w.stack()
    if isinstance(w, QuantumModel):
        return w.ops
    return np.array([_as_operator(o) for o in w])


# ---------------------------------------------------------------------------
# capacity interface


class QuantumModel:
    """Input-side interface of a classical-quantum channel.

    The operators are compressed to the span of their supports on
    construction, so the center of any full-support input is invertible.
    """

    def __init__(self, w):
        ops = _outputs(w)
        sf = spectral_form(ops.sum(axis=0))
        span = sf.eigenvectors[:, sf.eigenvalues > 1e-10 * sf.eigenvalues[0]]
        self.basis = span
        self.ops = np.einsum("ij,xjk,kl->xil", span.conj().T, ops, span)
        self.n = len(self.ops)
        self.dim = self.ops.shape[1]
        self._neg_entropy = np.array([-von_neumann_entropy(o) for o in self.ops])

    def output(self, p) -> np.ndarray:
        return np.tensordot(np.asarray(p, dtype=float), self.ops, axes=1)

    def divergences(self, sigma) -> np.ndarray:
        sf = spectral_form(sigma)
        V = sf.eigenvectors
        diag = np.real(np.einsum("ij,xjk,ki->xi", V.conj().T, self.ops, V))
        lam = sf.eigenvalues
        zero = lam <= ZERO_EIG
        out = self._neg_entropy - diag[:, ~zero] @ np.log(lam[~zero])
        out[np.any(diag[:, zero] > 1e-12, axis=1)] = np.inf
        return out

    def info(self, p) -> float:
        p = np.asarray(p, dtype=float)
        mask = p > 0
        return float(max(von_neumann_entropy(self.output(p)) + math.fsum(p[mask] * self._neg_entropy[mask]), 0.0))

    def info_batch(self, P) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, dtype=float))
        return np.array([self.info(p) for p in P])

    def relative_entropy(self, a, b) -> float:
        return q_relative_entropy(a, b)

    def hessian(self, sigma) -> np.ndarray:
        """``G(x, x') = <W(x), W(x')>_BKM``; the Hessian of ``I`` is ``-G``."""
        sf = spectral_form(sigma)
        lam = np.clip(sf.eigenvalues, ZERO_EIG, None)
        V = sf.eigenvectors
        T = np.einsum("ij,xjk,kl->xil", V.conj().T, self.ops, V).reshape(self.n, -1)
        k = log_kernel(lam[:, None], lam[None, :]).ravel()
        G = np.real((T.conj() * k) @ T.T)
        return 0.5 * (G + G.T)

    def kernel_matrix(self) -> np.ndarray:
        """Real matrix ``K`` with ``K v`` the stacked real and imaginary parts of ``sigma_v``."""
        flat = self.ops.reshape(self.n, -1)
        return np.vstack([flat.real.T, flat.imag.T])

    def center_vector(self, sigma) -> np.ndarray:
        flat = np.asarray(sigma).ravel()
        return np.concatenate([flat.real, flat.imag])

    def restrict(self, support) -> "QuantumModel":
        return QuantumModel(self.ops[list(support)])

    def fisher(self, sigma) -> np.ndarray:
        return q_fisher_matrix(self.ops, sigma)

    def a_coefficient(self, sigma) -> float:
        return q_a_coefficient(self.ops, sigma)

    def min_output_norm(self, basis: np.ndarray, starts: int = 24, seed: int = 0):
        """``min |sigma_v|_1`` over unit ``v`` in the column span of ``basis``."""
        return min_trace_norm_ratio(self.ops, basis, starts=starts, seed=seed)


def min_trace_norm_ratio(ops: np.ndarray, basis: np.ndarray, starts: int = 24, seed: int = 0):
    """``min |sum_x v(x) W(x)|_1`` over unit ``v`` in ``span(basis)``.

    Exact for a one-dimensional span and for commuting operators (where it is
    an l1 problem on a common eigenbasis); otherwise a multistart local
    search, reported as uncertified together with the Frobenius lower bound.
    """
    from scipy.optimize import minimize

    basis = np.asarray(basis, dtype=float)
    k = basis.shape[1]
    mats = np.tensordot(basis.T, ops, axes=1)  # (k, d, d)
    if k == 1:
        return trace_norm(mats[0]), {"method": "exact", "certified": True}
    if all(np.max(np.abs(a @ b - b @ a)) <= 1e-12 for a in ops for b in ops):
        rng = np.random.default_rng(seed)
        mix = np.tensordot(rng.uniform(1.0, 2.0, len(ops)), ops, axes=1)
        Ub = spectral_form(mix).eigenvectors
        N = np.array([np.real(np.diag(Ub.conj().T @ m @ Ub)) for m in mats]).T
        val, _, meta = coneopt.min_l1_ratio(N)
        return val, {"method": "commuting-" + meta["method"], "certified": meta["certified"]}

    def f(c):
        nc = np.linalg.norm(c)
        if nc == 0:
            return math.inf
        return trace_norm(np.tensordot(c / nc, mats, axes=1))

    flat = mats.reshape(k, -1)
    gram = np.real(flat.conj() @ flat.T)
    ev, evec = np.linalg.eigh(gram)
    rng = np.random.default_rng(seed)
    inits = [evec[:, i] for i in range(k)] + [rng.standard_normal(k) for _ in range(starts)]
    best = math.inf
    for c0 in inits:
        res = minimize(f, c0, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
        best = min(best, float(res.fun))
    return best, {"method": "multistart-nelder-mead", "certified": False,
                  "lower_bound": float(math.sqrt(max(ev[0], 0.0)))}


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class QuantumReport:
    solution: object
    theorem1: object
    theorem2: object
    fisher: np.ndarray
    a_coeff: float
    notes: list = field(default_factory=list)


def q_capacity_and_theorems(w, lam=None, tol: float = 1e-10) -> QuantumReport:
    """Capacity, optimal set and both families of decay constants for a CQ channel."""
    from .capacity import solve_capacity
    from .constants import decay_report

    model = QuantumModel(w)
    sol = solve_capacity(model, lam, tol=tol)
    rep = decay_report(sol)
    return QuantumReport(sol, rep.theorem1, rep.theorem2, rep.sigma, rep.a_coeff, rep.notes)


def q_taylor_check(w, p, pbar) -> tuple[float, float]:
    """``(|D(sigma_p||sigma_pbar) - 1/2 |p - pbar|_Sigma^2|, (A^3/2)|p - pbar|^3)``.

    ``pbar`` must be an input whose output is the center.
    """
    model = w if isinstance(w, QuantumModel) else QuantumModel(w)
    center = model.output(pbar)
    S = model.fisher(center)
    a = model.a_coefficient(center)
    v = np.asarray(p, dtype=float) - np.asarray(pbar, dtype=float)
    d = q_relative_entropy(model.output(p), center)
    return abs(d - 0.5 * float(v @ S @ v)), 0.5 * a ** 3 * float(np.linalg.norm(v)) ** 3


def vectorized_kernel(w) -> np.ndarray:
    """Orthonormal basis (columns) of ``{v : sum_x v(x) W(x) = 0}``."""
    model = w if isinstance(w, QuantumModel) else QuantumModel(w)
    return null_space(model.kernel_matrix(), model.n)
