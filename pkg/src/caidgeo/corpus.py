"""Built-in channels and constraint sets.

Each entry is a builder returning a :class:`CorpusInstance`; keyword
arguments tune the instance (alphabet size, crossover probability,
truncation depth, ...).
"""

from __future__ import annotations

import difflib
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import bisect
from scipy.special import zeta as hurwitz_zeta

from .polyhedral import Polyhedron
from .quantum import CQChannel


@dataclass
class CorpusInstance:
    name: str
    channel: object  # (n, m) matrix or CQChannel
    constraint: Polyhedron | None
    params: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)
    # builds the same channel at another output truncation (countable outputs only)
    retruncate: Callable | None = None

    @property
    def quantum(self) -> bool:
        return isinstance(self.channel, CQChannel)

    @property
    def n_inputs(self) -> int:
        return self.channel.n_inputs if self.quantum else np.asarray(self.channel).shape[0]


# ---------------------------------------------------------------------------
# classical entries


def identity_channel(n: int = 2) -> CorpusInstance:
    return CorpusInstance("identity-n", np.eye(int(n)), None, {"n": int(n)})


def bsc_channel(p: float = 0.11) -> CorpusInstance:
    p = float(p)
    if not 0 <= p <= 1:
        raise ValueError("crossover probability must lie in [0, 1]")
    return CorpusInstance("bsc-p", np.array([[1 - p, p], [p, 1 - p]]), None, {"p": p})


FOURTH_POWER_CHANNEL = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
FOURTH_POWER_CENTER = np.array([2 / 3, 1 / 6, 1 / 6])
FOURTH_POWER_RADIUS = math.sqrt(6) / 12


def fourth_power_boundary(tau) -> np.ndarray:
    """Boundary point of the ball constraint at angle ``tau`` (rows for array input)."""
    t = np.asarray(tau, dtype=float)
    c, s = np.cos(t), np.sin(t)
    out = np.stack([8 - 2 * c, 2 + c + math.sqrt(3) * s, 2 + c - math.sqrt(3) * s], axis=-1) / 12
    return out


def example1_channel(k: int = 12) -> CorpusInstance:
    """Three inputs, two outputs, ball constraint replaced by an inscribed regular ``k``-gon.

    One polygon vertex sits at the optimal input ``[1/2, 1/4, 1/4]``.
    """
    k = int(k)
    if k < 3:
        raise ValueError("polygon needs at least 3 vertices")
    verts = fourth_power_boundary(2 * np.pi * np.arange(k) / k)
    lam = Polyhedron.from_vertices(verts)
    return CorpusInstance("example-1", FOURTH_POWER_CHANNEL.copy(), lam, {"k": k},
                          {"ball_center": FOURTH_POWER_CENTER.tolist(), "ball_radius": FOURTH_POWER_RADIUS})


def tanh_channel(max_index: int = 4) -> CorpusInstance:
    """Inputs ``-K..K``; input ``x`` maps to ``[(1 + tanh x)/2, (1 - tanh x)/2]``, ``+-1`` are noiseless."""
    K = int(max_index)
    if K < 2:
        raise ValueError("max_index must be at least 2")
    xs = np.arange(-K, K + 1)
    th = np.tanh(xs.astype(float))
    W = np.stack([(1 + th) / 2, (1 - th) / 2], axis=1)
    W[xs == 1] = [1.0, 0.0]
    W[xs == -1] = [0.0, 1.0]
    return CorpusInstance("example-2", W, None, {"max_index": K}, {"input_labels": xs.tolist()})


def zeta_threshold() -> float:
    """Smallest admissible input count for the zeta channel (real-valued)."""
    z2, z3 = math.pi ** 2 / 6, float(hurwitz_zeta(3.0, 1.0))
    s = _neg_zeta_prime_2() / z2
    return 1.0 + (2 * z3 / z2) ** 2 * math.exp(2 * s)


def _neg_zeta_prime_2() -> float:
    """``sum_y ln(y) / y^2``, by direct summation plus an Euler-Maclaurin tail."""
    N = 10_000
    y = np.arange(1, N + 1, dtype=float)
    head = math.fsum(np.log(y) / y ** 2)
    # tail: int_N^inf ln x / x^2 dx - f(N)/2 - f'(N)/12
    lnN = math.log(N)
    tail = (lnN + 1) / N - lnN / (2 * N ** 2) - (1 - 2 * lnN) / (12 * N ** 3)
    return head + tail


def zeta_channel(n: int = 64, trunc: int = 1000) -> CorpusInstance:
    """The zeta channel with outputs ``-T..-1`` and ``1..n-1`` plus one tail bucket.

    The bucket collects the mass of outputs below ``-T`` exactly, so every row
    stays a distribution and the ratios ``W(y|x)/q(y)`` on kept outputs are
    the untruncated ones.
    """
    n, T = int(n), int(trunc)
    if n < zeta_threshold():
        raise ValueError(f"n = {n} is below the threshold {zeta_threshold():.4f}")
    if T < 1:
        raise ValueError("truncation must be positive")
    z2, z3 = math.pi ** 2 / 6, float(hurwitz_zeta(3.0, 1.0))
    y = np.arange(1, T + 1, dtype=float)
    row0 = y ** -2 / z2
    tail0 = float(hurwitz_zeta(2.0, T + 1)) / z2
    neg = y ** -3 / (2 * z3)
    tail_neg = float(hurwitz_zeta(3.0, T + 1)) / (2 * z3)
    m = T + 1 + (n - 1)
    W = np.zeros((n, m))
    # column order: y = -1, -2, ..., -T, tail (< -T), then 1..n-1
    W[0, :T] = row0
    W[0, T] = tail0
    W[1:, :T] = neg
    W[1:, T] = tail_neg
    W[1:, T + 1:] = 0.5 * np.eye(n - 1)
    info = {"truncation_mass_row0": tail0, "truncation_mass_rows": tail_neg,
            "output_labels": [f"-{int(v)}" for v in y] + [f"<-{T}"] + [str(v) for v in range(1, n)]}
    return CorpusInstance("zeta", W, None, {"n": n, "trunc": T}, info,
                          retruncate=lambda t: zeta_channel(n, t))


APPENDIX_B_TARGET = math.sqrt(3) * 2 ** (1 / 3) / 10
APPENDIX_B_U = np.array([0, 0, 0, 0, 0, 2, 2, -1, -3], dtype=float)


def appendix_b_epsilon(xtol: float = 1e-13) -> float:
    """Root of ``e 5^{-e} = sqrt(3) 2^{1/3} / 10`` on ``(0, 1/ln 5)`` by bisection."""
    hi = 1 / math.log(5)
    f = lambda e: e * 5 ** (-e) - APPENDIX_B_TARGET
    assert f(0.0) < 0 < f(hi), "root not bracketed"
    return bisect(f, 0.0, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)


def appendix_b_channel(eps: float | None = None) -> CorpusInstance:
    eps = appendix_b_epsilon() if eps is None else float(eps)
    W = np.zeros((9, 8))
    W[:5, :3] = eps / 3
    W[:5, 3:] = (1 - eps) * np.eye(5)
    W[5, :3] = [1 / 2, 1 / 3, 1 / 6]
    W[6, :3] = [1 / 6, 1 / 2, 1 / 3]
    W[7, :3] = [1 / 3, 1 / 6, 1 / 2]
    W[8, :3] = [1 / 3, 1 / 2, 1 / 6]
    return CorpusInstance("appendix-b", W, None, {"eps": eps})


# ---------------------------------------------------------------------------
# classical-quantum entries


def pure_pair_channel(theta: float = math.pi / 3) -> CorpusInstance:
    """``|0>`` and ``cos(theta)|0> + sin(theta)|1>`` on a qubit."""
    theta = float(theta)
    a = np.array([1.0, 0.0])
    b = np.array([math.cos(theta), math.sin(theta)])
    ch = CQChannel((np.outer(a, a), np.outer(b, b)))
    return CorpusInstance("cq-pure-pair", ch, None, {"theta": theta})


def commuting_cq_channel(seed: int = 3) -> CorpusInstance:
    """Four qutrit states diagonal in a shared random basis."""
    rng = np.random.default_rng(int(seed))
    U = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))[0]
    spectra = np.array([[0.7, 0.2, 0.1], [0.1, 0.7, 0.2], [0.2, 0.1, 0.7], [0.4, 0.3, 0.3]])
    ops = []
    for s in spectra:
        m = (U * s) @ U.conj().T
        ops.append(0.5 * (m + m.conj().T))
    return CorpusInstance("cq-commuting", CQChannel(tuple(ops)), None, {"seed": int(seed)},
                          {"classical_reduction": spectra.tolist()})


# ---------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    description: str
    builder: Callable
    quantum: bool = False


CORPUS = {
    e.name: e
    for e in [
        CorpusEntry("identity-n", "noiseless n-ary channel (param n, default 2)", identity_channel),
        CorpusEntry("bsc-p", "binary symmetric channel (param p, default 0.11)", bsc_channel),
        CorpusEntry("example-1", "3x2 channel, ball constraint as an inscribed k-gon; fourth-power decay on the ball",
                    example1_channel),
        CorpusEntry("example-2", "tanh channel on inputs -K..K; optimal inputs never approached", tanh_channel),
        CorpusEntry("zeta", "zeta channel with truncated outputs; infinite Fisher diagonal", zeta_channel),
        CorpusEntry("appendix-b", "9x8 channel refuting a kernel-projection decay bound", appendix_b_channel),
        CorpusEntry("cq-pure-pair", "two non-orthogonal pure qubit states", pure_pair_channel, True),
        CorpusEntry("cq-commuting", "four commuting qutrit states", commuting_cq_channel, True),
    ]
}

ALIASES = {"ppv-counterexample": "appendix-b"}


class UnknownCorpusName(KeyError):
    def __init__(self, name: str):
        self.name = name
        self.suggestions = difflib.get_close_matches(name, list(CORPUS) + list(ALIASES), n=3, cutoff=0.3)
        super().__init__(name)

    def __str__(self):
        hint = f"; did you mean {', '.join(self.suggestions)}?" if self.suggestions else ""
        return f"unknown corpus name {self.name!r}{hint} (available: {', '.join(CORPUS)})"


def corpus_entries(quantum: bool | None = None) -> list[CorpusEntry]:
    return [e for e in CORPUS.values() if quantum is None or e.quantum == quantum]


def load(name: str, **params) -> CorpusInstance:
    key = ALIASES.get(name, name)
    if key not in CORPUS:
        raise UnknownCorpusName(name)
    inst = CORPUS[key].builder(**params)
    if name in ALIASES:
        inst.info["alias"] = name
    return inst
