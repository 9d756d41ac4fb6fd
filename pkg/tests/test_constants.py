import math

import numpy as np
import pytest

from caidgeo.capacity import solve_capacity
from caidgeo.constants import (a_coefficient, a_coefficient_bounds, decay_report, fisher_matrix, kld_taylor_check,
                               theorem1_constants, theorem2_constants)
from caidgeo.divergence import kl_divergence
from caidgeo.polyhedral import Polyhedron


def test_fisher_and_a_on_noiseless_binary():
    q = np.array([0.5, 0.5])
    np.testing.assert_allclose(fisher_matrix(np.eye(2), q), [[1.0, -1.0], [-1.0, 1.0]], atol=1e-15)
    # sum_x (W/q)^2 = 4 on each output, so A^3 = 4^{3/2} = 8
    assert a_coefficient(np.eye(2), q) == pytest.approx(2.0)


def test_fisher_is_hessian_of_output_divergence(rng):
    W = rng.dirichlet(np.ones(5), size=3)
    p = rng.dirichlet(np.ones(3))
    q = p @ W
    S = fisher_matrix(W, q)
    v = rng.standard_normal(3)
    v -= v.mean()
    h = 1e-4
    # second central difference of t -> D(q_{p + t v} || q)
    f = lambda t: kl_divergence((p + t * v) @ W, q)
    fd = (f(h) - 2 * f(0.0) + f(-h)) / h ** 2
    assert fd == pytest.approx(v @ S @ v, rel=1e-5)


def test_zero_center_outputs_are_dropped():
    W = np.array([[0.5, 0.5, 0.0], [0.2, 0.8, 0.0]])
    q = np.array([0.35, 0.65, 0.0])
    assert fisher_matrix(W, q).shape == (2, 2)
    with pytest.raises(ValueError):
        fisher_matrix(np.array([[0.5, 0.0, 0.5]]), q)


def test_a_bounds_bracket(rng):
    for _ in range(20):
        W = rng.dirichlet(np.ones(4), size=3)
        q = rng.dirichlet(np.ones(3)) @ W
        lo, hi = a_coefficient_bounds(W, q)
        a = a_coefficient(W, q)
        assert lo <= a + 1e-12 and a <= hi + 1e-12


def test_taylor_envelope(rng):
    W = rng.dirichlet(np.ones(4), size=3)
    pbar = rng.dirichlet(np.ones(3))
    q = pbar @ W
    S, a = fisher_matrix(W, q), a_coefficient(W, q)
    for _ in range(200):
        lhs, env = kld_taylor_check(W, q, S, a, rng.dirichlet(np.ones(3)), pbar)
        assert lhs <= env + 1e-12
    with pytest.raises(ValueError):
        kld_taylor_check(W, q, S, a, pbar, np.array([1.0, 0.0, 0.0]))


def test_theorem1_on_noiseless_binary():
    # T(A) = {0}, so beta = pi/2; ker_d cap N(A) is spanned by (1, -1)/sqrt2 with |q_v|_1 = sqrt2
    sol = solve_capacity(np.eye(2))
    c = theorem1_constants(sol)
    assert c.beta == pytest.approx(math.pi / 2)
    assert c.gamma == pytest.approx(1.0, abs=1e-12)
    assert c.delta == pytest.approx(math.sqrt(2) * math.log(2) / 3, abs=1e-12)
    assert all(r.certified for r in c.records.values())


def test_theorem2_on_noiseless_binary():
    sol = solve_capacity(np.eye(2))
    c = theorem2_constants(sol)
    assert c.gamma1 == 0.0
    assert c.gamma2 == pytest.approx(1.0, abs=1e-12)
    assert c.delta > 0 and c.quadratic_branch
    assert c.a_coeff == pytest.approx(2.0)


def test_theorem2_linear_branch():
    # two useless inputs next to a noiseless pair: moving mass onto them costs at a linear rate
    W = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
    sol = solve_capacity(W)
    c = theorem2_constants(sol)
    assert c.gamma1 == 0.0  # the (1, -1, 0) direction keeps the gradient flat
    lam = Polyhedron([[1.0, -1.0, 0.0]], [0.0]).intersect(Polyhedron([[-1.0, 1.0, 0.0]], [0.0]))
    sol = solve_capacity(W, lam)
    c = theorem2_constants(sol)
    # only direction left is towards the useless input: slope ln2 per unit of mass, normalized
    v = np.array([-0.5, -0.5, 1.0])
    assert c.gamma1 == pytest.approx(-(sol.gradient @ v) / np.linalg.norm(v), rel=1e-9)
    assert c.gamma2 is None and c.delta is None


def test_trivial_constraint_set_is_rejected():
    sol = solve_capacity(np.eye(2), Polyhedron([[1.0, 0.0], [-1.0, 0.0]], [0.5, -0.5]))
    with pytest.raises(ValueError):
        theorem1_constants(sol)


def test_decay_report_collects_both():
    rep = decay_report(solve_capacity(np.array([[0.9, 0.1], [0.2, 0.8]])))
    assert rep.theorem1.gamma > 0 and rep.theorem2.gamma2 > 0
    assert rep.gamma_ratio == pytest.approx(rep.theorem1.gamma / rep.theorem2.gamma2)


def test_infinite_a_withholds_quadratic_constants():
    sol = solve_capacity(np.eye(2))
    c = theorem2_constants(sol, a=math.inf)
    assert c.gamma1 == 0.0 and c.gamma2 is None and c.delta is None
    assert c.notes
