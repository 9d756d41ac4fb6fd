import math

import numpy as np
import pytest

from caidgeo.capacity import solve_capacity
from caidgeo.certify import random_density
from caidgeo.constants import decay_report
from caidgeo.divergence import kl_divergence
from caidgeo.quantum import (CQChannel, DensityOperator, QuantumModel, bkm_inner, bkm_inner_quadrature, log_dd2,
                             log_kernel, min_trace_norm_ratio, q_a_coefficient, q_a_coefficient_quadrature,
                             q_capacity_and_theorems, q_chi_alpha, q_chi_alpha_quadrature, q_fisher_matrix,
                             q_relative_entropy, q_taylor_check, spectral_form, trace_norm, von_neumann_entropy)

A = np.diag([0.75, 0.25])
B = np.diag([0.5, 0.5])


def random_unitary(rng, d):
    return np.linalg.qr(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))[0]


def test_spectral_form_descending_and_reconstructs(rng):
    h = random_density(rng, 4)
    sf = spectral_form(h)
    assert np.all(np.diff(sf.eigenvalues) <= 0)
    np.testing.assert_allclose(sf.apply(lambda x: x), h, atol=1e-14)


def test_density_operator_validation():
    with pytest.raises(ValueError):
        DensityOperator(np.diag([0.6, 0.6]))
    with pytest.raises(ValueError):
        DensityOperator(np.array([[0.5, 0.5], [0.0, 0.5]]))
    with pytest.raises(ValueError):
        DensityOperator(np.diag([1.2, -0.2]))


def test_commuting_values_match_classical():
    assert q_relative_entropy(A, B) == pytest.approx(kl_divergence([0.75, 0.25], [0.5, 0.5]), abs=1e-15)
    assert q_chi_alpha(A, B, 2) == pytest.approx(0.25, abs=1e-15)
    assert q_chi_alpha(A, B, 3) == pytest.approx(0.125, abs=1e-12)
    assert q_relative_entropy(B, B) == 0.0


def test_support_violation_is_infinite():
    p0, p1 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    assert q_relative_entropy(p0, p1) == math.inf
    assert q_chi_alpha(p0, p1, 2) == math.inf


def test_trace_norm_against_svd(rng):
    assert trace_norm(np.diag([0.5, -0.5])) == pytest.approx(1.0)
    r, s = random_density(rng, 5), random_density(rng, 5)
    assert trace_norm(r - s) == pytest.approx(np.linalg.svd(r - s, compute_uv=False).sum(), rel=1e-12)


def test_entropy_of_maximally_mixed():
    assert von_neumann_entropy(np.eye(3) / 3) == pytest.approx(math.log(3))


def test_log_kernels_limits():
    assert log_kernel(0.3, 0.3) == pytest.approx(1 / 0.3)
    assert log_kernel(0.3, 0.3 + 1e-14) == pytest.approx(1 / 0.3, rel=1e-10)
    assert log_kernel(0.2, 0.5) == pytest.approx(math.log(0.2 / 0.5) / (0.2 - 0.5))
    # second divided difference of ln at a triple point: -1/(2 a^2)
    assert log_dd2(0.4, 0.4, 0.4) == pytest.approx(-1 / (2 * 0.16), rel=1e-10)
    a, b, c = 0.1, 0.35, 0.7
    dd = ((math.log(a) - math.log(b)) / (a - b) - (math.log(b) - math.log(c)) / (b - c)) / (a - c)
    assert log_dd2(a, b, c) == pytest.approx(dd, rel=1e-12)


def test_bkm_commuting_limit():
    lam = np.array([0.6, 0.3, 0.1])
    r, w = np.array([0.2, -0.1, 0.3]), np.array([0.5, 0.2, -0.4])
    assert bkm_inner(np.diag(r), np.diag(w), np.diag(lam)) == pytest.approx(np.sum(r * w / lam))
    assert bkm_inner(np.diag(r), np.zeros((3, 3)), np.diag(lam)) == 0.0


@pytest.mark.parametrize("d", [2, 3, 4, 8])
def test_closed_forms_match_quadrature(rng, d):
    r, s = random_density(rng, d), random_density(rng, d)
    h = random_density(rng, d) - np.eye(d) / d
    assert bkm_inner(r - s, h, s) == pytest.approx(bkm_inner_quadrature(r - s, h, s), abs=1e-8)
    assert q_chi_alpha(r, s, 2) == pytest.approx(q_chi_alpha_quadrature(r, s, 2), abs=1e-8)
    assert q_chi_alpha(r, s, 3) == pytest.approx(q_chi_alpha_quadrature(r, s, 3), rel=1e-7)
    ops = [random_density(rng, d) for _ in range(3)]
    center = sum(ops) / 3
    assert q_a_coefficient(ops, center) == pytest.approx(q_a_coefficient_quadrature(ops, center), abs=1e-8)


def test_fisher_and_a_commuting_reduction():
    ops = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]
    np.testing.assert_allclose(q_fisher_matrix(ops, B), [[1.0, -1.0], [-1.0, 1.0]], atol=1e-14)
    assert q_a_coefficient(ops, B) == pytest.approx(2.0)
    assert np.allclose(q_fisher_matrix([B, B], B), 0.0)


def test_a_for_constant_channel_is_sqrt_n(rng):
    s = random_density(rng, 3)
    assert q_a_coefficient([s] * 4, s) == pytest.approx(2.0, rel=1e-10)


def test_fisher_trace_bound(rng):
    ops = [random_density(rng, 3) for _ in range(4)]
    S = q_fisher_matrix(ops, sum(ops) / 4)
    for _ in range(100):
        v = rng.standard_normal(4)
        assert v @ S @ v <= (v @ v) * np.trace(S) + 1e-12


def test_cq_channel_commuting_reduction(rng):
    U = random_unitary(rng, 3)
    spectra = rng.dirichlet(np.ones(3), size=4)
    ch = CQChannel(tuple((U * s) @ U.conj().T for s in spectra))
    assert ch.is_commuting()
    W = ch.classical_reduction()
    # rows match up to a common permutation of the outputs
    perm = [int(np.argmin(np.abs(W[0] - v))) for v in spectra[0]]
    np.testing.assert_allclose(W[:, perm], spectra, atol=1e-12)


def test_commuting_pipeline_matches_classical(rng):
    U = random_unitary(rng, 3)
    spectra = np.array([[0.7, 0.2, 0.1], [0.1, 0.7, 0.2], [0.2, 0.1, 0.7], [0.4, 0.3, 0.3]])
    ch = CQChannel(tuple((U * s) @ U.conj().T for s in spectra))
    qr = q_capacity_and_theorems(ch)
    cl = decay_report(solve_capacity(spectra))
    assert qr.solution.capacity == pytest.approx(cl.solution.capacity, abs=1e-10)
    np.testing.assert_allclose(qr.fisher, cl.sigma, atol=1e-10)
    assert qr.a_coeff == pytest.approx(cl.a_coeff, abs=1e-10)
    assert qr.theorem1.gamma == pytest.approx(cl.theorem1.gamma, abs=1e-10)
    assert qr.theorem2.gamma2 == pytest.approx(cl.theorem2.gamma2, abs=1e-10)


def test_orthogonal_pure_states_capacity():
    qr = q_capacity_and_theorems(CQChannel((np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))))
    assert qr.solution.capacity == pytest.approx(math.log(2))
    np.testing.assert_allclose(qr.solution.maximizer, [0.5, 0.5], atol=1e-9)


def test_non_orthogonal_pure_pair_capacity():
    # capacity of two pure states with overlap c is the entropy of the eigenvalues (1 +- c)/2
    theta = math.pi / 3
    a = np.array([1.0, 0.0])
    b = np.array([math.cos(theta), math.sin(theta)])
    c = abs(a @ b)
    lam = np.array([(1 + c) / 2, (1 - c) / 2])
    qr = q_capacity_and_theorems(CQChannel((np.outer(a, a), np.outer(b, b))))
    assert qr.solution.capacity == pytest.approx(-np.sum(lam * np.log(lam)), abs=1e-10)


def test_taylor_envelope_quantum(rng):
    ops = [random_density(rng, 2) for _ in range(3)]
    model = QuantumModel(ops)
    sol = solve_capacity(model)
    pbar = sol.maximizer
    for _ in range(50):
        lhs, env = q_taylor_check(ops, rng.dirichlet(np.ones(3)), pbar)
        assert lhs <= env + 1e-12


def test_min_trace_norm_ratio_commuting_is_l1():
    ops = np.array([np.diag([0.7, 0.3]), np.diag([0.2, 0.8]), np.diag([0.5, 0.5])], dtype=complex)
    basis = np.array([[1.0], [1.0], [-2.0]]) / math.sqrt(6)
    val = min_trace_norm_ratio(ops, basis)[0]
    W = np.real(np.array([np.diag(o) for o in ops]))
    assert val == pytest.approx(np.abs(basis[:, 0] @ W).sum(), abs=1e-12)
