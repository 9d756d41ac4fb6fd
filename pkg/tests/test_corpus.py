import math

import numpy as np
import pytest

from caidgeo import corpus
from caidgeo.capacity import solve_capacity

# -zeta'(2), a standard constant
NEG_ZETA_PRIME_2 = 0.93754825431584375370


def test_registry():
    assert len(corpus.corpus_entries()) == 8
    assert [e.name for e in corpus.corpus_entries(quantum=True)] == ["cq-pure-pair", "cq-commuting"]
    assert len(corpus.corpus_entries(quantum=False)) == 6


def test_unknown_name_suggests():
    with pytest.raises(corpus.UnknownCorpusName) as exc:
        corpus.load("apendix-b")
    assert "appendix-b" in exc.value.suggestions
    assert "did you mean" in str(exc.value)


def test_alias_loads_same_channel():
    a, b = corpus.load("ppv-counterexample"), corpus.load("appendix-b")
    np.testing.assert_array_equal(a.channel, b.channel)
    assert a.info["alias"] == "ppv-counterexample"


@pytest.mark.parametrize("name", list(corpus.CORPUS))
def test_every_entry_builds_and_solves(name):
    inst = corpus.load(name)
    sol = solve_capacity(inst.channel, inst.constraint)
    assert sol.capacity > 0
    assert inst.n_inputs == len(sol.maximizer)


def test_rows_are_distributions():
    for name in ["identity-n", "bsc-p", "example-1", "example-2", "zeta", "appendix-b"]:
        W = corpus.load(name).channel
        np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-14)
        assert np.all(W >= 0)


def test_bad_parameters():
    with pytest.raises(ValueError):
        corpus.bsc_channel(1.5)
    with pytest.raises(ValueError):
        corpus.zeta_channel(n=5)
    with pytest.raises(ValueError):
        corpus.example1_channel(2)


def test_fourth_power_boundary_on_ball():
    tau = np.linspace(0, 2 * np.pi, 17)
    P = corpus.fourth_power_boundary(tau)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-15)
    np.testing.assert_allclose(np.linalg.norm(P - corpus.FOURTH_POWER_CENTER, axis=1), corpus.FOURTH_POWER_RADIUS,
                               atol=1e-15)
    np.testing.assert_allclose(P[0], [0.5, 0.25, 0.25], atol=1e-15)


def test_polygon_contains_optimal_vertex():
    lam = corpus.example1_channel(12).constraint
    V = lam.vertices
    assert len(V) == 12
    assert np.min(np.linalg.norm(V - [0.5, 0.25, 0.25], axis=1)) < 1e-12


def test_zeta_constants():
    assert corpus._neg_zeta_prime_2() == pytest.approx(NEG_ZETA_PRIME_2, abs=1e-12)
    thr = corpus.zeta_threshold()
    z2, z3 = math.pi ** 2 / 6, 1.2020569031595942
    assert thr == pytest.approx(1 + (2 * z3 / z2) ** 2 * math.exp(2 * NEG_ZETA_PRIME_2 / z2), rel=1e-12)
    assert 7 < thr < 8


def test_zeta_tail_bucket_carries_exact_mass():
    inst = corpus.zeta_channel(16, 50)
    W = inst.channel
    assert W[0, 50] == pytest.approx(inst.info["truncation_mass_row0"])
    assert inst.retruncate(20).params["trunc"] == 20


def test_appendix_b_epsilon():
    eps = corpus.appendix_b_epsilon()
    assert eps * 5 ** -eps == pytest.approx(corpus.APPENDIX_B_TARGET, abs=1e-13)
    assert eps == pytest.approx(0.4508595032145733, abs=1e-12)
    assert 0 < eps < 1 / math.log(5)


def test_appendix_b_kernel_vector():
    W = corpus.appendix_b_channel().channel
    np.testing.assert_allclose(corpus.APPENDIX_B_U @ W, 0.0, atol=1e-15)


def test_quantum_entries():
    pp = corpus.load("cq-pure-pair")
    assert pp.quantum and not pp.channel.is_commuting()
    cc = corpus.load("cq-commuting")
    assert cc.channel.is_commuting()
