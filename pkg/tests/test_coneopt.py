import math

import numpy as np
import pytest

from caidgeo.coneopt import (max_cosine_between_cones, max_rayleigh_on_cone, min_l1_ratio, min_linear_on_cone,
                             min_rayleigh_on_cone)
from caidgeo.polyhedral import ConvexCone


def unit_samples_in_cone(R, count, rng):
    """Unit vectors of cone(R) from random nonnegative combinations."""
    c = rng.exponential(size=(count, R.shape[0])) ** 3
    V = c @ R
    return V / np.linalg.norm(V, axis=1, keepdims=True)


def test_rayleigh_on_orthant_quadrant():
    Q = np.array([[2.0, 0.0], [0.0, 1.0]])
    K = ConvexCone.from_halfspaces(-np.eye(2))
    assert max_rayleigh_on_cone(K, Q)[0] == pytest.approx(2.0)
    assert min_rayleigh_on_cone(K, Q)[0] == pytest.approx(1.0)
    # an indefinite form whose negative eigenvector leaves the cone
    Q = np.array([[0.0, 1.0], [1.0, 0.0]])
    val, u, meta = min_rayleigh_on_cone(K, Q)
    assert val == pytest.approx(0.0, abs=1e-12) and meta["certified"]


def test_rayleigh_against_sampling(rng):
    for _ in range(10):
        R = rng.standard_normal((4, 3))
        K = ConvexCone.from_generators(R, n=3)
        M = rng.standard_normal((3, 3))
        Q = M + M.T
        U = unit_samples_in_cone(K.rays, 20000, rng)
        vals = np.einsum("ij,jk,ik->i", U, Q, U)
        lo, _, _ = min_rayleigh_on_cone(K, Q)
        hi, _, _ = max_rayleigh_on_cone(K, Q)
        assert lo <= vals.min() + 1e-9 and hi >= vals.max() - 1e-9
        assert vals.min() - lo < 5e-2 and hi - vals.max() < 5e-2


def test_min_linear_on_cone():
    K = ConvexCone.from_halfspaces(-np.eye(2))
    val, v = min_linear_on_cone(K, [1.0, 2.0])
    assert val == pytest.approx(1.0) and np.allclose(v, [1.0, 0.0])
    val, v = min_linear_on_cone(K, [1.0, -2.0])
    assert val == pytest.approx(-2.0)
    with pytest.raises(ValueError):
        min_linear_on_cone(ConvexCone.zero(2), [1.0, 0.0])


def test_max_cosine_between_rays():
    U = ConvexCone.from_generators([[1.0, 0.0, 0.0]], n=3)
    V = ConvexCone.from_generators([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]], n=3)
    cos, meta = max_cosine_between_cones(U, V)
    assert cos == pytest.approx(1 / math.sqrt(2))


def test_min_l1_ratio_exact_and_multistart(rng):
    N = rng.standard_normal((7, 3))
    val, c, meta = min_l1_ratio(N)
    assert meta["certified"]
    assert np.linalg.norm(c) == pytest.approx(1.0)
    assert np.abs(N @ c).sum() == pytest.approx(val)
    C = rng.standard_normal((200000, 3))
    C /= np.linalg.norm(C, axis=1, keepdims=True)
    assert val <= np.abs(C @ N.T).sum(axis=1).min() + 1e-12
    # the multistart path on the same problem finds the same optimum
    val2, _, meta2 = min_l1_ratio(N, cap=0)
    assert not meta2["certified"]
    assert val2 == pytest.approx(val, rel=1e-8)
    assert meta2["lower_bound"] <= val + 1e-12


def test_min_l1_ratio_degenerate():
    assert min_l1_ratio(np.array([[1.0], [-2.0]]))[0] == pytest.approx(3.0)
    assert min_l1_ratio(np.array([[1.0, 1.0], [2.0, 2.0]]))[0] == 0.0
