import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pigpucb.kernel import KernelSpec, gram_matrix, matern_eval, spectral_density

from oracles import matern_mp

unit = st.floats(0.0, 1.0, allow_nan=False)


def test_zero_distance_is_one():
    k = KernelSpec(nu=1.5, ell=0.2, dim=3)
    x = np.array([0.3, 0.1, 0.9])
    assert matern_eval(k, x, x) == 1.0


@pytest.mark.parametrize("nu,expected", [
    (0.5, 0.36787944117144233),
    (1.5, 0.4833577245965077),
    (2.5, 0.5239941088318203),
])
def test_closed_forms_at_unit_distance(nu, expected):
    k = KernelSpec(nu=nu, ell=1.0, dim=1)
    assert matern_eval(k, [0.0], [1.0]) == pytest.approx(expected, abs=1e-14)
    assert expected == pytest.approx(float(matern_mp(nu, 1.0, 1.0)), abs=1e-15)


def test_distance_is_euclidean():
    k = KernelSpec(nu=1.5, ell=0.4, dim=2)
    r = math.hypot(0.3, 0.4)
    assert matern_eval(k, [0.0, 0.0], [0.3, 0.4]) == pytest.approx(float(matern_mp(1.5, 0.4, r)), rel=1e-13)


def test_errors():
    k = KernelSpec(nu=1.5, ell=0.2, dim=2)
    with pytest.raises(ValueError):
        matern_eval(k, [0.1], [0.2])
    with pytest.raises(ValueError):
        gram_matrix(k, np.zeros((3, 3)))
    with pytest.raises(ValueError):
        matern_eval(KernelSpec(nu=2.0, ell=0.2, dim=1), [0.0], [0.5])
    with pytest.raises(ValueError):
        KernelSpec(nu=1.5, ell=0.0, dim=1)


def test_gram_small_cases():
    k = KernelSpec(nu=1.5, ell=0.2, dim=2)
    assert np.array_equal(gram_matrix(k, [[0.2, 0.3]]), [[1.0]])
    assert np.allclose(gram_matrix(k, [[0.2, 0.3], [0.2, 0.3]]), np.ones((2, 2)))


def test_gram_entries_match_pointwise_eval():
    rng = np.random.default_rng(0)
    k = KernelSpec(nu=2.5, ell=0.3, dim=3)
    X = rng.uniform(size=(7, 3))
    K = gram_matrix(k, X)
    for i in range(7):
        for j in range(7):
            assert K[i, j] == pytest.approx(matern_eval(k, X[i], X[j]), abs=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_gram_psd(seed):
    rng = np.random.default_rng(seed)
    k = KernelSpec(nu=[0.5, 1.5, 2.5][seed % 3], ell=0.2, dim=2)
    assert np.linalg.eigvalsh(gram_matrix(k, rng.uniform(size=(5, 2)))).min() >= -1e-10
    n = int(rng.integers(2, 51))
    K = gram_matrix(k, rng.uniform(size=(n, 2)))
    assert np.allclose(K, K.T)
    assert np.linalg.eigvalsh(K).min() >= -1e-10


@settings(max_examples=200, deadline=None)
@given(st.lists(unit, min_size=4, max_size=4), st.sampled_from([0.5, 1.5, 2.5]),
       st.floats(0.05, 2.0), st.floats(-0.5, 0.5))
def test_symmetry_bounds_stationarity(coords, nu, ell, shift):
    k = KernelSpec(nu=nu, ell=ell, dim=2)
    x, y = np.array(coords[:2]), np.array(coords[2:])
    v = matern_eval(k, x, y)
    assert v == matern_eval(k, y, x)
    assert 0.0 < v <= 1.0
    if np.linalg.norm(x - y) > 1e-9:
        assert v < 1.0
    assert matern_eval(k, x + shift, y + shift) == pytest.approx(v, abs=1e-12)


def test_spectral_density():
    k = KernelSpec(nu=1.5, ell=1.0, dim=1)
    assert spectral_density(k, [0.0]) == pytest.approx(2.0 / math.pi, rel=1e-14)
    k2 = KernelSpec(nu=1.5, ell=0.2, dim=2)
    assert spectral_density(k2, [0.0, 0.0]) == pytest.approx(k2.density_constant(), rel=1e-15)
    for spec in (k, KernelSpec(nu=2.5, ell=0.3, dim=3)):
        d = spec.dim
        one = np.eye(d)[0]
        assert spectral_density(spec, one) > spectral_density(spec, 2 * one)


def test_spectral_density_integrates_to_kernel_at_zero():
    # the density is the Fourier transform of k, so in 1-d it integrates to k(0) = 1
    from scipy.integrate import quad

    for nu in (0.5, 1.5, 2.5):
        k = KernelSpec(nu=nu, ell=0.7, dim=1)
        total, _ = quad(lambda w: spectral_density(k, [w]), -np.inf, np.inf)
        assert total == pytest.approx(1.0, rel=1e-7)
