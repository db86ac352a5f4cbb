import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfgp.kernels import (KernelSpec, MaternParams, TemporalCorrParams, Variant,
                          kernel_diag, kernel_eval, kernel_matrix, matern,
                          matern_correlation, temporal_corr)
from mfgp.gp import cholesky_with_jitter

from conftest import VARIANTS, random_spec


def test_matern_zero_lag_is_variance():
    for nu in (0.5, 1.5, 2.5):
        p = MaternParams(3.7, (0.2, 5.0, 1.0), nu)
        assert matern(np.zeros(3), p) == 3.7


def test_matern_exponential_case():
    # closed form exp(-1) evaluated with mpmath
    assert matern([1.0], MaternParams(1.0, (1.0,), 0.5)) == pytest.approx(0.36787944117144232, abs=1e-15)


def test_matern_52_anisotropic():
    # 2 * (1 + sqrt5 r + 5 r^2 / 3) exp(-sqrt5 r) at r = sqrt2, via mpmath
    p = MaternParams(2.0, (3.0, 4.0), 2.5)
    assert matern([3.0, 4.0], p) == pytest.approx(0.63456672790808761, rel=1e-13)


def test_matern_32_closed_form():
    r = 0.7
    expected = (1 + math.sqrt(3) * r) * math.exp(-math.sqrt(3) * r)
    assert matern([0.7], MaternParams(1.0, (1.0,), 1.5)) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("bad", [
    dict(variance=0.0, lengthscales=(1.0,)),
    dict(variance=1.0, lengthscales=(0.0,)),
    dict(variance=1.0, lengthscales=(1.0,), nu=2.0),
])
def test_matern_params_validation(bad):
    with pytest.raises(ValueError):
        MaternParams(**bad)


def test_matern_dimension_mismatch():
    with pytest.raises(ValueError):
        matern([1.0, 2.0], MaternParams(1.0, (1.0,)))


def test_temporal_corr_examples():
    p1 = TemporalCorrParams(1.0, 1.0)
    assert temporal_corr(25.0, 100.0, p1) == 25.0
    assert temporal_corr(4.0, 9.0, TemporalCorrParams(0.5, 1.0)) == pytest.approx(2.0, abs=1e-15)
    assert temporal_corr(1e-12, 5.0, TemporalCorrParams(1.3)) < 1e-15
    with pytest.raises(ValueError):
        temporal_corr(0.0, 1.0, p1)
    with pytest.raises(ValueError):
        TemporalCorrParams(0.0)


def test_two_scale_diagonal_and_degenerate():
    xi0 = MaternParams(2.0, (0.5, 0.5))
    eps = MaternParams(0.3, (0.2, 0.4))
    spec = KernelSpec.two_scale(xi0, eps, TemporalCorrParams(1.7, 100.0))
    x = np.array([0.2, 0.9])
    assert kernel_eval((x, 25.0), (x, 25.0), spec) == pytest.approx(2.0 + 0.3 * 0.25**1.7, rel=1e-14)
    # t = t' = t_scale: correlation factor exactly 1
    y = np.array([0.5, 0.1])
    assert kernel_eval((x, 100.0), (y, 100.0), spec) == pytest.approx(
        matern(x - y, xi0) + matern(x - y, eps), rel=1e-14)
    # vanishing error variance degenerates to the single-fidelity kernel
    tiny = KernelSpec.two_scale(xi0, MaternParams(1e-300, (0.2, 0.4)), TemporalCorrParams(1.0, 1.0))
    for ta, tb in [(1.0, 50.0), (20.0, 20.0)]:
        assert kernel_eval((x, ta), (y, tb), tiny) == pytest.approx(matern(x - y, xi0), rel=1e-14)


def test_stationary_uses_joint_lag_and_single_level_ignores_t():
    joint = MaternParams(1.5, (0.3, 0.3, 10.0), 1.5)
    spec = KernelSpec.stationary(joint)
    a, b = (np.array([0.1, 0.2]), 30.0), (np.array([0.3, 0.0]), 50.0)
    assert kernel_eval(a, b, spec) == pytest.approx(matern([-0.2, 0.2, -20.0], joint), rel=1e-14)
    sl = KernelSpec.single_level(MaternParams(1.0, (0.3, 0.3)))
    assert kernel_eval(a, b, sl) == kernel_eval((a[0], 1.0), (b[0], 2.0), sl)


def test_kernel_spec_field_validation():
    p = MaternParams(1.0, (1.0,))
    with pytest.raises(ValueError):
        KernelSpec(Variant.SINGLE_LEVEL)
    with pytest.raises(ValueError):
        KernelSpec(Variant.SINGLE_LEVEL, params_x=p, params_joint=p)
    with pytest.raises(ValueError):
        KernelSpec.two_scale(p, MaternParams(1.0, (1.0, 1.0)), TemporalCorrParams(1.0))
    with pytest.raises(ValueError):
        Variant.parse("kennedy-ohagan")


@pytest.mark.parametrize("variant", VARIANTS)
def test_kernel_eval_symmetry_random_pairs(rng, variant):
    spec = random_spec(rng, variant, 3)
    for _ in range(100):
        a = (rng.random(3), float(rng.uniform(0.1, 5)))
        b = (rng.random(3), float(rng.uniform(0.1, 5)))
        assert kernel_eval(a, b, spec) == kernel_eval(b, a, spec)


@pytest.mark.parametrize("variant", VARIANTS)
def test_kernel_matrix_matches_pointwise(rng, variant):
    spec = random_spec(rng, variant, 2)
    XA, TA = rng.random((6, 2)), rng.uniform(0.5, 4, 6)
    XB, TB = rng.random((4, 2)), rng.uniform(0.5, 4, 4)
    K = kernel_matrix(spec, XA, TA, XB, TB)
    brute = np.array([[kernel_eval((XA[i], TA[i]), (XB[j], TB[j]), spec) for j in range(4)]
                      for i in range(6)])
    np.testing.assert_allclose(K, brute, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(kernel_diag(spec, XA, TA), np.diag(kernel_matrix(spec, XA, TA)),
                               rtol=1e-14)


@settings(max_examples=200, deadline=None)
@given(t=st.floats(1e-3, 1e3), t2=st.floats(1e-3, 1e3), L=st.floats(0.05, 5.0))
def test_min_power_identity(t, t2, L):
    assert min(t, t2) ** L == pytest.approx(min(t**L, t2**L), rel=1e-14)
    p = TemporalCorrParams(L)
    assert temporal_corr(t, t2, p) == temporal_corr(t2, t, p)


@settings(max_examples=200, deadline=None)
@given(h=st.lists(st.floats(-5, 5), min_size=3, max_size=3),
       rho=st.lists(st.floats(0.05, 5), min_size=3, max_size=3),
       c=st.floats(0.1, 10), nu=st.sampled_from([0.5, 1.5, 2.5]))
def test_matern_scale_invariance(h, rho, c, nu):
    p = MaternParams(1.3, tuple(rho), nu)
    q = MaternParams(1.3, tuple(c * r for r in rho), nu)
    assert matern(np.multiply(c, h), q) == pytest.approx(matern(h, p), rel=1e-10, abs=1e-300)
    assert matern(h, p) == pytest.approx(matern(np.negative(h), p), rel=1e-15)
    assert 0 < matern(h, p) <= 1.3 or matern(h, p) == 0.0  # underflow only at huge lags


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 25),
       variant=st.sampled_from(VARIANTS))
def test_kernel_matrix_psd(seed, n, variant):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, variant, 2)
    X = rng.random((n, 2))
    T = rng.choice([0.5, 1.0, 2.0, 4.0], n)
    K = kernel_matrix(spec, X, T)
    assert np.array_equal(K, K.T)
    L, jitter = cholesky_with_jitter(K)
    assert jitter <= 1e-7 * np.mean(np.diag(K))


def test_matern_correlation_monotone():
    r = np.linspace(0, 5, 50)
    for nu in (0.5, 1.5, 2.5):
        vals = [matern_correlation(x, nu) for x in r]
        assert np.all(np.diff(vals) < 0)
        assert vals[0] == 1.0
