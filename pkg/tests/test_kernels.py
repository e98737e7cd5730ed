import math

import numpy as np
import pytest
from scipy import integrate

from hawkesnet import kernels as K
from hawkesnet.exceptions import DivergentIntegralError, NotSupercriticalError
from hawkesnet.grid import GridFunction


def test_exponential_basics():
    k = K.Exponential(2.0, 1.0)
    assert k.total_mass() == 2.0
    assert k.laplace(1.0) == pytest.approx(1.0)
    assert float(k(0.0)) == 2.0
    assert float(k(-1.0)) == 0.0
    assert K.classify(k) == K.SUPERCRITICAL
    assert K.classify(K.Exponential(1, 2)) == K.SUBCRITICAL
    assert K.classify(K.Exponential(1, 1)) == K.CRITICAL


def test_rejects_bad_parameters():
    with pytest.raises(ValueError):
        K.Exponential(-1.0, 1.0)
    with pytest.raises(ValueError):
        K.Rectangular(1.0, 0.0)


def test_branching_exponent_exponential():
    # root of a/(alpha+b) = 1
    assert K.branching_exponent(K.Exponential(2, 1)) == pytest.approx(1.0, abs=1e-12)
    assert K.branching_exponent(K.Exponential(5, 2)) == pytest.approx(3.0, abs=1e-12)
    with pytest.raises(NotSupercriticalError):
        K.branching_exponent(K.Exponential(1, 2))


def test_branching_exponent_rectangular_against_brentq():
    k = K.Rectangular(1.5, 2.0)
    ref = __import__("scipy.optimize", fromlist=["brentq"]).brentq(
        lambda a: 1.5 * (1 - math.exp(-2 * a)) / a - 1, 1e-9, 10)
    assert K.branching_exponent(k) == pytest.approx(ref, abs=1e-10)


def test_laplace_divergence():
    with pytest.raises(DivergentIntegralError):
        K.Exponential(1, 1).laplace(-2.0)


def test_moment_laplace_by_quadrature():
    for k in (K.Exponential(2, 1), K.Rectangular(1.5, 2.0)):
        ref, _ = integrate.quad(lambda t: t * float(k(t)) * math.exp(-0.7 * t), 0, 60, limit=200, points=[2.0])
        assert k.moment_laplace(0.7) == pytest.approx(ref, rel=1e-8)


def test_closed_convolution_power_matches_quadrature():
    k = K.Exponential(2.0, 1.0)
    T, dt = 4.0, 1e-3
    for n in (2, 3, 5):
        closed = K.convolution_power(k, n, T, dt, method="closed").values
        quad = K.convolution_power(k, n, T, dt, method="quadrature").values
        assert np.max(np.abs(closed - quad)) / np.max(closed) < 1e-4


def test_convolution_power_integral():
    # int_0^inf phi^{*n} = Lambda^n
    k = K.Exponential(1.0, 2.0)
    g = K.convolution_power(k, 3, 40.0, 1e-3)
    assert g.integral() == pytest.approx(0.125, rel=1e-5)


def test_tabulated_kernel_round_trip():
    grid = GridFunction(0.0, 0.01, np.exp(-np.arange(301) * 0.01))
    k = K.Tabulated(grid)
    assert k.total_mass() == pytest.approx(1 - math.exp(-3), rel=1e-4)
    k2 = K.kernel_from_config(k.to_config())
    assert np.allclose(k2(np.linspace(0, 3, 7)), k(np.linspace(0, 3, 7)))


def test_sample_lags_distribution():
    rng = np.random.default_rng(0)
    lags = K.Exponential(2, 4).sample_lags(rng, 20000)
    assert lags.mean() == pytest.approx(0.25, rel=0.03)
    r = K.Rectangular(1.0, 3.0).sample_lags(rng, 20000)
    assert r.min() >= 0 and r.max() <= 3.0


def test_kernel_from_config_strings():
    assert K.kernel_from_config("exponential:2,1") == K.Exponential(2.0, 1.0)
    assert K.kernel_from_config({"kind": "rectangular", "c": 1, "tau": 2}) == K.Rectangular(1.0, 2.0)
    with pytest.raises(ValueError):
        K.kernel_from_config("gamma:1,2")
