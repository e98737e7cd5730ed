import math
import warnings

import numpy as np
import pytest

from hawkesnet import kernels as K
from hawkesnet.exceptions import CriticalRegimeError, StepTooCoarseWarning
from hawkesnet.intensity import Lipschitz
from hawkesnet.volterra import growth_constants, renewal_density, solve_mean


def _closed_mean(t):
    # Exponential(2, 1), mu = 1: m'_t = 2 e^t - 1, so m_t = 2 e^t - 2 - t
    return 2 * math.exp(t) - 2 - t


def test_supercritical_mean_closed_form():
    sol = solve_mean(K.Exponential(2, 1), 1.0, 1.0, 1e-3)
    assert abs(sol.m.values[-1] - (2 * math.e - 3)) / (2 * math.e - 3) < 1e-4
    t = sol.m.times[::100]
    assert np.allclose(sol.m.values[::100], [_closed_mean(s) for s in t], rtol=1e-5)


def test_subcritical_rate_converges():
    sol = solve_mean(K.Exponential(1, 2), 1.0, 50.0, 1e-3)
    assert sol.dm.values[-1] == pytest.approx(2.0, rel=5e-3)


def test_renewal_density_exponential():
    # Gamma(t) = a e^{(a-b)t}
    gamma, ups = renewal_density(K.Exponential(2, 1), 2.0, 1e-3)
    t = gamma.times
    assert np.max(np.abs(gamma.values - 2 * np.exp(t)) / (2 * np.exp(t))) < 1e-5
    assert ups.values[-1] == pytest.approx(2 * (math.exp(2) - 1), rel=1e-5)


def test_general_kernel_path_agrees_with_recursion():
    k = K.Exponential(0.5, 1.0)
    tab = K.Tabulated(__import__("hawkesnet.grid", fromlist=["GridFunction"]).GridFunction(
        0.0, 1e-2, k(np.arange(0, 3001) * 1e-2)))
    a = solve_mean(k, 1.0, 3.0, 1e-2, check=False).dm.values
    b = solve_mean(tab, 1.0, 3.0, 1e-2, check=False).dm.values
    assert np.max(np.abs(a - b)) < 1e-3


def test_nonlinear_map_reduces_to_linear():
    k = K.Exponential(1, 2)
    lin = solve_mean(k, 1.0, 5.0, 1e-3, check=False).dm.values
    nl = solve_mean(k, Lipschitz(lambda x: 1.0 + x, 1.0), 5.0, 1e-3, check=False).dm.values
    assert np.allclose(lin, nl, rtol=1e-9)


def test_coarse_step_warns():
    with pytest.warns(StepTooCoarseWarning):
        solve_mean(K.Exponential(4, 1), 1.0, 3.0, 0.1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        solve_mean(K.Exponential(2, 1), 1.0, 1.0, 1e-3)


def test_growth_constants():
    sub = growth_constants(K.Exponential(1, 2), 1.0)
    assert sub.a0 == pytest.approx(2.0)
    sup = growth_constants(K.Exponential(2, 1), 1.0)
    assert sup.alpha0 == pytest.approx(1.0, abs=1e-10)
    assert sup.a0 == pytest.approx(2.0, abs=1e-6)
    assert sup.sigma2 == pytest.approx(1.5, abs=1e-3)
    assert sup.sigma2_tail_error < 1e-3
    with pytest.raises(CriticalRegimeError):
        growth_constants(K.Exponential(1, 1), 1.0)
