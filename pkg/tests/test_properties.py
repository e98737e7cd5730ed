"""Property suites: convolution identities, stochasticity, engine equivalence, determinism."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hawkesnet import kernels as K
from hawkesnet.engine import SystemSpec, audit_log, impulsion_spec, simulate
from hawkesnet.graph import Complete, Custom, LatticeBox, a_power
from hawkesnet.grid import GridFunction
from hawkesnet.rng import generator

seeds = st.integers(0, 2**32 - 1)


@st.composite
def step_functions(draw):
    n = draw(st.integers(1, 5))
    u = sorted(draw(st.lists(st.floats(0.0, 2.5), min_size=n, max_size=n)))
    c = draw(st.lists(st.floats(0.1, 3.0), min_size=n, max_size=n))
    return np.array(u), np.array(c)


def _piecewise_integral(fn, knots):
    # 2-point Gauss-Legendre per piece is exact for piecewise-linear integrands
    knots = np.unique(knots)
    lo, hi = knots[:-1], knots[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    r = 1 / np.sqrt(3)
    return float(np.sum(half * (fn(mid - r * half) + fn(mid + r * half))))


@given(step_functions(), st.floats(0.5, 3.0), st.floats(0.2, 2.0))
@settings(max_examples=25)
def test_convolution_identity(alpha, a, b):
    # int_0^t int_0^s phi(s-u) dalpha(u) ds == int_0^t phi(t-s) alpha(s) ds
    u, c = alpha
    grid = GridFunction(0.0, 0.05, a * np.exp(-b * np.arange(61) * 0.05) * (1 + 0.3 * np.sin(np.arange(61))))
    phi = K.Tabulated(grid)
    t = 3.0
    inner = lambda s: sum(ci * phi(s - ui) * (s >= ui) for ui, ci in zip(u, c))  # noqa: E731
    outer = lambda s: phi(t - s) * (c[None, :] * (u[None, :] <= s[:, None])).sum(axis=1)  # noqa: E731
    kinks = np.concatenate([[0.0, t], u, (u[:, None] + grid.times[None, :]).ravel(), t - grid.times])
    kinks = kinks[(kinks >= 0) & (kinks <= t)]
    lhs = _piecewise_integral(inner, kinks)
    rhs = _piecewise_integral(outer, kinks)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)
    # both equal sum_j c_j Phi(t - u_j)
    assert lhs == pytest.approx(float(np.sum(c * phi.integral(t - u))), rel=1e-10, abs=1e-12)


kernel_strategy = st.one_of(
    st.builds(K.Exponential, st.floats(0.2, 3.0), st.floats(0.5, 3.0)),
    st.builds(K.Rectangular, st.floats(0.2, 2.0), st.floats(0.5, 3.0)),
)


@given(kernel_strategy, kernel_strategy, st.floats(0.5, 2.0))
@settings(max_examples=25)
def test_laplace_of_convolution_is_product(g, h, alpha):
    dt, T = 2e-3, 30.0
    t = dt * np.arange(int(T / dt) + 1)
    conv = K.discrete_convolution(g(t), h(t), dt)
    lhs = np.trapezoid(conv * np.exp(-alpha * t), dx=dt)
    assert lhs == pytest.approx(g.laplace(alpha) * h.laplace(alpha), rel=1e-2)


@given(st.integers(1, 3), st.integers(0, 30))
def test_lattice_powers_are_row_stochastic(d, n):
    if d == 3 and n > 12:
        n = 12
    m = a_power(d, n)
    assert np.all(m.values >= 0)
    assert m.row_sum() == pytest.approx(1.0, abs=1e-12)


@given(st.integers(1, 2), st.integers(3, 9))
def test_periodic_box_is_row_stochastic(d, L):
    topo = LatticeBox(d, L)
    assert np.allclose(topo.apply(np.ones(topo.n_nodes)), 1.0)


def _event_identical(a, b):
    return (np.array_equal(a.nodes, b.nodes) and a.n_candidates == b.n_candidates
            and np.allclose(a.times, b.times, rtol=1e-12, atol=0))


topologies = st.sampled_from([Complete(1), Complete(6), LatticeBox(1, 9), LatticeBox(2, 3, "absorbing"),
                              Custom(3, ((0, 1, 0.7), (1, 2, 0.4), (2, 0, 0.3), (1, 1, 0.2)))])


@given(topologies, seeds, st.floats(0.1, 1.5), st.floats(0.5, 3.0), st.floats(0.1, 2.0))
@settings(max_examples=30)
def test_fast_and_generic_paths_agree(topo, seed, a, b, mu):
    spec = SystemSpec(topo, K.Exponential(a, b), mu, 8.0)
    assert _event_identical(simulate(spec, generator(seed), method="fast"),
                            simulate(spec, generator(seed), method="generic"))


@given(seeds)
@settings(max_examples=10)
def test_fast_and_generic_agree_with_impulse(seed):
    spec = impulsion_spec(LatticeBox(1, 11), K.Exponential(2.0, 1.0), 2.5)
    assert _event_identical(simulate(spec, generator(seed), method="fast"),
                            simulate(spec, generator(seed), method="generic"))


@given(topologies, seeds, st.integers(1, 20))
@settings(max_examples=30)
def test_audit_reverifies_acceptances(topo, seed, every):
    spec = SystemSpec(topo, K.Exponential(1.0, 1.5), 1.0, 10.0)
    log = simulate(spec, generator(seed), audit=True, audit_every=every)
    rep = audit_log(log, spec)
    assert rep.passed
    assert rep.n_checked == len(log.audit)


@given(seeds)
@settings(max_examples=10)
def test_event_logs_are_byte_identical(tmp_path_factory, seed):
    spec = SystemSpec(LatticeBox(1, 7), K.Exponential(1.0, 2.0), 1.0, 10.0, seed=seed)
    d = tmp_path_factory.mktemp("det")
    simulate(spec).to_csv(d / "a.csv", ["seed"])
    simulate(spec).to_csv(d / "b.csv", ["seed"])
    assert (d / "a.csv").read_bytes() == (d / "b.csv").read_bytes()
