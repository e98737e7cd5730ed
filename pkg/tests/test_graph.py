import numpy as np
import pytest

from hawkesnet.exceptions import InvalidMassError
from hawkesnet.graph import (Complete, Custom, LatticeBox, a_power, gaussian_kernel, local_clt_error,
                             make_baseline, q_lambda, q_lambda_box, topology_from_config,
                             validate_assumption)
from hawkesnet.kernels import Exponential


def _dense(topo):
    src, dst, w = topo.edges()
    m = np.zeros((topo.n_nodes, topo.n_nodes))
    np.add.at(m, (dst, src), w)  # row i collects its in-neighbours
    return m


def test_complete_weights():
    t = Complete(4)
    m = _dense(t)
    assert np.allclose(m, 0.25)
    assert t.is_meanfield


@pytest.mark.parametrize("boundary", ["periodic", "absorbing"])
def test_lattice_apply_matches_dense(boundary):
    t = LatticeBox(2, 5, boundary)
    v = np.random.default_rng(0).random(t.n_nodes)
    assert np.allclose(t.apply(v), _dense(t) @ v)


def test_lattice_coordinates():
    t = LatticeBox(1, 9)
    assert t.n_nodes == 9
    assert tuple(t.coords[t.origin]) == (0,)
    assert t.index([3]) - t.origin == 3


def test_custom_topology_round_trip():
    t = Custom(3, ((0, 1, 0.5), (1, 2, 0.25)))
    t2 = topology_from_config(t.to_config())
    assert t2 == t
    src, w = t.in_neighbours(2)
    assert list(src) == [1] and list(w) == [0.25]


def test_a_power_one_dimension():
    assert np.allclose(a_power(1, 2).values, np.array([1, 2, 3, 2, 1]) / 9)


def test_q_lambda_row_sum():
    q = q_lambda(1, 0.5, 1e-14)
    assert q.row_sum() == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(InvalidMassError):
        q_lambda(1, 1.2)


def test_q_lambda_box_on_constant_baseline():
    t = LatticeBox(1, 21)
    out = q_lambda_box(t, 0.5, np.full(t.n_nodes, 1.0), 1e-14)
    assert np.allclose(out, 2.0)


def test_local_clt():
    assert local_clt_error(1, 50) < 5e-4
    # one step of the lazy walk in d=1 has variance 2/3
    var = 2.0 / 3.0 * 2.0
    assert float(gaussian_kernel(1, 2.0, 0.0)) == pytest.approx(1 / np.sqrt(2 * np.pi * var))
    x = np.array([[1.0, 0.5]])
    var2 = 2.0 / 5.0 * 3.0
    ref = np.exp(-1.25 / (2 * var2)) / (2 * np.pi * var2)
    assert float(gaussian_kernel(2, 3.0, x)[0]) == pytest.approx(ref)


def test_baselines():
    t = LatticeBox(1, 5)
    alt = make_baseline(t, {"kind": "alternating", "low": 0, "high": 2})
    assert set(alt.tolist()) == {0.0, 2.0}
    assert alt[t.origin] == 0.0
    u1 = make_baseline(t, {"kind": "uniform", "low": 0, "high": 2, "seed": 4})
    u2 = make_baseline(t, {"kind": "uniform", "low": 0, "high": 2, "seed": 4})
    assert np.array_equal(u1, u2)
    with pytest.raises(ValueError):
        make_baseline(t, [1.0, 2.0])


def test_validate_assumption():
    t = Complete(10)
    ok = validate_assumption(t, 1.0, 1.0, Exponential(1, 2), h0=1.0, envelope=1.0)
    assert ok.passed and ok.max_multiplier == pytest.approx(1.0)
    bad = validate_assumption(t, 2.0, 1.0, Exponential(1, 2), envelope=1.0)
    assert not bad.passed and bad.offending == list(range(10))
    star = Custom(3, ((0, 1, 1.0), (0, 2, 1.0)))
    rep = validate_assumption(star, 1.0, 1.0, Exponential(1, 2), envelope=1.5)
    assert rep.offending == [0]
