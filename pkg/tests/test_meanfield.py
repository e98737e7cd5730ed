import math
import warnings

import numpy as np
import pytest

from hawkesnet import kernels as K
from hawkesnet import meanfield as MF
from hawkesnet.exceptions import RegimeMismatchWarning
from hawkesnet.volterra import solve_mean


def test_limit_process_mean():
    k = K.Exponential(1.0, 2.0)
    c = MF.limit_counts(k, 1.0, 5.0, n=50, replicas=20, seed=0)
    m5 = solve_mean(k, 1.0, 5.0, 1e-3, check=False).m.values[-1]
    est = c[:, 0, :].mean()
    assert est == pytest.approx(m5, rel=4 / math.sqrt(1000 * m5))


def test_simulate_limit_log():
    log = MF.simulate_limit(K.Exponential(1.0, 2.0), 1.0, 10.0, seed=1, n=3)
    assert log.n_nodes == 3
    assert np.all(np.diff(log.times) >= 0)


def test_chaos_small():
    rep = MF.chaos_error(K.Exponential(1.0, 2.0), 1.0, 2.0, [5, 20, 80], replicas=30, seed=0)
    assert np.all(rep.estimate > 0)
    # the total variation dominates the sup distance
    assert np.all(rep.tv >= rep.estimate - 1e-12)
    assert rep.fit is not None and rep.fit.slope < 0
    assert len(rep.to_rows()) == 3


@pytest.mark.filterwarnings("ignore::hawkesnet.exceptions.InsufficientReplicasWarning")
def test_chaos_is_deterministic():
    a = MF.chaos_error(K.Exponential(1.0, 2.0), 1.0, 1.0, [4, 8, 16], replicas=5, seed=3, workers=2)
    b = MF.chaos_error(K.Exponential(1.0, 2.0), 1.0, 1.0, [4, 8, 16], replicas=5, seed=3, workers=1)
    assert np.array_equal(a.estimate, b.estimate)


def test_classify_clt():
    sup = K.Exponential(2.0, 1.0)
    assert MF.classify_clt(K.Exponential(1, 2), 100, 10) == MF.SUBCRITICAL
    assert MF.classify_clt(sup, 1.0, 100) == MF.SUPER_SMALL
    assert MF.classify_clt(sup, 2000.0, 100) == MF.SUPER_LARGE
    assert MF.classify_clt(sup, 100.0, 100) == MF.INTERMEDIATE


def test_clt_intermediate_warns():
    with pytest.warns(RegimeMismatchWarning):
        s = MF.clt_sample(K.Exponential(2.0, 1.0), 1.0, 2.0, 10, replicas=20, seed=0)
    assert s.regime == MF.INTERMEDIATE


def test_clt_sample_shape():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s = MF.clt_sample(K.Exponential(1.0, 2.0), 1.0, 20.0, 20, replicas=50, seed=0)
    assert s.values.shape == (50, 2)
    assert s.scale == "m"
    with pytest.raises(ValueError):
        MF.clt_sample(K.Exponential(1.0, 2.0), 1.0, 1.0, 1, ell=2)


def test_mean_identity_small():
    (check,) = MF.mean_identity(K.Exponential(1.0, 2.0), 1.0, 5.0, [5], replicas=200, seed=0)
    assert abs(check.z_score) < 4
