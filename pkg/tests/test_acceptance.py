"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import math
import time
import warnings

import numpy as np
import pytest
from scipy import optimize

from hawkesnet import cli, impulsion, meanfield
from hawkesnet import kernels as K
from hawkesnet.engine import impulsion_spec, residuals_total, simulate
from hawkesnet.graph import LatticeBox, local_clt_error
from hawkesnet.lattice import lln_subcritical, lln_supercritical
from hawkesnet.rng import replica_generators
from hawkesnet.stats import ks_test, loglog_slope
from hawkesnet.volterra import growth_constants, solve_mean

import test_properties as props

SUB = K.Exponential(1.0, 2.0)
SUPER = K.Exponential(2.0, 1.0)
EXTINCTION_LAM2 = 0.20319
# monitored lattice nodes, as offsets from the origin
OFFSETS = (-50, -1, 0, 1, 50)


def _warm():
    # compile the jitted solvers outside the timed region
    solve_mean(SUPER, 1.0, 0.01, 1e-3, check=False)


def _monitored(topo):
    return [topo.index([k]) for k in OFFSETS]


def test_c01_volterra_accuracy(verdict):
    _warm()
    t0 = time.perf_counter()
    sol = solve_mean(SUPER, 1.0, 1.0, 1e-3)
    dt = time.perf_counter() - t0
    exact = 2 * math.e - 3
    err = abs(sol.m.values[-1] - exact) / exact
    ok = verdict(1, err < 1e-4 and dt < 1.0, f"rel err {err:.2e} (< 1e-4), {dt:.3f} s (< 1 s)")
    assert ok


def test_c02_subcritical_constant(verdict):
    _warm()
    t0 = time.perf_counter()
    sol = solve_mean(SUB, 1.0, 50.0, 1e-3)
    dt = time.perf_counter() - t0
    err = abs(sol.dm.values[-1] / 2.0 - 1)
    ok = verdict(2, err < 5e-3 and dt < 1.0, f"m'_50 = {sol.dm.values[-1]:.6f}, rel err {err:.2e}, {dt:.3f} s")
    assert ok


def test_c03_supercritical_constants(verdict):
    t0 = time.perf_counter()
    gc = growth_constants(SUPER, 1.0)
    dt = time.perf_counter() - t0
    ok = (abs(gc.alpha0 - 1) < 1e-10 and abs(gc.a0 - 2) < 1e-6 and abs(gc.sigma2 - 1.5) < 1e-3
          and gc.sigma2_tail_error < 1e-3 and dt < 5.0)
    ok = verdict(3, ok, f"alpha0 {gc.alpha0:.12f}, a0 {gc.a0:.9f}, sigma2 {gc.sigma2:.6f} "
                        f"(tail {gc.sigma2_tail:.2e} +- {gc.sigma2_tail_error:.1e}), {dt:.2f} s")
    assert ok


def test_c04_chaos_rate(verdict):
    t0 = time.perf_counter()
    rep = meanfield.chaos_error(SUB, 1.0, 10.0, [10, 100, 1000], replicas=200, seed=0)
    dt = time.perf_counter() - t0
    s = rep.fit.slope
    ok = verdict(4, -0.65 <= s <= -0.35 and dt <= 600,
                 f"slope {s:.3f} CI ({rep.fit.ci[0]:.3f}, {rep.fit.ci[1]:.3f}), errors "
                 f"{np.array2string(rep.estimate, precision=4)}, {dt:.1f} s")
    assert ok


def test_c05_mean_identity(verdict):
    t0 = time.perf_counter()
    checks = meanfield.mean_identity(SUPER, 1.0, 2.0, [1, 10, 100], replicas=1000, seed=0)
    dt = time.perf_counter() - t0
    z = [c.z_score for c in checks]
    ok = verdict(5, all(abs(v) < 3 for v in z) and dt <= 300,
                 f"m_T {checks[0].target:.4f}, z-scores {', '.join(f'{v:.2f}' for v in z)}, {dt:.1f} s")
    assert ok


def test_c06_subcritical_clt(verdict):
    s = meanfield.clt_sample(SUB, 1.0, 200.0, 200, ell=2, replicas=1000, seed=0)
    ks = [s.normality(i, 0.01) for i in range(2)]
    rho = s.cross_correlation()
    ok = verdict(6, s.regime == meanfield.SUBCRITICAL and all(v.passed for v in ks) and abs(rho) < 0.1,
                 f"regime {s.regime}, KS p {ks[0].pvalue:.3f}, {ks[1].pvalue:.3f}, corr {rho:.3f}")
    assert ok


def test_c07_supercritical_regime_split(verdict):
    big = meanfield.clt_sample(SUPER, 1.0, 8.0, 50, ell=2, replicas=1000, seed=0)
    small = meanfield.clt_sample(SUPER, 1.0, 2.0, 200, ell=2, replicas=1000, seed=0)
    var = [big.variance(i) for i in range(2)]
    ok_big = (big.regime == meanfield.SUPER_LARGE and big.cross_correlation() > 0.8
              and all(abs(v / 1.5 - 1) <= 0.25 for v in var))
    ok_small = small.regime == meanfield.SUPER_SMALL and small.cross_correlation() < 0.2
    ok = verdict(7, ok_big and ok_small,
                 f"{big.regime} (m_T/N {big.ratio:.1f}): corr {big.cross_correlation():.3f}, var "
                 f"{var[0]:.3f}, {var[1]:.3f}; {small.regime} (m_T/N {small.ratio:.3f}): corr "
                 f"{small.cross_correlation():.3f}")
    assert ok


def test_c08_lattice_subcritical_lln(verdict):
    topo = LatticeBox(1, 201, "periodic")
    rep = lln_subcritical(topo, {"kind": "alternating", "low": 0.0, "high": 2.0}, SUB, 200.0, replicas=200,
                          seed=0, monitored=_monitored(topo))
    err = rep.relative_error()
    ok = verdict(8, bool(np.all(err < 0.05)), f"max rel err {err.max():.4f} (< 0.05), targets "
                                              f"{np.array2string(rep.target, precision=4)}")
    assert ok


def test_c09_lattice_supercritical_flatness(verdict):
    topo = LatticeBox(1, 201, "periodic")
    mu = {"kind": "uniform", "low": 0.0, "high": 2.0, "seed": 0}
    rep = lln_supercritical(topo, mu, SUPER, 8.0, replicas=200, seed=0, monitored=_monitored(topo))
    err = np.abs(rep.estimate / 2.0 - 1)
    flat = rep.extra["flatness"]
    ok = verdict(9, bool(np.all(err <= 0.15)) and flat < 0.15,
                 f"medians {np.array2string(rep.estimate, precision=3)} vs a0 = 2, max rel err {err.max():.3f}, "
                 f"flatness {flat:.3f} (< 0.15)")
    assert ok


def test_c10_extinction(verdict):
    p = impulsion.extinction_probability(2.0)
    oracle = optimize.brentq(lambda s: math.exp(2.0 * (s - 1)) - s, 1e-9, 0.9, xtol=1e-15)
    est = impulsion.extinction_empirical(SUPER, replicas=10_000, seed=0)
    low = impulsion.extinction_empirical(K.Exponential(0.5, 1.0), replicas=10_000, seed=0)
    ok = (abs(p - oracle) < 1e-8 and abs(p - EXTINCTION_LAM2) < 5e-6
          and abs(est.empirical - p) <= 0.02 and low.empirical >= 0.99)
    ok = verdict(10, ok, f"closed form {p:.10f} (oracle {oracle:.10f}), empirical {est.empirical:.4f} +- "
                         f"{est.stderr:.4f}, Lambda = 0.5 empirical {low.empirical:.4f}")
    assert ok


def test_c11_total_process_residuals(verdict):
    topo = LatticeBox(1, 101)
    spec = impulsion_spec(topo, SUPER, 8.0)
    # the first replica whose cluster survives long enough
    for k, g in enumerate(replica_generators(0, 100, key=5)):
        log = simulate(spec, g)
        res = residuals_total(log, spec)
        if res.size >= 2000:
            break
    v = ks_test(res, "exp", 0.01)
    ok = verdict(11, res.size >= 2000 and v.passed, f"replica {k}: {res.size} residuals, KS D {v.statistic:.4f}, "
                                                    f"p {v.pvalue:.3f}")
    assert ok


def test_c12_local_clt(verdict):
    n = np.array([4, 16, 64, 256])
    err = np.array([local_clt_error(1, int(k)) for k in n])
    fit = loglog_slope(n, err)
    ok = verdict(12, fit.slope <= -1.2, f"errors {np.array2string(err, precision=3)}, slope {fit.slope:.3f}")
    assert ok


def test_c13_profile(verdict):
    t0 = time.perf_counter()
    rep = impulsion.profile(LatticeBox(1, 101), SUPER, [6.0, 8.0, 10.0], [-1.0, -0.5, 0.0, 0.5, 1.0],
                            replicas=1000, seed=0)
    dt = time.perf_counter() - t0
    ratios = rep.ratio_median[-1]
    ok_ratio = bool(np.all(np.abs(ratios - 1) <= 0.15))
    h_target = 1.0 / rep.alpha0
    ok_H = abs(rep.H_mean - h_target) <= 3 * rep.H_stderr
    p0 = impulsion.extinction_probability(2.0)
    ok_zero = abs(rep.zero_fraction - p0) <= 0.03
    ok = verdict(13, ok_ratio and ok_H and ok_zero and dt <= 900,
                 f"t=10 ratios {np.array2string(ratios, precision=3)} (within 0.15: {ok_ratio}); "
                 f"E[H] {rep.H_mean:.3f} +- {rep.H_stderr:.3f} vs {h_target:.3f} ({ok_H}); "
                 f"P(H=0) {rep.zero_fraction:.3f} vs {p0:.5f} ({ok_zero}); {dt:.0f} s")
    assert ok


def test_c14_property_suites(verdict, tmp_path_factory):
    suites = {
        "convolution identity": props.test_convolution_identity,
        "Laplace of convolution": props.test_laplace_of_convolution_is_product,
        "A^n row-stochastic": props.test_lattice_powers_are_row_stochastic,
        "fast/generic identical": props.test_fast_and_generic_paths_agree,
        "fast/generic with impulse": props.test_fast_and_generic_agree_with_impulse,
        "audit re-verification": props.test_audit_reverifies_acceptances,
    }
    failed = []
    for name, fn in suites.items():
        try:
            fn()
        except Exception:  # noqa: BLE001
            failed.append(name)
    try:
        props.test_event_logs_are_byte_identical(tmp_path_factory)
    except Exception:  # noqa: BLE001
        failed.append("event log byte identity")
    out = tmp_path_factory.mktemp("cli")
    args = ["impulse-extinction", "--replicas", "2000", "--seed", "7"]
    cli.main(args + ["--output-dir", str(out / "a")])
    cli.main(args + ["--output-dir", str(out / "b"), "--workers", "2"])
    if (out / "a" / "extinction.csv").read_bytes() != (out / "b" / "extinction.csv").read_bytes():
        failed.append("CLI byte identity")
    ok = verdict(14, not failed, f"{len(suites) + 2} suites, failed: {failed or 'none'}")
    assert ok
