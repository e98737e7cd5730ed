"""Mean-field systems: the Poisson limit, propagation of chaos and the
fluctuation statistics of the particle counts."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels as K
from .engine import EventLog, SystemSpec, simulate_counts
from .engine import _core
from .exceptions import ExplosionError, InsufficientReplicasWarning, RegimeMismatchWarning
from .graph import Complete
from .intensity import Linear, as_intensity
from .rng import generator, map_replicas, replica_generators
from .stats import SlopeFit, TestVerdict, ks_test, loglog_slope
from .volterra import growth_constants, solve_mean

DEFAULT_EPOCH = 0.05
SMALL_RATIO = 0.1
LARGE_RATIO = 10.0

SUBCRITICAL = "subcritical"
SUPER_SMALL = "super-small-t"
SUPER_LARGE = "super-large-t"
INTERMEDIATE = "intermediate"


def _limit_rate(kernel, h, T, dt):
    dt = min(1e-3, T / 1000) if dt is None else dt
    return solve_mean(kernel, h, T, dt, check=False)


def simulate_limit(kernel: K.Kernel, h, T: float, seed=0, n: int = 1, dt: float | None = None,
                   epoch: float = DEFAULT_EPOCH, rng: np.random.Generator | None = None) -> EventLog:
    """``n`` independent copies of the limit process.

    Each copy is a Poisson process with deterministic intensity
    ``h(int_0^t phi(t-u) dm_u) = m'_t``, simulated by thinning against the
    maximum of ``m'`` over epochs of length ``epoch``.
    """
    sol = _limit_rate(kernel, as_intensity(h), T, dt)
    gen = generator(seed) if rng is None else rng
    _, n_cand, nodes, times = _core.poisson_grid(n, sol.dm.values, 0.0, sol.dm.dt, float(T), float(epoch),
                                                 gen, np.zeros(0), True)
    order = np.argsort(times, kind="stable")
    return EventLog(nodes[order], times[order], n, T, int(n_cand))


def limit_counts(kernel: K.Kernel, h, T: float, n: int, replicas: int, seed=0, snapshots=None,
                 dt: float | None = None, epoch: float = DEFAULT_EPOCH) -> np.ndarray:
    """Counts of ``n`` limit copies at ``snapshots``; shape ``(replicas, n_snap, n)``."""
    sol = _limit_rate(kernel, as_intensity(h), T, dt)
    snaps = np.sort(np.asarray([T] if snapshots is None else snapshots, dtype=float))
    out = []
    for g in replica_generators(seed, replicas, key=3):
        c, *_ = _core.poisson_grid(n, sol.dm.values, 0.0, sol.dm.dt, float(T), float(epoch), g, snaps, False)
        out.append(c)
    return np.stack(out)


@dataclass
class ChaosReport:
    """Coupling error between ``N`` particles and ``N`` independent limit copies.

    ``estimate[k]`` is the mean over replicas of the node-averaged
    ``sup_{[0,T]} |Z^{N,i} - Zbar^i|`` (nodes are exchangeable, so averaging
    over them keeps the expectation and lowers the variance).  ``tv`` is the
    same for the total variation ``int |d(Z^{N,i} - Zbar^i)|``, which bounds
    the sup.
    """

    N: np.ndarray
    estimate: np.ndarray
    stderr: np.ndarray
    tv: np.ndarray
    tv_stderr: np.ndarray
    replicas: int
    T: float
    fit: SlopeFit | None = None
    tv_fit: SlopeFit | None = None
    extra: dict = field(default_factory=dict)

    @property
    def slope(self):
        return None if self.fit is None else self.fit.slope

    def to_rows(self):
        return [{"N": int(n), "sup_error": float(e), "sup_stderr": float(s), "tv_error": float(t),
                 "tv_stderr": float(ts)}
                for n, e, s, t, ts in zip(self.N, self.estimate, self.stderr, self.tv, self.tv_stderr)]


def _chaos_one(N, mu, kernel, T, sol, epoch, cap):
    def run(g):
        status, t, _, cA, cB, sup_d, tv, *_ = _core.chaos_exp(
            N, float(mu), float(kernel.a), float(kernel.b), float(T), sol.dm.values, 0.0, sol.dm.dt,
            float(epoch), g, int(cap), False)
        if status == _core.EXPLODED:
            raise ExplosionError(f"event cap {cap} reached in coupled run", int(cA.sum() + cB.sum()), t)
        return sup_d.mean(), tv.mean()
    return run


def chaos_error(kernel: K.Exponential, mu: float, T: float, N_list, replicas: int = 200, seed=0,
                dt: float | None = None, epoch: float = DEFAULT_EPOCH, workers: int | None = None,
                cap: int = 10**8) -> ChaosReport:
    """Estimate ``E sup_{[0,T]} |Z^{N,1} - Zbar^1|`` for every ``N`` and fit its log-log slope.

    The ``N`` particles and ``N`` limit copies share Poisson marks: particle
    ``i`` and copy ``i`` read the same candidates ``(s, z)`` and each accepts
    under its own intensity.
    """
    if not isinstance(kernel, K.Exponential):
        raise TypeError("the coupled loop needs an exponential kernel")
    N_list = np.asarray(sorted(int(n) for n in N_list))
    sol = _limit_rate(kernel, Linear(mu), T, dt)
    est, se, tv, tv_se = [], [], [], []
    for j, N in enumerate(N_list):
        rngs = replica_generators(seed, replicas, key=1000 + int(N))
        res = np.asarray(map_replicas(_chaos_one(int(N), mu, kernel, T, sol, epoch, cap), rngs, workers))
        est.append(res[:, 0].mean())
        tv.append(res[:, 1].mean())
        d = math.sqrt(replicas) if replicas > 1 else math.nan
        se.append(res[:, 0].std(ddof=1) / d if replicas > 1 else math.nan)
        tv_se.append(res[:, 1].std(ddof=1) / d if replicas > 1 else math.nan)
    est, se, tv, tv_se = map(np.asarray, (est, se, tv, tv_se))
    report = ChaosReport(N_list, est, se, tv, tv_se, replicas, T)
    if N_list.size >= 2 and replicas > 1:
        # half the separation expected at rate N^(-1/2), in log units
        gap = 0.25 * np.min(np.diff(np.log(N_list)))
        if np.any(se > gap * est):
            warnings.warn("standard errors exceed half the expected spacing between N values",
                          InsufficientReplicasWarning, stacklevel=2)
    if N_list.size >= 3 and np.all(est > 0):
        report.fit = loglog_slope(N_list, est, se if np.all(se > 0) else None)
        report.tv_fit = loglog_slope(N_list, tv, tv_se if np.all(tv_se > 0) else None)
    return report


@dataclass
class CltSample:
    """Normalized particle counts ``s * (Z^{N,i}_T / m_T - 1)``, ``i < ell``.

    ``scale`` names the factor ``s``: ``"m"`` for ``m_T^(1/2)``, ``"N"`` for ``N^(1/2)``.
    """

    regime: str
    values: np.ndarray
    scale: str
    m_T: float
    N: int
    T: float
    sigma2: float | None = None

    @property
    def replicas(self) -> int:
        return self.values.shape[0]

    @property
    def ratio(self) -> float:
        return self.m_T / self.N

    def cross_correlation(self, i: int = 0, j: int = 1) -> float:
        return float(np.corrcoef(self.values[:, i], self.values[:, j])[0, 1])

    def variance(self, i: int = 0) -> float:
        return float(np.var(self.values[:, i], ddof=1))

    def normality(self, i: int = 0, alpha: float = 0.01) -> TestVerdict:
        return ks_test(self.values[:, i], "normal", alpha)


def classify_clt(kernel: K.Kernel, m_T: float, N: int) -> str:
    if K.classify(kernel) == K.SUBCRITICAL:
        return SUBCRITICAL
    r = m_T / N
    if r < SMALL_RATIO:
        return SUPER_SMALL
    if r > LARGE_RATIO:
        return SUPER_LARGE
    return INTERMEDIATE


def _mean_at(kernel, mu, T, dt=None):
    sol = solve_mean(kernel, mu, T, dt if dt is not None else min(1e-3, T / 2000), check=False)
    return float(sol.m.values[-1])


def particle_counts(kernel: K.Kernel, mu, T: float, N: int, replicas: int, seed=0, snapshots=None,
                    workers: int | None = None, key: int = 0, cap: int | None = None) -> np.ndarray:
    """Counts of an ``N``-particle mean-field system; shape ``(replicas, n_snap, N)``."""
    spec = SystemSpec(Complete(N), kernel, mu, T, seed, cap=cap or 10**8)
    snaps = [T] if snapshots is None else snapshots
    rngs = replica_generators(seed, replicas, key=key)
    return np.stack(map_replicas(lambda g: simulate_counts(spec, snaps, rng=g).counts, rngs, workers))


def clt_sample(kernel: K.Kernel, mu: float, T: float, N: int, ell: int = 2, replicas: int = 1000,
               seed=0, workers: int | None = None, m_T: float | None = None) -> CltSample:
    """Per-replica fluctuation vectors of the first ``ell`` particles.

    Subcritical kernels and the small ``m_T / N`` regime use
    ``m_T^(1/2) (Z / m_T - 1)``; the large-ratio regime uses
    ``N^(1/2) (Z / m_T - 1)``, whose limit variance is ``sigma2``.
    """
    if ell > N:
        raise ValueError("ell cannot exceed N")
    m_T = _mean_at(kernel, mu, T) if m_T is None else m_T
    regime = classify_clt(kernel, m_T, N)
    if regime == INTERMEDIATE:
        warnings.warn(f"m_T/N = {m_T / N:.3g} lies in [{SMALL_RATIO}, {LARGE_RATIO}]",
                      RegimeMismatchWarning, stacklevel=2)
    z = particle_counts(kernel, mu, T, N, replicas, seed, workers=workers, key=2)[:, 0, :ell]
    rel = z / m_T - 1.0
    sigma2 = None
    if regime == SUPER_LARGE:
        vals, scale = math.sqrt(N) * rel, "N"
        sigma2 = growth_constants(kernel, mu).sigma2
    else:
        vals, scale = math.sqrt(m_T) * rel, "m"
    return CltSample(regime, vals, scale, m_T, N, T, sigma2)


@dataclass
class MeanCheck:
    N: int
    mean: float
    stderr: float
    target: float

    @property
    def z_score(self) -> float:
        return (self.mean - self.target) / self.stderr


def mean_identity(kernel: K.Kernel, mu: float, T: float, N_list, replicas: int = 1000, seed=0,
                  workers: int | None = None) -> list[MeanCheck]:
    """Replica mean of ``Z^{N,1}_T`` against ``m_T`` for each ``N``."""
    m_T = _mean_at(kernel, mu, T)
    out = []
    for N in N_list:
        z = particle_counts(kernel, mu, T, int(N), replicas, seed, workers=workers, key=10 + int(N))[:, 0, 0]
        out.append(MeanCheck(int(N), float(z.mean()), float(z.std(ddof=1) / math.sqrt(replicas)), m_T))
    return out


def lln_error(kernel: K.Kernel, mu: float, T: float, N: int, replicas: int = 200, seed=0,
              workers: int | None = None) -> tuple[float, float]:
    """``E |Z^{N,1}_T / m_T - 1|`` with its standard error."""
    m_T = _mean_at(kernel, mu, T)
    z = particle_counts(kernel, mu, T, N, replicas, seed, workers=workers, key=20)[:, 0, 0]
    r = np.abs(z / m_T - 1.0)
    return float(r.mean()), float(r.std(ddof=1) / math.sqrt(replicas))


__all__ = ["ChaosReport", "CltSample", "MeanCheck", "chaos_error", "classify_clt", "clt_sample",
           "limit_counts", "lln_error", "mean_identity", "particle_counts", "simulate_limit"]
