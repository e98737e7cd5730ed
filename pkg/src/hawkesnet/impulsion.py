"""Impulsion systems: zero baselines and one virtual jump at the origin at time 0.

The total count of such a system is a scalar impulsion process, equivalently
the progeny of a branching cluster whose individuals have Poisson(Lambda)
children at lags drawn from ``phi / Lambda``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammainc, gammaln

from . import kernels as K
from .engine import EventLog, impulsion_spec, simulate, simulate_counts
from .exceptions import NoSurvivorsError
from .graph import LatticeBox, LatticeMatrix, a_powers, gaussian_kernel
from .rng import generator, map_replicas, replica_generators

GENERATION_CAP = 1000
POPULATION_CAP = 200


def extinction_probability(lam: float, tol: float = 1e-15) -> float:
    """Probability that the impulsion cluster dies out.

    ``1`` for ``lam <= 1``, ``0`` for ``lam = inf``, otherwise ``exp(-g lam)``
    with ``g`` the root in ``(0, 1)`` of ``g lam + log(1 - g) = 0``.  The
    root lies right of ``1 - 1/lam``, where the left side peaks; Newton steps
    that leave the bracket fall back to bisection.
    """
    if not lam > 0:
        raise ValueError("total mass must be positive")
    if math.isinf(lam):
        return 0.0
    if lam <= 1.0 + K.CRITICAL_TOL:
        return 1.0
    f = lambda g: g * lam + math.log1p(-g)  # noqa: E731
    lo, hi = 1.0 - 1.0 / lam, 1.0
    g = 0.5 * (lo + hi)
    for _ in range(200):
        fg = f(g)
        if fg > 0:
            lo = g
        else:
            hi = g
        d = lam - 1.0 / (1.0 - g)
        ng = g - fg / d if d != 0 else 0.5 * (lo + hi)
        if not lo < ng < hi:
            ng = 0.5 * (lo + hi)
        if abs(ng - g) <= tol * max(g, 1e-300) or hi - lo <= tol:
            g = ng
            break
        g = ng
    return math.exp(-g * lam)


@dataclass
class ExtinctionEstimate:
    lam: float
    closed_form: float
    empirical: float
    stderr: float
    cap_fraction: float
    survived_fraction: float
    replicas: int
    #: probability that a cluster declared surviving would still die out
    bias_bound: float

    def csv_row(self):
        return (self.lam, self.closed_form, self.empirical, self.stderr, self.cap_fraction)


def sample_generations(lam: float, replicas: int, rng: np.random.Generator,
                       generation_cap: int = GENERATION_CAP, population_cap: int = POPULATION_CAP):
    """Vectorized Galton-Watson run from the impulse.

    Returns per-replica outcome codes (0 extinct, 1 surviving, 2 cap reached)
    and the progeny counted up to the stopping generation.  A generation of at
    least ``population_cap`` individuals is declared surviving.
    """
    size = np.ones(replicas, dtype=np.int64)
    total = np.zeros(replicas, dtype=np.int64)
    outcome = np.full(replicas, 2, dtype=np.int8)
    active = np.ones(replicas, dtype=bool)
    for _ in range(generation_cap):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        kids = rng.poisson(lam * size[idx])
        size[idx] = kids
        total[idx] += kids
        dead = kids == 0
        big = kids >= population_cap
        outcome[idx[dead]] = 0
        outcome[idx[big]] = 1
        active[idx[dead | big]] = False
    return outcome, total


def extinction_empirical(kernel: K.Kernel, replicas: int = 10_000, seed=0,
                         generation_cap: int = GENERATION_CAP,
                         population_cap: int = POPULATION_CAP) -> ExtinctionEstimate:
    """Branching-representation estimate of the extinction probability."""
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    lam = kernel.total_mass()
    outcome, _ = sample_generations(lam, replicas, generator(seed), generation_cap, population_cap)
    p = float(np.mean(outcome == 0))
    closed = extinction_probability(lam)
    se = math.sqrt(p * (1 - p) / replicas)
    bias = closed**population_cap if lam > 1 else 0.0
    return ExtinctionEstimate(lam, closed, p, se, float(np.mean(outcome == 2)),
                              float(np.mean(outcome == 1)), replicas, bias)


def sample_cluster_totals(kernel: K.Kernel, T: float, replicas: int, seed=0,
                          cap: int = 10**7) -> np.ndarray:
    """Number of cluster members born in ``(0, T]``, one value per replica.

    Children of a member born at ``s`` are Poisson(Lambda) in number with
    birth times ``s + lag``, ``lag ~ phi / Lambda``.  Members born after ``T``
    are dropped along with their descendants.
    """
    lam = kernel.total_mass()
    out = np.empty(replicas, dtype=np.int64)
    for r, g in enumerate(replica_generators(seed, replicas, key=7)):
        born = np.zeros(1)
        n = 0
        while born.size:
            k = g.poisson(lam, born.size)
            kids = np.repeat(born, k) + kernel.sample_lags(g, int(k.sum()))
            born = kids[kids <= T]
            n += born.size
            if n > cap:
                raise RuntimeError("cluster exceeded the member cap")
        out[r] = n
    return out


def simulate_impulsion(topo: LatticeBox, kernel: K.Kernel, T: float, seed=0,
                       rng: np.random.Generator | None = None, cap: int = 10**7) -> EventLog:
    return simulate(impulsion_spec(topo, kernel, T, seed, cap), rng=rng)


# -- spatial renewal function ---------------------------------------------------

def _poisson_terms(kernel, t, tol):
    # n-th term weight a^n t^(n-1) e^(-bt)/(n-1)! = a e^((a-b)t) * Poisson(at){n-1}
    at = kernel.a * t
    n = 1
    while True:
        if n - 1 > at:
            log_pmf = (n - 1) * math.log(at) - at - gammaln(n) if at > 0 else -math.inf
            # geometric bound on the remaining Poisson tail
            if math.exp(log_pmf) / (1 - at / n) < tol:
                return n
        n += 1


def spatial_renewal_field(d: int, kernel: K.Exponential, t: float, tol: float = 1e-14) -> LatticeMatrix:
    """``Gamma(., t) = sum_{n>=1} A^n(0, .) a^n t^(n-1) e^(-bt) / (n-1)!`` on its truncation box."""
    if not isinstance(kernel, K.Exponential):
        raise TypeError("spatial renewal needs an exponential kernel")
    if t <= 0:
        raise ValueError("t must be positive")
    n_max = _poisson_terms(kernel, t, tol)
    out = np.zeros((2 * n_max + 1,) * d)
    for n, row in enumerate(a_powers(d, n_max)):
        if n >= 1:
            out += float(kernel.convolution_power_closed(n, t)) * row
    return LatticeMatrix(d, out)


def spatial_renewal(d: int, kernel: K.Exponential, i, t: float, tol: float = 1e-14) -> float:
    return spatial_renewal_field(d, kernel, t, tol)[i]


def spatial_mean_field(d: int, kernel: K.Exponential, t: float, tol: float = 1e-14) -> LatticeMatrix:
    """Mean counts ``m^i_t = int_0^t Gamma(i, s) ds``, using
    ``int_0^t phi^{*n} = (a/b)^n P(n, b t)``."""
    n_max = _poisson_terms(kernel, t, tol)
    out = np.zeros((2 * n_max + 1,) * d)
    lam = kernel.total_mass()
    for n, row in enumerate(a_powers(d, n_max)):
        if n >= 1:
            out += math.exp(n * math.log(lam)) * float(gammainc(n, kernel.b * t)) * row
    return LatticeMatrix(d, out)


def expected_H(kernel: K.Kernel) -> float:
    """``lim exp(-alpha0 t) E[Z_t] = 1 / (alpha0 int t phi(t) exp(-alpha0 t) dt)``."""
    a0 = K.branching_exponent(kernel)
    return 1.0 / (a0 * kernel.moment_laplace(a0))


# -- propagation profile -----------------------------------------------------------

@dataclass
class ProfileReport:
    """Ratios ``t^(d/2) exp(-alpha0 t) Z^{floor(x sqrt t)}_t / (H p_a(x))`` on surviving paths.

    ``H`` is the per-path ``exp(-alpha0 t_max) Z_{t_max}``, with ``Z`` the total
    count; ``H_half`` is the same at ``t_max / 2``.  A path has ``H = 0`` in
    the limit iff it dies out; it is flagged ``extinct`` when it makes no jump
    in ``(t_max / 2, t_max]``, which leaves ``H`` of order ``exp(-alpha0 t_max)``.
    """

    t: np.ndarray
    x: np.ndarray
    ratio_median: np.ndarray
    ratio_iqr: np.ndarray
    survivors: int
    replicas: int
    H: np.ndarray
    H_half: np.ndarray
    alpha0: float
    extinct: np.ndarray = field(repr=False)
    ratios: np.ndarray = field(repr=False)
    totals: np.ndarray = field(repr=False)

    @property
    def zero_fraction(self) -> float:
        return float(np.mean(self.extinct))

    @property
    def H_mean(self) -> float:
        return float(self.H.mean())

    @property
    def H_stderr(self) -> float:
        return float(self.H.std(ddof=1) / math.sqrt(self.H.size))

    def ratio(self, t, x) -> float:
        i = int(np.flatnonzero(np.isclose(self.t, t))[0])
        j = int(np.flatnonzero(np.isclose(self.x, x))[0])
        return float(self.ratio_median[i, j])

    def rows(self):
        for i, t in enumerate(self.t):
            for j, x in enumerate(self.x):
                yield float(t), float(x), float(self.ratio_median[i, j]), float(self.ratio_iqr[i, j]), self.survivors

    def to_csv(self, path, header_lines=()):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write("t,x,ratio_median,ratio_iqr,survivors\n")
            for t, x, med, iqr, s in self.rows():
                fh.write(f"{t!r},{x!r},{med!r},{iqr!r},{s}\n")


def profile_site(topo: LatticeBox, x: float, t: float) -> int:
    """Node ``floor(x sqrt t)`` along the first axis."""
    c = np.zeros(topo.d, dtype=int)
    c[0] = math.floor(x * math.sqrt(t))
    return topo.index(c)


def profile(topo: LatticeBox, kernel: K.Exponential, t_list, x_list, replicas: int = 1000, seed=0,
            workers: int | None = None, cap: int = 10**7) -> ProfileReport:
    """Simulate the impulsion system and measure its Gaussian propagation profile."""
    if not isinstance(kernel, K.Exponential) or kernel.a <= kernel.b:
        raise ValueError("profile needs a supercritical exponential kernel (a > b)")
    t_list = np.sort(np.asarray(t_list, dtype=float))
    x_list = np.asarray(x_list, dtype=float)
    t_max = float(t_list[-1])
    alpha0 = K.branching_exponent(kernel)
    snaps = np.unique(np.concatenate([t_list, [t_max / 2]]))
    spec = impulsion_spec(topo, kernel, t_max, seed, cap)
    rngs = replica_generators(seed, replicas, key=11)
    counts = np.stack(map_replicas(lambda g: simulate_counts(spec, snaps, rng=g).counts, rngs, workers))
    totals = counts.sum(axis=2)  # (replicas, n_snap)
    j_max = int(np.flatnonzero(snaps == t_max)[0])
    j_half = int(np.flatnonzero(snaps == t_max / 2)[0])
    H = np.exp(-alpha0 * t_max) * totals[:, j_max]
    H_half = np.exp(-alpha0 * t_max / 2) * totals[:, j_half]
    extinct = totals[:, j_max] == totals[:, j_half]
    alive = ~extinct
    if not np.any(alive):
        raise NoSurvivorsError("every replica went extinct")
    d = topo.d
    ratios = np.empty((int(alive.sum()), t_list.size, x_list.size))
    for i, t in enumerate(t_list):
        js = int(np.flatnonzero(snaps == t)[0])
        for j, x in enumerate(x_list):
            node = profile_site(topo, x, t)
            px = float(gaussian_kernel(d, kernel.a, np.r_[x, np.zeros(d - 1)] if d > 1 else x))
            ratios[:, i, j] = t ** (d / 2) * math.exp(-alpha0 * t) * counts[alive, js, node] / (H[alive] * px)
    q25, med, q75 = np.percentile(ratios, [25, 50, 75], axis=0)
    return ProfileReport(t_list, x_list, med, q75 - q25, int(alive.sum()), replicas, H, H_half, alpha0,
                         extinct, ratios, totals)


__all__ = ["ExtinctionEstimate", "ProfileReport", "expected_H", "extinction_empirical",
           "extinction_probability", "profile", "profile_site", "sample_cluster_totals",
           "sample_generations", "simulate_impulsion", "spatial_mean_field", "spatial_renewal",
           "spatial_renewal_field"]
