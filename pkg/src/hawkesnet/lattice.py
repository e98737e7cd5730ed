"""Nearest-neighbour Hawkes systems on a lattice box.

Means solve the vector equation ``m'_t = mu + int_0^t phi(t-s) A m'_s ds``
with ``A`` the box averaging operator.  Laws of large numbers are checked by
simulation against ``Q mu`` (subcritical) and ``a0 exp(alpha0 t)``
(supercritical).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammainc, gammaln

from . import kernels as K
from .engine import SystemSpec, simulate_counts
from .exceptions import BoxTooSmallWarning, InvalidMassError
from .graph import PERIODIC, LatticeBox, a_powers, make_baseline, q_lambda, q_lambda_box
from .rng import map_replicas, replica_generators
from .volterra import default_step, growth_constants


@dataclass(frozen=True)
class LatticeMeanField:
    """Per-node mean intensity ``dm[k, i]`` and mean count ``m[k, i]`` at ``t = k dt``."""

    topology: LatticeBox
    dt: float
    dm: np.ndarray
    m: np.ndarray

    @property
    def times(self):
        return self.dt * np.arange(self.dm.shape[0])

    def at(self, t: float):
        k = int(round(t / self.dt))
        return self.m[k], self.dm[k]


def _implicit(topo, c, beta, tol=1e-15, max_iter=200):
    # y = c + beta A y by Neumann iteration; ||beta A|| = beta < 1
    y = c.copy()
    for _ in range(max_iter):
        ny = c + beta * topo.apply(y)
        if np.max(np.abs(ny - y)) <= tol * max(np.max(np.abs(ny)), 1e-300):
            return ny
        y = ny
    return y


def vector_mean(topo: LatticeBox, mu, kernel: K.Kernel, T: float, dt: float | None = None) -> LatticeMeanField:
    """Trapezoidal product integration of the vector mean equation.

    The history term is accumulated before ``A`` is applied, so each step costs
    one stencil application plus the implicit solve.  Exponential kernels use
    the geometric recursion of the scalar solver.
    """
    mu = make_baseline(topo, mu) if not isinstance(mu, np.ndarray) else np.asarray(mu, dtype=float)
    dt = default_step(kernel) if dt is None else float(dt)
    n = int(round(T / dt)) + 1
    y = np.empty((n, mu.size))
    y[0] = mu
    if isinstance(kernel, K.Exponential):
        a, q = kernel.a, math.exp(-kernel.b * dt)
        beta = 0.5 * dt * a
        p = y[0].copy()
        qk = 1.0
        for k in range(1, n):
            qk *= q
            known = a * (q * p - 0.5 * qk * y[0])
            y[k] = _implicit(topo, mu + dt * topo.apply(known), beta)
            p = q * p + y[k]
    else:
        phi = kernel(dt * np.arange(n))
        beta = 0.5 * dt * phi[0]
        for k in range(1, n):
            hist = 0.5 * phi[k] * y[0] + np.tensordot(phi[k - 1:0:-1], y[1:k], axes=(0, 0))
            y[k] = _implicit(topo, mu + dt * topo.apply(hist), beta)
    m = np.zeros_like(y)
    m[1:] = np.cumsum(0.5 * dt * (y[1:] + y[:-1]), axis=0)
    return LatticeMeanField(topo, dt, y, m)


def series_mean(topo: LatticeBox, mu, kernel: K.Exponential, t: float, tol: float = 1e-13) -> np.ndarray:
    """``m'_t = mu + sum_{n>=1} (int_0^t phi^{*n}) A^n mu`` on the box (exponential kernel).

    ``int_0^t phi^{*n} = (a/b)^n P(n, b t)`` with ``P`` the regularized lower
    incomplete gamma function.  It is also at most ``(a t)^n / n!``, which
    bounds the neglected tail.
    """
    if not isinstance(kernel, K.Exponential):
        raise TypeError("series form needs an exponential kernel")
    mu = make_baseline(topo, mu) if not isinstance(mu, np.ndarray) else np.asarray(mu, dtype=float)
    a, b = kernel.a, kernel.b
    out = mu.copy()
    v = mu.copy()
    scale = max(np.max(np.abs(mu)), 1e-300)
    at = a * t
    n = 0
    while True:
        n += 1
        v = topo.apply(v)
        out += math.exp(n * math.log(a / b)) * float(gammainc(n, b * t)) * v
        if at == 0:
            break
        if n + 2 > at:
            tail = math.exp((n + 1) * math.log(at) - gammaln(n + 2)) / (1 - at / (n + 2))
            if tail * scale < tol * scale:
                break
    return out


def mean_convergence(d: int, mu_spec, n_list) -> np.ndarray:
    """``(A^n mu)_0`` on a box holding the n-step support exactly.

    ``mu_spec`` is a constant, ``"alternating"`` (``0`` on even coordinate sums,
    ``2`` on odd ones), ``"indicator"`` (1 at the origin) or a callable of the
    integer coordinate array ``(..., d)``.
    """
    n_list = [int(n) for n in n_list]
    r = max(n_list) if n_list else 0
    coords = np.indices((2 * r + 1,) * d).reshape(d, -1).T - r
    if callable(mu_spec):
        mu = np.asarray(mu_spec(coords), dtype=float)
    elif mu_spec == "alternating":
        mu = np.where(np.abs(coords.sum(axis=1)) % 2 == 1, 2.0, 0.0)
    elif mu_spec == "indicator":
        mu = np.where(np.all(coords == 0, axis=1), 1.0, 0.0)
    else:
        mu = np.full(coords.shape[0], float(mu_spec))
    mu = mu.reshape((2 * r + 1,) * d)
    wanted = set(n_list)
    out = {}
    for n, row in enumerate(a_powers(d, r)):
        if n in wanted:
            # (A^n mu)_0 = sum_j A^n(0, j) mu_j
            out[n] = float(np.sum(row * mu))
    return np.array([out[n] for n in n_list])


@dataclass
class LatticeReport:
    """Per-node simulation estimates against their deterministic targets."""

    nodes: np.ndarray
    estimate: np.ndarray
    target: np.ndarray
    stderr: np.ndarray
    replicas: int
    T: float
    samples: np.ndarray = field(repr=False)
    extra: dict = field(default_factory=dict)

    def relative_error(self) -> np.ndarray:
        return np.abs(self.estimate / self.target - 1.0)

    def to_csv(self, path, header_lines=()):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write("node,estimate,target,stderr\n")
            for i, e, t, s in zip(self.nodes.tolist(), self.estimate.tolist(), self.target.tolist(),
                                  self.stderr.tolist()):
                fh.write(f"{i},{e!r},{t!r},{s!r}\n")


def _counts(topo, mu, kernel, T, replicas, seed, workers, snapshots=None, key=0):
    spec = SystemSpec(topo, kernel, mu if np.ndim(mu) == 0 else np.asarray(mu), T, seed)
    rngs = replica_generators(seed, replicas, key=key)
    snaps = [T] if snapshots is None else snapshots
    res = map_replicas(lambda g: simulate_counts(spec, snaps, rng=g).counts, rngs, workers)
    return np.stack(res)  # (replicas, n_snap, nodes)


def _box_mass_outside(d, lam, radius, tol=1e-12):
    q = q_lambda(d, lam, tol)
    off = q.offsets()
    far = np.max(np.abs(off), axis=1) > radius
    return float(q.values.ravel()[far].sum() / q.row_sum())


def lln_subcritical(topo: LatticeBox, mu, kernel: K.Kernel, T: float, replicas: int = 200, seed=0,
                    monitored=None, workers: int | None = None) -> LatticeReport:
    """``Z^i_T / T`` per monitored node against ``(Q mu)_i`` on the box."""
    lam = kernel.total_mass()
    if not lam < 1:
        raise InvalidMassError(f"subcritical law needs total mass < 1, got {lam}")
    mu = make_baseline(topo, mu)
    nodes = np.arange(topo.n_nodes) if monitored is None else np.asarray(monitored, dtype=int)
    # mass of the Q row beyond the reach of the box (wraps or gets absorbed)
    radius = topo.L // 2
    if topo.boundary != PERIODIC and monitored is not None:
        dist = np.min(np.minimum(topo.coords[nodes] + topo.offset,
                                 topo.L - 1 - topo.coords[nodes] - topo.offset), axis=1)
        radius = int(dist.min())
    frac = _box_mass_outside(topo.d, lam, radius)
    if frac > 0.01:
        warnings.warn(f"{100 * frac:.2f}% of the Q row mass lies beyond the box", BoxTooSmallWarning,
                      stacklevel=2)
    target = q_lambda_box(topo, lam, mu)[nodes]
    c = _counts(topo, mu, kernel, T, replicas, seed, workers)[:, 0, nodes] / T
    est = c.mean(axis=0)
    se = c.std(axis=0, ddof=1) / math.sqrt(replicas) if replicas > 1 else np.full(nodes.size, np.nan)
    return LatticeReport(nodes, est, target, se, replicas, T, c, {"box_mass_outside": frac})


def lln_supercritical(topo: LatticeBox, mu, kernel: K.Kernel, T: float, replicas: int = 200, seed=0,
                      monitored=None, workers: int | None = None, snapshots=None) -> LatticeReport:
    """``exp(-alpha0 T) Z^i_T`` per monitored node against ``a0`` for the box-average baseline.

    ``estimate`` is the replica median.  ``extra["flatness"]`` is
    ``max_{i,j} |med_i / med_j - 1|`` over monitored nodes; with ``snapshots``
    the flatness at each snapshot time is in ``extra["flatness_by_time"]``.
    """
    mu = make_baseline(topo, mu)
    nodes = np.arange(topo.n_nodes) if monitored is None else np.asarray(monitored, dtype=int)
    gc = growth_constants(kernel, float(np.mean(mu)))
    if gc.regime != K.SUPERCRITICAL:
        raise InvalidMassError("supercritical law needs total mass > 1")
    snaps = sorted(set([T] + list(snapshots or [])))
    raw = _counts(topo, mu, kernel, T, replicas, seed, workers, snaps)
    by_time = {}
    for j, s in enumerate(snaps):
        med = np.median(raw[:, j, nodes] * math.exp(-gc.alpha0 * s), axis=0)
        by_time[s] = float(med.max() / med.min() - 1.0) if med.min() > 0 else math.inf
    z = raw[:, snaps.index(T), nodes] * math.exp(-gc.alpha0 * T)
    med = np.median(z, axis=0)
    # standard error of the median from the normal approximation
    se = 1.2533 * z.std(axis=0, ddof=1) / math.sqrt(replicas) if replicas > 1 else np.full(nodes.size, np.nan)
    extra = {"a0": gc.a0, "alpha0": gc.alpha0, "box_mean": float(np.mean(mu)),
             "flatness": by_time[T], "flatness_by_time": by_time}
    return LatticeReport(nodes, med, np.full(nodes.size, gc.a0), se, replicas, T, z, extra)


def flatness(values) -> float:
    """``max_{i,j} |v_i / v_j - 1|`` for positive values."""
    v = np.asarray(values, dtype=float)
    return float(v.max() / v.min() - 1.0)


__all__ = ["LatticeMeanField", "LatticeReport", "flatness", "lln_subcritical", "lln_supercritical",
           "mean_convergence", "series_mean", "vector_mean"]
