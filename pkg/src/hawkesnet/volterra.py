"""Grid solvers for the scalar convolution equations of the mean process.

All solvers use the same discretization: trapezoidal product integration on a
uniform grid, marched forward in time.  With ``y`` the unknown and ``phi``
the kernel,

    y_k = f_k + dt * (phi_k y_0 / 2 + sum_{0<j<k} phi_{k-j} y_j + phi_0 y_k / 2),

which is explicit up to the scalar implicit term ``phi_0 y_k dt / 2``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import kernels as K
from .exceptions import CriticalRegimeError, StepTooCoarseWarning
from .grid import GridFunction
from .intensity import Linear, as_intensity


@njit(cache=True, nogil=True)
def _march_linear(f, phi, dt):
    n = f.size
    y = np.empty(n)
    y[0] = f[0]
    denom = 1.0 - 0.5 * dt * phi[0]
    for k in range(1, n):
        acc = 0.5 * phi[k] * y[0]
        for j in range(1, k):
            acc += phi[k - j] * y[j]
        y[k] = (f[k] + dt * acc) / denom
    return y


@njit(cache=True, nogil=True)
def _march_linear_exp(f, a, b, dt):
    # same trapezoidal scheme; the history sum is carried by a geometric recursion
    n = f.size
    q = math.exp(-b * dt)
    y = np.empty(n)
    y[0] = f[0]
    p = y[0]
    qk = 1.0
    denom = 1.0 - 0.5 * dt * a
    for k in range(1, n):
        qk *= q
        known = a * (q * p - 0.5 * qk * y[0])
        y[k] = (f[k] + dt * known) / denom
        p = q * p + y[k]
    return y


def march(f: np.ndarray, kernel: K.Kernel, dt: float) -> np.ndarray:
    """Solve ``y = f + phi * y`` on the grid of ``f``."""
    f = np.ascontiguousarray(f, dtype=float)
    if isinstance(kernel, K.Exponential):
        return _march_linear_exp(f, float(kernel.a), float(kernel.b), float(dt))
    phi = kernel(dt * np.arange(f.size))
    return _march_linear(f, np.ascontiguousarray(phi), float(dt))


def _march_nonlinear(h, kernel, n, dt, max_iter=100):
    phi = kernel(dt * np.arange(n))
    y = np.empty(n)
    y[0] = float(h(0.0))
    half = 0.5 * dt * phi[0]
    for k in range(1, n):
        c = dt * (0.5 * phi[k] * y[0] + np.dot(phi[k - 1:0:-1], y[1:k]))
        v = y[k - 1]
        for _ in range(max_iter):
            nv = float(h(c + half * v))
            if abs(nv - v) <= 1e-14 * (1.0 + abs(nv)):
                v = nv
                break
            v = nv
        y[k] = v
    return y


def default_step(kernel: K.Kernel) -> float:
    mass = kernel.total_mass()
    return 1e-3 * min(1.0, 1.0 / mass) if mass > 0 else 1e-3


@dataclass(frozen=True)
class MeanSolution:
    """Mean counting function ``m`` and its derivative (the intensity) ``dm``."""

    m: GridFunction
    dm: GridFunction

    def __iter__(self):
        return iter((self.m, self.dm))


def _solve_dm(kernel, h, n, dt):
    if isinstance(h, Linear):
        mu = np.unique(np.asarray(h.mu, dtype=float))
        if mu.size != 1:
            raise ValueError("scalar mean equation needs a single baseline")
        mu = float(mu[0])
        return march(np.full(n, mu), kernel, dt)
    return _march_nonlinear(h, kernel, n, dt)


def solve_mean(kernel: K.Kernel, h, T: float, dt: float | None = None, check: bool = True,
               rtol: float = 1e-4) -> MeanSolution:
    """Solve ``m_t = int_0^t h(int_0^s phi(s-u) dm_u) ds`` on ``[0, T]``.

    ``h`` is an intensity map or a float baseline (linear case).  The
    derivative solves ``m'_t = h(int_0^t phi(t-u) m'_u du)`` and ``m`` is its
    running trapezoidal integral.  With ``check`` a Richardson estimate against
    the solve on the doubled step is computed and a
    :class:`StepTooCoarseWarning` issued when it exceeds ``rtol``.
    """
    h = as_intensity(h)
    dt = default_step(kernel) if dt is None else float(dt)
    n = int(round(T / dt)) + 1
    y = _solve_dm(kernel, h, n, dt)
    if check and n >= 5:
        coarse = _solve_dm(kernel, h, (n - 1) // 2 + 1, 2 * dt)
        err = np.max(np.abs(y[: 2 * coarse.size - 1 : 2] - coarse)) / 3.0
        scale = max(np.max(np.abs(y)), 1e-300)
        if err > rtol * scale:
            warnings.warn(f"estimated relative error {err / scale:.2e} exceeds {rtol:.1e}; "
                          "reduce dt", StepTooCoarseWarning, stacklevel=2)
    dm = GridFunction(0.0, dt, y)
    return MeanSolution(dm.cumulative_integral(), dm)


def renewal_density(kernel: K.Kernel, T: float, dt: float | None = None):
    """Renewal density ``Gamma = phi + phi * Gamma`` and ``Upsilon = int_0^t Gamma``."""
    dt = default_step(kernel) if dt is None else float(dt)
    n = int(round(T / dt)) + 1
    f = kernel(dt * np.arange(n))
    gamma = GridFunction(0.0, dt, march(f, kernel, dt))
    return gamma, gamma.cumulative_integral()


@dataclass(frozen=True)
class GrowthConstants:
    regime: str
    a0: float
    alpha0: float | None = None
    sigma2: float | None = None
    #: part of ``sigma2`` contributed by the exponential extrapolation past the horizon
    sigma2_tail: float | None = None
    #: bound on the error committed by the extrapolation
    sigma2_tail_error: float | None = None
    horizon: float | None = None
    dt: float | None = None


def growth_constants(kernel: K.Kernel, mu: float, dt: float | None = None,
                     horizon: float | None = None) -> GrowthConstants:
    """Asymptotic constants of the linear mean process with baseline ``mu``.

    Subcritical: ``m'_t -> a0 = mu / (1 - Lambda)``.  Supercritical:
    ``m_t ~ a0 exp(alpha0 t)`` with ``alpha0`` the branching exponent, and
    ``sigma2 = alpha0^2 mu^-2 int_0^inf exp(-2 alpha0 s) m'_s ds``.  The last
    integral is computed on ``[0, horizon]`` from the grid solution and
    continued analytically with ``m'_s ~ a0 alpha0 exp(alpha0 s)``.
    """
    if not mu > 0:
        raise ValueError("mu must be positive")
    regime = K.classify(kernel)
    if regime == K.CRITICAL:
        raise CriticalRegimeError("critical kernels have no supported asymptotics")
    lam = kernel.total_mass()
    if regime == K.SUBCRITICAL:
        return GrowthConstants(regime, mu / (1.0 - lam))
    alpha0 = K.branching_exponent(kernel)
    a0 = mu / (alpha0**2 * kernel.moment_laplace(alpha0))
    horizon = 12.0 / alpha0 if horizon is None else float(horizon)
    dt = min(1e-3, 1e-2 / alpha0) if dt is None else float(dt)
    sol = solve_mean(kernel, mu, horizon, dt, check=False)
    s = sol.dm.times
    body = np.trapezoid(np.exp(-2 * alpha0 * s) * sol.dm.values, dx=dt)
    tail = a0 * math.exp(-alpha0 * horizon)
    # integrand mismatch at the horizon, propagated with its exp(-2 alpha0 s) decay
    mismatch = abs(sol.dm.values[-1] - a0 * alpha0 * math.exp(alpha0 * horizon))
    tail_err = mismatch * math.exp(-2 * alpha0 * horizon) / (2 * alpha0)
    scale = alpha0**2 / mu**2
    return GrowthConstants(regime, a0, alpha0, scale * (body + tail), scale * tail,
                           scale * tail_err, horizon, dt)


__all__ = ["GrowthConstants", "MeanSolution", "default_step", "growth_constants", "march",
           "renewal_density", "solve_mean"]
