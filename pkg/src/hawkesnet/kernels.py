"""Excitation kernels and their analytic functionals.

Three kernel families are supported: exponential ``a * exp(-b t)``,
rectangular ``c * 1[0 <= t < tau]`` and tabulated (piecewise linear on a
uniform grid, zero past the last grid point).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .exceptions import DivergentIntegralError, NotSupercriticalError
from .grid import GridFunction

ROOT_TOL = 1e-10
CRITICAL_TOL = 1e-9

SUBCRITICAL = "subcritical"
CRITICAL = "critical"
SUPERCRITICAL = "supercritical"


class Kernel:
    """Nonnegative, locally integrable excitation function."""

    #: True when the kernel is non-increasing on ``[0, inf)``.  The engine then
    #: uses the current intensity as a dominating rate until the next event.
    monotone = True
    #: Length of the support, ``inf`` for unbounded support.
    support = math.inf

    def __call__(self, t):
        raise NotImplementedError

    def integral(self, t):
        """Primitive ``int_0^t phi(s) ds`` (zero for ``t <= 0``)."""
        raise NotImplementedError

    def total_mass(self) -> float:
        raise NotImplementedError

    def laplace(self, alpha: float) -> float:
        raise NotImplementedError

    def moment_laplace(self, alpha: float) -> float:
        """``int_0^inf t phi(t) exp(-alpha t) dt``."""
        raise NotImplementedError

    def envelope(self) -> float:
        """An upper bound of ``sup phi``."""
        raise NotImplementedError

    def sample_lags(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw lags from the normalized density ``phi / total_mass``."""
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Exponential(Kernel):
    a: float
    b: float

    monotone = True

    def __post_init__(self):
        if not (self.a >= 0 and self.b > 0):
            raise ValueError(f"exponential kernel needs a >= 0 and b > 0, got a={self.a}, b={self.b}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, self.a * np.exp(-self.b * np.maximum(t, 0.0)), 0.0)

    def integral(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return self.a / self.b * -np.expm1(-self.b * t)

    def total_mass(self):
        return self.a / self.b

    def laplace(self, alpha):
        if alpha + self.b <= 0:
            raise DivergentIntegralError(f"Laplace transform diverges at alpha={alpha}")
        return self.a / (alpha + self.b)

    def moment_laplace(self, alpha):
        if alpha + self.b <= 0:
            raise DivergentIntegralError(f"Laplace transform diverges at alpha={alpha}")
        return self.a / (alpha + self.b) ** 2

    def envelope(self):
        return self.a

    def sample_lags(self, rng, size):
        return rng.standard_exponential(size) / self.b

    def convolution_power_closed(self, n: int, t):
        """``a^n t^(n-1) exp(-b t) / (n-1)!``, the n-fold self-convolution."""
        t = np.asarray(t, dtype=float)
        if n == 1:
            return self(t)
        with np.errstate(divide="ignore"):
            logv = n * math.log(self.a) + (n - 1) * np.log(t) - self.b * t - gammaln(n)
        return np.where(t > 0, np.exp(logv), 0.0)

    def to_config(self):
        return {"kind": "exponential", "a": float(self.a), "b": float(self.b)}


@dataclass(frozen=True)
class Rectangular(Kernel):
    c: float
    tau: float

    monotone = True

    def __post_init__(self):
        if not (self.c >= 0 and self.tau > 0):
            raise ValueError(f"rectangular kernel needs c >= 0 and tau > 0, got c={self.c}, tau={self.tau}")

    @property
    def support(self):
        return self.tau

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.where((t >= 0) & (t < self.tau), self.c, 0.0)

    def integral(self, t):
        t = np.asarray(t, dtype=float)
        return self.c * np.clip(t, 0.0, self.tau)

    def total_mass(self):
        return self.c * self.tau

    def laplace(self, alpha):
        if alpha == 0:
            return self.total_mass()
        return self.c * -math.expm1(-alpha * self.tau) / alpha

    def moment_laplace(self, alpha):
        if alpha == 0:
            return 0.5 * self.c * self.tau**2
        x = alpha * self.tau
        return self.c * (1.0 - math.exp(-x) * (1.0 + x)) / alpha**2

    def envelope(self):
        return self.c

    def sample_lags(self, rng, size):
        return rng.random(size) * self.tau

    def to_config(self):
        return {"kind": "rectangular", "c": float(self.c), "tau": float(self.tau)}


@dataclass(frozen=True)
class Tabulated(Kernel):
    """Piecewise-linear kernel from samples ``values[k] = phi(k * dt)``.

    The kernel vanishes after the last grid point, so every functional is an
    integral over the finite grid (trapezoidal rule).  ``bound`` is the
    envelope used by the simulator when the samples are not monotone.
    """

    grid: GridFunction
    bound: float | None = None
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.grid.t0 != 0:
            raise ValueError("tabulated kernels must start at t=0")
        if np.any(self.grid.values < 0):
            raise ValueError("tabulated kernel has negative values")
        object.__setattr__(self, "_cum", self.grid.cumulative_integral().values)

    @property
    def monotone(self):
        return bool(np.all(np.diff(self.grid.values) <= 0))

    @property
    def support(self):
        return self.grid.t_end

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= 0) & (t <= self.grid.t_end)
        return np.where(inside, np.interp(t, self.grid.times, self.grid.values), 0.0)

    def integral(self, t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.grid.t_end)
        dt = self.grid.dt
        k = np.minimum((t / dt).astype(int), len(self.grid) - 2) if len(self.grid) > 1 else np.zeros_like(t, int)
        if len(self.grid) == 1:
            return np.zeros_like(t)
        v = self.grid.values
        s = t - k * dt
        slope = (v[k + 1] - v[k]) / dt
        return self._cum[k] + v[k] * s + 0.5 * slope * s**2

    def total_mass(self):
        return float(self._cum[-1])

    def laplace(self, alpha):
        t = self.grid.times
        return float(np.trapezoid(np.exp(-alpha * t) * self.grid.values, dx=self.grid.dt))

    def moment_laplace(self, alpha):
        t = self.grid.times
        return float(np.trapezoid(t * np.exp(-alpha * t) * self.grid.values, dx=self.grid.dt))

    def envelope(self):
        return float(self.bound) if self.bound is not None else float(self.grid.values.max())

    def sample_lags(self, rng, size):
        u = rng.random(size) * self.total_mass()
        k = np.searchsorted(self._cum, u, side="right") - 1
        k = np.clip(k, 0, len(self.grid) - 2)
        # invert the quadratic primitive on the cell
        dt = self.grid.dt
        v = self.grid.values
        r = u - self._cum[k]
        slope = (v[k + 1] - v[k]) / dt
        with np.errstate(invalid="ignore", divide="ignore"):
            quad = (-v[k] + np.sqrt(np.maximum(v[k] ** 2 + 2 * slope * r, 0.0))) / slope
        lin = np.where(v[k] > 0, r / np.where(v[k] > 0, v[k], 1.0), 0.0)
        s = np.where(np.abs(slope) > 1e-14, quad, lin)
        return k * dt + np.clip(s, 0.0, dt)

    def to_config(self):
        cfg = {"kind": "tabulated", "dt": float(self.grid.dt), "values": self.grid.values.tolist()}
        if self.bound is not None:
            cfg["bound"] = float(self.bound)
        return cfg


def total_mass(k: Kernel) -> float:
    return k.total_mass()


def laplace(k: Kernel, alpha: float) -> float:
    return k.laplace(alpha)


def classify(k: Kernel, tol: float = CRITICAL_TOL) -> str:
    mass = k.total_mass()
    if abs(mass - 1.0) <= tol:
        return CRITICAL
    return SUBCRITICAL if mass < 1.0 else SUPERCRITICAL


def branching_exponent(k: Kernel, tol: float = ROOT_TOL) -> float:
    """Unique ``alpha > 0`` with ``laplace(k, alpha) == 1``.

    Bisection: the Laplace transform is strictly decreasing, the upper bracket
    is found by doubling from 1.  The bracket is shrunk to machine resolution,
    so the residual is far below ``tol`` for smooth kernels.
    """
    if classify(k) != SUPERCRITICAL:
        raise NotSupercriticalError(f"total mass {k.total_mass()} is not > 1")
    lo, hi = 0.0, 1.0
    while k.laplace(hi) >= 1.0:
        lo, hi = hi, 2.0 * hi
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if k.laplace(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    alpha = lo if abs(k.laplace(lo) - 1.0) <= abs(k.laplace(hi) - 1.0) else hi
    if abs(k.laplace(alpha) - 1.0) >= tol:
        raise ArithmeticError(f"root residual {k.laplace(alpha) - 1.0} above {tol}")
    return alpha


def discrete_convolution(f: np.ndarray, g: np.ndarray, dt: float) -> np.ndarray:
    """Trapezoidal ``int_0^t f(s) g(t-s) ds`` on a uniform grid starting at 0."""
    n = f.size
    full = np.convolve(f, g)[:n]
    out = full - 0.5 * f[0] * g[:n] - 0.5 * f[:n] * g[0]
    out *= dt
    out[0] = 0.0
    return out


def convolution_power(k: Kernel, n: int, T: float, dt: float, method: str = "auto") -> GridFunction:
    """Tabulate the n-fold convolution power of ``k`` on ``[0, T]``.

    ``method="auto"`` uses the closed form for exponential kernels and
    iterated trapezoidal convolution otherwise.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if dt <= 0:
        raise ValueError("dt must be positive")
    m = int(round(T / dt)) + 1
    t = dt * np.arange(m)
    if method == "auto":
        method = "closed" if isinstance(k, Exponential) else "quadrature"
    if method == "closed":
        if not isinstance(k, Exponential):
            raise ValueError("closed form only available for exponential kernels")
        return GridFunction(0.0, dt, k.convolution_power_closed(n, t))
    base = k(t)
    out = base.copy()
    for _ in range(n - 1):
        out = discrete_convolution(out, base, dt)
    return GridFunction(0.0, dt, out)


def kernel_from_config(cfg) -> Kernel:
    """Build a kernel from a dict like ``{"kind": "exponential", "a": 2, "b": 1}``
    or from the short string form ``exponential:2,1``."""
    if isinstance(cfg, Kernel):
        return cfg
    if isinstance(cfg, str):
        kind, _, args = cfg.partition(":")
        vals = [float(x) for x in args.split(",") if x.strip()]
        kind = kind.strip().lower()
        if kind in ("exponential", "exp"):
            return Exponential(*vals)
        if kind in ("rectangular", "rect"):
            return Rectangular(*vals)
        raise ValueError(f"unknown kernel spec {cfg!r}")
    kind = cfg["kind"].lower()
    if kind == "exponential":
        return Exponential(float(cfg["a"]), float(cfg["b"]))
    if kind == "rectangular":
        return Rectangular(float(cfg["c"]), float(cfg["tau"]))
    if kind == "tabulated":
        grid = GridFunction(0.0, float(cfg["dt"]), np.asarray(cfg["values"], dtype=float))
        return Tabulated(grid, cfg.get("bound"))
    raise ValueError(f"unknown kernel kind {kind!r}")
