"""Finite network topologies and the nearest-neighbour lattice operator.

The lattice operator ``A`` averages over the ``2d + 1`` sites at distance 0
or 1.  Its powers are translation invariant, so ``A^n`` is stored as the row
``A^n(0, .)`` on the box of radius ``n`` (a :class:`LatticeMatrix`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .exceptions import InvalidMassError
from .kernels import Kernel

PERIODIC = "periodic"
ABSORBING = "absorbing"


class Topology:
    """Finite directed weighted graph; ``weight(j, i)`` scales ``phi`` on ``j -> i``."""

    n_nodes: int
    #: complete graph with one common weight on every ordered pair
    is_meanfield = False

    def edges(self):
        """Arrays ``(src, dst, weight)``."""
        raise NotImplementedError

    @cached_property
    def out_csr(self):
        src, dst, w = self.edges()
        order = np.lexsort((dst, src))
        src, dst, w = src[order], dst[order], w[order]
        indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        return np.cumsum(indptr), dst.astype(np.int64), w.astype(float)

    @cached_property
    def in_csr(self):
        src, dst, w = self.edges()
        order = np.lexsort((src, dst))
        src, dst, w = src[order], dst[order], w[order]
        indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
        np.add.at(indptr, dst + 1, 1)
        return np.cumsum(indptr), src.astype(np.int64), w.astype(float)

    def in_neighbours(self, i):
        indptr, idx, w = self.in_csr
        return idx[indptr[i]:indptr[i + 1]], w[indptr[i]:indptr[i + 1]]

    def out_neighbours(self, j):
        indptr, idx, w = self.out_csr
        return idx[indptr[j]:indptr[j + 1]], w[indptr[j]:indptr[j + 1]]

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Complete(Topology):
    """Mean-field graph on ``N`` nodes, weight ``1/N`` on every ordered pair (self included)."""

    N: int

    is_meanfield = True

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")

    @property
    def n_nodes(self):
        return self.N

    @property
    def weight(self):
        return 1.0 / self.N

    def edges(self):
        src, dst = np.divmod(np.arange(self.N * self.N), self.N)
        return src, dst, np.full(src.size, 1.0 / self.N)

    def to_config(self):
        return {"kind": "complete", "N": self.N}


@dataclass(frozen=True)
class LatticeBox(Topology):
    """Box ``{-r..r}^d`` (side ``L``) with nearest-neighbour edges and self-loops.

    Every edge weighs ``1/(2d+1)``.  ``periodic`` wraps the box into a torus;
    ``absorbing`` drops edges leaving the box.
    """

    d: int
    L: int
    boundary: str = PERIODIC

    def __post_init__(self):
        if self.d < 1 or self.L < 1:
            raise ValueError("d and L must be positive")
        if self.boundary not in (PERIODIC, ABSORBING):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.boundary == PERIODIC and self.L < 3:
            raise ValueError("periodic boxes need L >= 3")

    @property
    def n_nodes(self):
        return self.L**self.d

    @property
    def shape(self):
        return (self.L,) * self.d

    @property
    def offset(self):
        return self.L // 2

    @cached_property
    def coords(self) -> np.ndarray:
        """Centered integer coordinates, shape ``(n_nodes, d)``."""
        idx = np.indices(self.shape).reshape(self.d, -1).T
        return idx - self.offset

    def index(self, coord) -> int:
        c = np.atleast_1d(np.asarray(coord)) + self.offset
        if self.boundary == PERIODIC:
            c = c % self.L
        elif np.any((c < 0) | (c >= self.L)):
            raise IndexError(f"coordinate {coord} outside the box")
        return int(np.ravel_multi_index(tuple(c), self.shape))

    @cached_property
    def origin(self) -> int:
        return self.index(np.zeros(self.d, dtype=int))

    def edges(self):
        n = self.n_nodes
        w = 1.0 / (2 * self.d + 1)
        grid = np.arange(n).reshape(self.shape)
        src, dst = [np.arange(n)], [np.arange(n)]
        for axis in range(self.d):
            for step in (-1, 1):
                if self.boundary == PERIODIC:
                    nb = np.roll(grid, -step, axis=axis)
                    src.append(grid.ravel())
                    dst.append(nb.ravel())
                else:
                    sl_from = [slice(None)] * self.d
                    sl_to = [slice(None)] * self.d
                    if step == 1:
                        sl_from[axis], sl_to[axis] = slice(0, -1), slice(1, None)
                    else:
                        sl_from[axis], sl_to[axis] = slice(1, None), slice(0, -1)
                    src.append(grid[tuple(sl_from)].ravel())
                    dst.append(grid[tuple(sl_to)].ravel())
        src, dst = np.concatenate(src), np.concatenate(dst)
        return src, dst, np.full(src.size, w)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """``A v`` for a vector indexed like the nodes (or shaped like the box)."""
        flat = v.ndim == 1
        x = v.reshape(self.shape) if flat else v
        out = x.copy()
        for axis in range(self.d):
            if self.boundary == PERIODIC:
                out += np.roll(x, 1, axis=axis) + np.roll(x, -1, axis=axis)
            else:
                out += _shift(x, 1, axis) + _shift(x, -1, axis)
        out /= 2 * self.d + 1
        return out.ravel() if flat else out

    def to_config(self):
        return {"kind": "lattice", "d": self.d, "L": self.L, "boundary": self.boundary}


def _shift(x, step, axis):
    out = np.zeros_like(x)
    src = [slice(None)] * x.ndim
    dst = [slice(None)] * x.ndim
    if step > 0:
        src[axis], dst[axis] = slice(0, -step), slice(step, None)
    else:
        src[axis], dst[axis] = slice(-step, None), slice(0, step)
    out[tuple(dst)] = x[tuple(src)]
    return out


@dataclass(frozen=True)
class Custom(Topology):
    """Arbitrary directed graph; ``edges`` rows are ``(src, dst, weight)``."""

    n: int
    edge_list: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "edge_list", tuple(tuple(e) for e in self.edge_list))
        for j, i, w in self.edge_list:
            if not (0 <= j < self.n and 0 <= i < self.n):
                raise ValueError(f"edge ({j}, {i}) outside 0..{self.n - 1}")
            if w < 0:
                raise ValueError("edge weights must be nonnegative")

    @property
    def n_nodes(self):
        return self.n

    def edges(self):
        if not self.edge_list:
            z = np.zeros(0, dtype=np.int64)
            return z, z, np.zeros(0)
        arr = np.asarray(self.edge_list, dtype=float)
        return arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64), arr[:, 2]

    def to_config(self):
        return {"kind": "custom", "n": self.n, "edges": [list(e) for e in self.edge_list]}


def topology_from_config(cfg) -> Topology:
    if isinstance(cfg, Topology):
        return cfg
    kind = cfg["kind"].lower()
    if kind == "complete":
        return Complete(int(cfg["N"]))
    if kind == "lattice":
        return LatticeBox(int(cfg["d"]), int(cfg["L"]), cfg.get("boundary", PERIODIC))
    if kind == "custom":
        return Custom(int(cfg["n"]), tuple(tuple(e) for e in cfg.get("edges", ())))
    raise ValueError(f"unknown topology kind {kind!r}")


def make_baseline(topo: Topology, spec) -> np.ndarray:
    """Per-node baselines from a number, a list, or a dict spec.

    Dict kinds: ``constant`` (``value``), ``uniform`` (``low``, ``high``,
    ``seed``), ``alternating`` (``low`` on even coordinate sums, ``high`` on
    odd ones), ``indicator`` (``value`` at the origin, 0 elsewhere).
    """
    n = topo.n_nodes
    if np.isscalar(spec):
        return np.full(n, float(spec))
    if not isinstance(spec, dict):
        arr = np.asarray(spec, dtype=float)
        if arr.shape != (n,):
            raise ValueError(f"explicit baseline has shape {arr.shape}, expected ({n},)")
        return arr
    kind = spec["kind"]
    if kind == "constant":
        return np.full(n, float(spec["value"]))
    if kind == "uniform":
        rng = np.random.default_rng(spec.get("seed", 0))
        return rng.uniform(spec.get("low", 0.0), spec.get("high", 2.0), n)
    if kind in ("alternating", "indicator"):
        if not isinstance(topo, LatticeBox):
            raise ValueError(f"{kind} baselines need a lattice topology")
        if kind == "indicator":
            out = np.zeros(n)
            out[topo.origin] = float(spec.get("value", 1.0))
            return out
        parity = np.abs(topo.coords.sum(axis=1)) % 2
        return np.where(parity == 0, float(spec.get("low", 0.0)), float(spec.get("high", 2.0)))
    raise ValueError(f"unknown baseline kind {kind!r}")


@dataclass(frozen=True)
class LatticeMatrix:
    """Translation-invariant lattice matrix stored as the row ``M(0, .)``.

    ``values`` has shape ``(2r+1,)*d``; entry ``values[x + r]`` is ``M(0, x)``.
    """

    d: int
    values: np.ndarray

    @property
    def radius(self) -> int:
        return (self.values.shape[0] - 1) // 2

    def __getitem__(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=int))
        r = self.radius
        if np.any(np.abs(x) > r):
            return 0.0
        return float(self.values[tuple(x + r)])

    def offsets(self) -> np.ndarray:
        r = self.radius
        return np.indices(self.values.shape).reshape(self.d, -1).T - r

    def row_sum(self) -> float:
        return float(self.values.sum())

    def second_moment(self) -> float:
        """``sum_x |x|^2 M(0, x)``."""
        sq = (self.offsets() ** 2).sum(axis=1)
        return float((sq * self.values.ravel()).sum())

    def square_sum(self) -> float:
        return float((self.values**2).sum())


def _stencil_step(v: np.ndarray, d: int) -> np.ndarray:
    out = v.copy()
    for axis in range(d):
        out += _shift(v, 1, axis) + _shift(v, -1, axis)
    return out / (2 * d + 1)


def _delta(d: int, r: int) -> np.ndarray:
    v = np.zeros((2 * r + 1,) * d)
    v[(r,) * d] = 1.0
    return v


def a_power(d: int, n: int) -> LatticeMatrix:
    """Row ``A^n(0, .)`` on the box of radius ``n``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    v = _delta(d, n)
    for _ in range(n):
        v = _stencil_step(v, d)
    return LatticeMatrix(d, v)


def a_powers(d: int, n_max: int):
    """Yield ``A^0, ..., A^n_max`` as arrays on the common box of radius ``n_max``."""
    v = _delta(d, n_max)
    yield v
    for _ in range(n_max):
        v = _stencil_step(v, d)
        yield v


def q_lambda(d: int, lam: float, tol: float = 1e-10) -> LatticeMatrix:
    """Truncated series ``Q = sum_n lam^n A^n``; the neglected tail mass is below ``tol``."""
    if not 0 <= lam < 1:
        raise InvalidMassError(f"Q needs 0 <= lambda < 1, got {lam}")
    n_max = 0
    while lam > 0 and lam ** (n_max + 1) / (1 - lam) >= tol:
        n_max += 1
    out = np.zeros((2 * n_max + 1,) * d)
    for n, v in enumerate(a_powers(d, n_max)):
        out += lam**n * v
    return LatticeMatrix(d, out)


def q_lambda_box(topo: LatticeBox, lam: float, mu: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """``Q mu`` with ``A`` the operator of the finite box (wrap or absorption included)."""
    if not 0 <= lam < 1:
        raise InvalidMassError(f"Q needs 0 <= lambda < 1, got {lam}")
    v = np.asarray(mu, dtype=float).copy()
    out = v.copy()
    scale = max(np.max(np.abs(v)), 1e-300)
    n, w = 0, 1.0
    while w * lam / (1 - lam) * scale >= tol * scale:
        n += 1
        w *= lam
        v = topo.apply(v)
        out += w * v
    return out


def gaussian_kernel(d: int, t: float, x) -> np.ndarray:
    """``p_t(x) = ((2d+1)/(4 pi t))^(d/2) exp(-(2d+1)|x|^2/(4t))``; ``x`` has last axis ``d``
    (a scalar is accepted for ``d == 1``)."""
    if not t > 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        sq = x**2
    else:
        sq = (x**2).sum(axis=-1)
    c = 2 * d + 1
    return (c / (4 * math.pi * t)) ** (d / 2) * np.exp(-c * sq / (4 * t))


def local_clt_error(d: int, n: int) -> float:
    """``max_i |A^n(0,i) - p_n(i)|``, including the first ring outside the support."""
    if n < 1:
        raise ValueError("n must be >= 1")
    a = a_power(d, n).values
    padded = np.zeros((2 * n + 3,) * d)
    padded[(slice(1, -1),) * d] = a
    offs = np.indices(padded.shape).reshape(d, -1).T - (n + 1)
    p = gaussian_kernel(d, n, offs if d > 1 else offs[:, 0])
    return float(np.max(np.abs(padded.ravel() - p)))


@dataclass
class ValidationReport:
    passed: bool
    multipliers: np.ndarray
    max_multiplier: float
    h0_weighted_sum: float
    offending: list
    messages: list

    def to_dict(self):
        return {
            "passed": self.passed,
            "max_multiplier": self.max_multiplier,
            "h0_weighted_sum": self.h0_weighted_sum,
            "offending": self.offending,
            "messages": self.messages,
        }


def validate_assumption(topo: Topology, lipschitz, weights, kernel: Kernel, h0=0.0,
                        envelope=None, n_samples: int = 64) -> ValidationReport:
    """Check the well-posedness conditions on a finite graph.

    For each node ``j`` the condition
    ``sum_{i: j->i} c_i p_i |phi_ji(s)| <= p_j envelope(s)`` is tested.  With
    ``phi_ji = w_ji phi`` the smallest admissible multiplier of ``|phi|`` at
    ``j`` is ``sum_i c_i p_i w_ji / p_j``.  ``envelope`` may be ``None``
    (report only), a multiplier of ``|phi|``, or a kernel checked on
    ``n_samples`` points of ``[0, support]``.
    """
    n = topo.n_nodes
    c = np.broadcast_to(np.asarray(lipschitz, dtype=float), (n,))
    p = np.broadcast_to(np.asarray(weights, dtype=float), (n,))
    h0 = np.broadcast_to(np.asarray(h0, dtype=float), (n,))
    messages = []
    offending = []
    if np.any(p <= 0):
        bad = np.flatnonzero(p <= 0).tolist()
        messages.append(f"weights must be positive at nodes {bad}")
        offending.extend(bad)
    if np.any(c < 0) or not np.all(np.isfinite(c)):
        messages.append("Lipschitz constants must be finite and nonnegative")
    src, dst, w = topo.edges()
    mult = np.zeros(n)
    np.add.at(mult, src, c[dst] * p[dst] * w)
    with np.errstate(divide="ignore", invalid="ignore"):
        mult = np.where(p > 0, mult / p, np.inf)
    h0_sum = float(np.sum(np.abs(h0) * p))
    if not np.isfinite(h0_sum):
        messages.append("sum_i h_i(0) p_i is not finite")
    if envelope is not None:
        if isinstance(envelope, Kernel):
            horizon = kernel.support if math.isfinite(kernel.support) else 10.0 / max(
                getattr(kernel, "b", 1.0), 1e-12)
            s = np.linspace(0.0, horizon, n_samples)
            lhs = mult[:, None] * np.abs(kernel(s))[None, :]
            rhs = np.asarray(envelope(s))[None, :]
            bad = np.flatnonzero(np.any(lhs > rhs * (1 + 1e-12) + 1e-300, axis=1))
        else:
            bad = np.flatnonzero(mult > float(envelope) * (1 + 1e-12))
        if bad.size:
            messages.append(f"envelope exceeded at nodes {bad.tolist()}")
            offending.extend(bad.tolist())
    offending = sorted(set(int(i) for i in offending))
    passed = not offending and not messages
    return ValidationReport(passed, mult, float(np.max(mult)) if n else 0.0, h0_sum, offending, messages)
